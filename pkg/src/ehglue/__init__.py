"""Obstruction residuals for gluing Eguchi-Hanson metrics on T^4/Z_2.

Submodules
----------
algebra       2-forms on R^4, the rotation ``rho_x`` and the Eguchi-Hanson terms
pointwise     first- and second-order pointwise obstructions of a curvature block
lattice       truncated lattice sums with tail bounds, parity-class tensors
torus         the 16 singular points, configurations and their documents
obstructions  curvature blocks and residual suites of a configuration
solver        Jacobians, Levenberg-Marquardt, family checks and multi-start search
reproduce     named reproduction cases
cli           the ``ehglue`` command
"""

from .algebra import MINUS, MINUS_TO_PLUS, PLUS, PLUS_TO_MINUS, h4_curvature, rho
from .lattice import SumParams, SumResult, epstein6, lattice_sum_B
from .obstructions import ObstructionReport, assemble_suite, curvature_at
from .solver import SolveOptions, SolveResult, fit_ab_constants, minimize, verify_family
from .torus import Configuration, family_configuration, read_config, write_config

__version__ = "0.1.0"

__all__ = [
    "Configuration", "MINUS", "MINUS_TO_PLUS", "ObstructionReport", "PLUS",
    "PLUS_TO_MINUS", "SolveOptions", "SolveResult", "SumParams", "SumResult",
    "assemble_suite", "curvature_at", "epstein6", "family_configuration",
    "fit_ab_constants", "h4_curvature", "lattice_sum_B", "minimize", "read_config",
    "rho", "verify_family", "write_config",
]
