"""Gluing configurations on the flat orbifold T^4/Z_2 = R^4 / (2 L Z^4, -1).

The 16 singular points are labelled by ``eps`` in ``{0,1}^4`` and sit at
``L eps``. Points are indexed ``8 eps1 + 4 eps2 + 2 eps3 + eps4``, so index
order is lexicographic order of the labels, and the parity class of the offset
``eps_p - eps_q`` has index ``p ^ q``.

A :class:`Configuration` stores ``L``, an orientation per point (+1, -1, or 0
for a point left singular) and a gluing vector ``zeta`` per point.
"""

import io
import itertools
import json
import math

import numpy as np

from .algebra import MINUS, PLUS, rho
from .lattice import as_lattice

EPS = np.array(list(itertools.product((0, 1), repeat=4)), dtype=np.int64)
EPS.setflags(write=False)
N_POINTS = 16


class ConfigurationError(ValueError):
    """Invalid configuration data or document."""


def eps_label(eps):
    return "".join(str(int(e)) for e in eps)


def point_index(eps):
    """Index of the point with label ``eps`` (sequence of four 0/1)."""
    eps = tuple(int(e) for e in eps)
    if len(eps) != 4 or any(e not in (0, 1) for e in eps):
        raise ValueError(f"eps must be four bits, got {eps!r}")
    return 8 * eps[0] + 4 * eps[1] + 2 * eps[2] + eps[3]


def opposite_point(eps):
    """The point at maximal distance, ``eps -> 1 - eps``."""
    return tuple(1 - int(e) for e in eps)


def parity(eps):
    return int(sum(int(e) for e in eps)) % 2


def neighbor_census(eps):
    """Histogram ``{squared distance: (n_same_parity, n_opposite_parity)}``.

    Distances are measured for ``L = I`` between labels, so the squared
    distances are 1, 2, 3 and 4.
    """
    p = np.asarray(eps, dtype=np.int64)
    out = {}
    for q in EPS:
        d2 = int(np.sum((q - p) ** 2))
        if d2 == 0:
            continue
        same, opp = out.get(d2, (0, 0))
        if parity(q) == parity(p):
            same += 1
        else:
            opp += 1
        out[d2] = (same, opp)
    return dict(sorted(out.items()))


class Configuration:
    """Immutable gluing data: lattice matrix, orientations and parameters.

    ``orientation[p]`` is +1, -1, or 0 for an unglued point, and
    ``zeta[p]`` is the gluing vector (zero for unglued points).
    """

    __slots__ = ("L", "orientation", "zeta")

    def __init__(self, L, orientation, zeta):
        L = as_lattice(L)
        orientation = np.array(orientation, dtype=np.int64).reshape(-1)
        zeta = np.array(zeta, dtype=float)
        if orientation.shape != (N_POINTS,) or zeta.shape != (N_POINTS, 3):
            raise ConfigurationError("need 16 orientations and a (16, 3) zeta array")
        if not np.all(np.isin(orientation, (-1, 0, 1))):
            raise ConfigurationError("orientations must be +1, -1 or 0")
        if not np.all(np.isfinite(zeta)):
            raise ConfigurationError("zeta has non-finite entries")
        glued = orientation != 0
        norms = np.linalg.norm(zeta, axis=1)
        bad = np.flatnonzero(glued & (norms == 0.0))
        if bad.size:
            raise ConfigurationError(
                f"zero zeta at glued point {eps_label(EPS[bad[0]])}")
        if np.any(~glued & (norms != 0.0)):
            raise ConfigurationError("unglued points must have zero zeta")
        for a in (L, orientation, zeta):
            a.setflags(write=False)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "orientation", orientation)
        object.__setattr__(self, "zeta", zeta)

    def __setattr__(self, name, value):
        raise AttributeError("Configuration is immutable")

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return (np.array_equal(self.L, other.L)
                and np.array_equal(self.orientation, other.orientation)
                and np.array_equal(self.zeta, other.zeta))

    def __hash__(self):
        return hash((self.L.tobytes(), self.orientation.tobytes(), self.zeta.tobytes()))

    def __repr__(self):
        n_plus = int(np.sum(self.orientation == PLUS))
        n_minus = int(np.sum(self.orientation == MINUS))
        return f"Configuration(|S+|={n_plus}, |S-|={n_minus})"

    @property
    def is_total(self):
        return bool(np.all(self.orientation != 0))

    def replace(self, L=None, orientation=None, zeta=None):
        return Configuration(self.L if L is None else L,
                             self.orientation if orientation is None else orientation,
                             self.zeta if zeta is None else zeta)

    def scaled(self, s):
        """Same configuration with every ``zeta`` multiplied by ``s``."""
        return self.replace(zeta=s * self.zeta)

    def mirrored(self):
        """Swap every orientation."""
        return self.replace(orientation=-self.orientation)


def parity_sets(config):
    """Indices of the positive and negative points, as two sorted lists."""
    o = config.orientation
    return [int(p) for p in np.flatnonzero(o == PLUS)], \
        [int(p) for p in np.flatnonzero(o == MINUS)]


def chessboard_orientation():
    """-1 on labels with even coordinate sum, +1 on odd ones."""
    return np.array([MINUS if parity(e) == 0 else PLUS for e in EPS])


def build_chessboard(L, zeta_map, enforce_opposite_equality=True):
    """Chessboard configuration from a map ``eps -> zeta``.

    Orientation is decided by the parity of ``sum(eps)``. With enforcement,
    a value given for ``p`` is copied to ``p^c``, and giving different values
    at an opposite pair is an error. Every point must end up with a nonzero
    ``zeta``.
    """
    zeta = np.zeros((N_POINTS, 3))
    given = np.zeros(N_POINTS, dtype=bool)
    for eps, z in zeta_map.items():
        p = point_index(eps)
        z = np.asarray(z, dtype=float)
        if np.linalg.norm(z) == 0.0:
            raise ConfigurationError(f"zero zeta requested at {eps_label(EPS[p])}")
        zeta[p] = z
        given[p] = True
    if enforce_opposite_equality:
        for p in range(N_POINTS):
            q = point_index(opposite_point(EPS[p]))
            if given[p] and given[q] and not np.array_equal(zeta[p], zeta[q]):
                raise ConfigurationError(
                    f"conflicting zeta at opposite points {eps_label(EPS[p])} "
                    f"and {eps_label(EPS[q])}")
            if given[p] and not given[q]:
                zeta[q] = zeta[p]
                given[q] = True
    missing = np.flatnonzero(~given)
    if missing.size:
        raise ConfigurationError(f"no zeta given for point {eps_label(EPS[missing[0]])}")
    return Configuration(L, chessboard_orientation(), zeta)


def family_conditions(x, y, z):
    """Residuals of the orthogonal equal-length conditions on ``(x, y, z)``.

    Returns ``(|x|^2 - |y|^2, |y|^2 - |z|^2, x.y, x.z, y.z, 0)``.
    """
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    return np.array([x @ x - y @ y, y @ y - z @ z, x @ y, x @ z, y @ z, 0.0])


# Representatives of the opposite pairs inside each orientation class:
# e_k for the positive (odd) class, e_1 + e_k for the negative (even) class,
# with e_1 + e_1 read as 0.
def _rep(k, positive_side):
    e = np.zeros(4, dtype=np.int64)
    if positive_side:
        e[k] = 1
    elif k > 0:
        e[0] = e[k] = 1
    return tuple(int(t) for t in e)


def family_frames():
    """The rotations ``D_k = rho_{e_k}``, diagonal sign matrices."""
    return [np.rint(rho(np.eye(4)[k])) for k in range(4)]


def family_configuration(x, y, z, L=None, other=None, frames="adapted"):
    """Chessboard configuration built from coefficient vectors ``x, y, z``.

    The four pairs ``{e_k, e_k^c}`` carry ``zeta_k = (x_k, y_k, z_k)`` and
    the pairs ``{e_1 + e_k, (e_1 + e_k)^c}`` of the other class carry the
    coefficients in ``other`` (a triple of 4-vectors, defaulting to the same
    ``(x, y, z)``).

    With ``frames='adapted'`` the vector at pair ``k`` is ``D_k zeta_k``,
    where ``D_k = rho_{e_k}`` is the sign flip relating the constant 2-form
    basis seen from ``e_1`` and from ``e_k``. With ``frames='constant'`` the
    coefficients are used as given.

    Orientations follow the chessboard pattern, so the pairs ``{e_k, e_k^c}``
    are positive and the pairs containing ``e_1 + e_k`` are negative.
    """
    L = np.eye(4) if L is None else L
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    ox, oy, oz = (x, y, z) if other is None else (np.asarray(v, dtype=float) for v in other)
    if frames == "adapted":
        D = family_frames()
    elif frames == "constant":
        D = [np.eye(3)] * 4
    else:
        raise ValueError(f"frames must be 'adapted' or 'constant', got {frames!r}")
    zeta_map = {}
    for k in range(4):
        zeta_map[_rep(k, True)] = D[k] @ np.array([x[k], y[k], z[k]])
        zeta_map[_rep(k, False)] = D[k] @ np.array([ox[k], oy[k], oz[k]])
    return build_chessboard(L, zeta_map)


def single_positive_configuration(L=None, position=(1, 0, 0, 0), zeta_plus=(1.0, 0.0, 0.0),
                                  zeta_minus=(1.0, 0.0, 0.0)):
    """One positive gluing at ``position`` and negative gluings elsewhere."""
    L = np.eye(4) if L is None else L
    orientation = np.full(N_POINTS, MINUS)
    zeta = np.tile(np.asarray(zeta_minus, dtype=float), (N_POINTS, 1))
    p = point_index(position)
    orientation[p] = PLUS
    zeta[p] = zeta_plus
    return Configuration(L, orientation, zeta)


FIRST_ORDER = "first-order"
FULL = "full"
SUITES = (FIRST_ORDER, FULL)


def count_freedoms_constraints(config, suite):
    """``(n_params, n_constraints)`` for a total configuration.

    Parameters are three per gluing plus nine torus deformations (symmetric
    4x4 directions modulo scaling). Constraints are three ``lambda`` per point
    plus nine deformation equations for the first-order suite, and five
    curvature entries per point plus four deformation equations for the
    full suite.
    """
    if not config.is_total:
        raise ConfigurationError("counting needs every point glued")
    if suite not in SUITES:
        raise ValueError(f"suite must be one of {SUITES}, got {suite!r}")
    n = N_POINTS
    n_params = 3 * n + 9
    n_constraints = 3 * n + 9 if suite == FIRST_ORDER else 5 * n + 4
    return n_params, n_constraints


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------

_ORIENT_IN = {"+": PLUS, "-": MINUS, "−": MINUS, None: 0}
_ORIENT_OUT = {PLUS: "+", MINUS: "-", 0: None}


def config_to_dict(config):
    points = []
    for p in range(N_POINTS):
        o = int(config.orientation[p])
        points.append({
            "eps": [int(e) for e in EPS[p]],
            "orientation": _ORIENT_OUT[o],
            "zeta": [float(v) for v in config.zeta[p]] if o else None,
        })
    return {"L": [[float(v) for v in row] for row in config.L], "points": points}


def config_from_dict(doc):
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration document must be an object")
    extra = set(doc) - {"L", "points"}
    if extra:
        raise ConfigurationError(f"unknown field(s): {sorted(extra)}")
    for key in ("L", "points"):
        if key not in doc:
            raise ConfigurationError(f"missing field {key!r}")
    try:
        L = np.array(doc["L"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"L is not a 4x4 numeric array: {exc}") from None
    if L.shape != (4, 4):
        raise ConfigurationError(f"L must be 4x4, got shape {L.shape}")
    if not np.linalg.det(L) > 0:
        raise ConfigurationError("L must have positive determinant")
    if not isinstance(doc["points"], list):
        raise ConfigurationError("points must be an array")
    orientation = np.zeros(N_POINTS, dtype=np.int64)
    zeta = np.zeros((N_POINTS, 3))
    seen = set()
    for rec in doc["points"]:
        if not isinstance(rec, dict):
            raise ConfigurationError("each point must be an object")
        extra = set(rec) - {"eps", "orientation", "zeta"}
        if extra:
            raise ConfigurationError(f"unknown point field(s): {sorted(extra)}")
        try:
            p = point_index(rec["eps"])
        except (KeyError, TypeError, ValueError):
            raise ConfigurationError(f"bad or missing eps in point {rec!r}") from None
        if p in seen:
            raise ConfigurationError(f"duplicate point {eps_label(EPS[p])}")
        seen.add(p)
        o = rec.get("orientation")
        if o not in _ORIENT_IN:
            raise ConfigurationError(
                f"orientation at {eps_label(EPS[p])} must be '+', '-' or null")
        orientation[p] = _ORIENT_IN[o]
        z = rec.get("zeta")
        if orientation[p]:
            try:
                zeta[p] = np.array(z, dtype=float).reshape(3)
            except (TypeError, ValueError):
                raise ConfigurationError(
                    f"zeta at {eps_label(EPS[p])} must be 3 numbers") from None
        elif z is not None:
            raise ConfigurationError(f"unglued point {eps_label(EPS[p])} has a zeta")
    missing = [eps_label(EPS[p]) for p in range(N_POINTS) if p not in seen]
    if missing:
        raise ConfigurationError(f"missing point entry for eps {missing[0]}")
    return Configuration(L, orientation, zeta)


def write_config(config, target):
    """Write a configuration document to a path or text stream."""
    text = json.dumps(config_to_dict(config), indent=2) + "\n"
    if isinstance(target, io.TextIOBase) or hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)


def read_config(source):
    """Read a configuration document from a path or text stream."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed document: {exc}") from None
    return config_from_dict(doc)


def _reject_constant(name):
    raise ConfigurationError(f"non-finite number {name} in document")


def is_close_to_family(x, y, z, tol=1e-10):
    res = family_conditions(x, y, z)
    scale = max(float(np.dot(x, x)), 1.0)
    return bool(math.isclose(0.0, np.max(np.abs(res)) / scale, abs_tol=tol))
