"""Curvature blocks and obstruction residuals of a gluing configuration.

At a glued point ``p`` the anti-self-dual (or self-dual) curvature induced by
the gluings of the opposite orientation is

    C_p = sum_{q opposite to p} B_{p - q}^L(zeta_q, zeta_q),

where each source uses the rotation convention of its own orientation
(plus-to-minus for positive sources). All lattice sums are read off the
parity-class tensors of :mod:`ehglue.lattice`, which makes every residual an
explicit quartic or quadratic polynomial in the gluing vectors.

Two residual suites are assembled:

``first-order``
    three ``lambda`` values per point and nine torus-deformation residuals
    along an orthonormal basis of traceless symmetric directions (57 total);
``full``
    the five independent entries of every ``C_p`` and four deformation
    residuals along ``e_k (x) e_k`` (84 total).

Curvature-type residuals are divided by ``s^2`` and deformation residuals by
``s^4``, with ``s^2`` the mean of ``|zeta|^2``, so that suites are invariant
under a global rescaling of the gluing vectors.
"""

import csv
import dataclasses
import io
import json

import numpy as np

from . import lattice
from .algebra import MINUS, MINUS_TO_PLUS, PLUS, PLUS_TO_MINUS
from .lattice import PAIRINGS, SumParams, class_tensors
from .pointwise import classify_kernel, lambda_vector, mu1
from .torus import (EPS, FIRST_ORDER, FULL, N_POINTS, SUITES, ConfigurationError,
                    count_freedoms_constraints, eps_label, point_index)

ENTRY_NAMES = ("R11", "R22", "R12", "R13", "R23")
_ENTRY_IDX = ((0, 0), (1, 1), (0, 1), (0, 2), (1, 2))
# Spectral and Frobenius norm bounds of 12 pi_tr(u (x) u) for unit u.
_SPEC_PER_UNIT = 8.0
_FROB_PER_UNIT = 12.0 * np.sqrt(2.0 / 3.0)

_CLASS = np.bitwise_xor.outer(np.arange(N_POINTS), np.arange(N_POINTS))


def _index(p):
    if isinstance(p, (int, np.integer)):
        if not 0 <= int(p) < N_POINTS:
            raise ValueError(f"point index out of range: {p}")
        return int(p)
    return point_index(p)


def traceless_directions():
    """Orthonormal basis (Frobenius) of traceless symmetric 4x4 matrices."""
    basis = []
    for i in range(4):
        for j in range(i + 1, 4):
            m = np.zeros((4, 4))
            m[i, j] = m[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(m)
    for k in range(1, 4):
        d = np.zeros(4)
        d[:k] = 1.0
        d[k] = -float(k)
        basis.append(np.diag(d / np.linalg.norm(d)))
    return basis


def axis_directions():
    """The four directions ``e_k (x) e_k``."""
    return [np.diag(np.eye(4)[k]) for k in range(4)]


def direction_from_K(K, L):
    """Map a deformation ``K`` to the lattice direction ``K L^-1``."""
    return np.asarray(K, dtype=float) @ np.linalg.inv(np.asarray(L, dtype=float))


def _pairing_index(orientation, mirror):
    # 0 = plus-to-minus, 1 = minus-to-plus; positive sources use 0 unless
    # the mirrored convention is requested.
    idx = np.where(orientation == PLUS, 0, 1)
    return 1 - idx if mirror else idx


def _source_tensors(config, T, mirror=False):
    """``Tpq[p, q]``: tensor of source ``q`` seen from target ``p``, with a mask."""
    pidx = _pairing_index(config.orientation, mirror)
    Tpq = T[_CLASS, pidx[None, :]]
    o = config.orientation
    mask = (o[:, None] * o[None, :]) == -1
    return Tpq, mask


def _tensors(config, params, order6=False):
    ct = class_tensors(config.L, params.radius, order6)
    lattice._check_tail(ct.scalar_tail, params)
    return ct


def curvature_blocks(config, params=SumParams(), mirror=False):
    """All 16 curvature blocks ``C_p`` (zero at unglued points)."""
    ct = _tensors(config, params)
    Tpq, mask = _source_tensors(config, ct.T, mirror)
    Z = config.zeta
    return np.einsum("pq,pqikjl,qi,qk->pjl", mask.astype(float), Tpq, Z, Z)


def _check_target(config, p):
    o = config.orientation[p]
    if o == 0:
        raise ConfigurationError(f"point {eps_label(EPS[p])} is not glued")
    if not np.any(config.orientation == -o):
        raise ConfigurationError(
            f"no gluing of the opposite orientation to {eps_label(EPS[p])}")


def curvature_at(config, p, params=SumParams(), mirror=False):
    """Curvature block induced at point ``p`` by the opposite gluings."""
    p = _index(p)
    _check_target(config, p)
    return curvature_blocks(config, params, mirror)[p]


def curvature_tails(config, params=SumParams()):
    """Frobenius tail bound of every ``C_p`` (16-vector)."""
    scalar = lattice.scalar_tail_bound(config.L, params.radius)
    w = np.sum(config.zeta ** 2, axis=1)
    o = config.orientation
    mask = (o[:, None] * o[None, :]) == -1
    return _FROB_PER_UNIT * scalar * (mask @ w)


def spectral_tails(config, params=SumParams()):
    """Spectral-norm tail bound of every ``C_p`` (16-vector)."""
    return curvature_tails(config, params) * (_SPEC_PER_UNIT / _FROB_PER_UNIT)


def residual_lambda(config, p, params=SumParams()):
    """``(lambda_1, lambda_2, lambda_3)`` at point ``p``."""
    p = _index(p)
    return lambda_vector(curvature_at(config, p, params), config.zeta[p])


def residual_full_R(config, p, params=SumParams()):
    """The five independent entries ``(R11, R22, R12, R13, R23)`` of ``C_p``."""
    C = curvature_at(config, p, params)
    return np.array([C[i, j] for i, j in _ENTRY_IDX])


def residual_dz(config, p, z, params=SumParams()):
    """``sum_i <B_{p-i}(z, zeta_p) zeta_i, zeta_i>`` over opposite points ``i``.

    This is half the derivative of ``sum_i <B_{p-i}(zeta_p, zeta_p) zeta_i,
    zeta_i>`` in the direction ``z``; the sources sit at ``p`` and use the
    convention of ``p``'s orientation.
    """
    p = _index(p)
    _check_target(config, p)
    ct = _tensors(config, params)
    pi = 0 if config.orientation[p] == PLUS else 1
    total = 0.0
    for i in np.flatnonzero(config.orientation == -config.orientation[p]):
        T = ct.T[p ^ i, pi]
        zi = config.zeta[i]
        total += np.einsum("a,b,abjl,j,l->", z, config.zeta[p], T, zi, zi)
    return float(total)


DK_METHODS = ("analytic", "fd", "closed-form")


def _pair_weights(config):
    # W[c] = sum over (i positive, j negative) with class c of
    # zeta_i (x) zeta_i (x) zeta_j (x) zeta_j.
    plus = np.flatnonzero(config.orientation == PLUS)
    minus = np.flatnonzero(config.orientation == MINUS)
    W = np.zeros((16, 3, 3, 3, 3))
    for i in plus:
        zi = config.zeta[i]
        for j in minus:
            zj = config.zeta[j]
            W[i ^ j] += np.einsum("a,b,c,d->abcd", zi, zi, zj, zj)
    return W


def dK_tensors(config, dL, params=SumParams(), method="analytic", step=None):
    """Derivative of the plus-to-minus class tensors along ``L + t dL``.

    ``analytic`` differentiates the truncated sums exactly through degree-6
    moments. ``fd`` is a central difference of freshly built tensors with
    step ``1e-5 |L| / |dL|``. ``closed-form`` evaluates the weighted sum
    ``sum <Lv, dL v> / |Lv|^2 b_{Lv}`` in the closed-form deformation residual.
    """
    dL = np.asarray(dL, dtype=float)
    if method == "analytic":
        ct = _tensors(config, params, order6=True)
        return ct.derivative(dL)[:, 0]
    if method == "fd":
        return _fd_tensors(config.L, dL, params.radius, step)
    if method == "closed-form":
        ct = _tensors(config, params, order6=True)
        return ct.weighted(dL)[:, 0]
    raise ValueError(f"method must be one of {DK_METHODS}, got {method!r}")


def _fd_tensors(L, dL, radius, step=None):
    nd = np.linalg.norm(dL)
    if nd == 0.0:
        return np.zeros((16, 3, 3, 3, 3))
    h = 1e-5 * np.linalg.norm(L) / nd if step is None else float(step)
    tp = lattice.build_class_tensors(L + h * dL, radius).T[:, 0]
    tm = lattice.build_class_tensors(L - h * dL, radius).T[:, 0]
    return (tp - tm) / (2.0 * h)


def residual_dK(config, K, params=SumParams(), method="analytic"):
    """``sum_{i in S+, j in S-} <d_K B_{j-i}(zeta_i, zeta_i) zeta_j, zeta_j>``.

    ``K`` is used directly as the lattice direction ``dL``; see
    :func:`direction_from_K` for the ``K L^-1`` mapping. By the transpose
    identity the sum over negative sources gives the same value.
    """
    if not config.is_total:
        raise ConfigurationError("deformation residuals need every point glued")
    dT = dK_tensors(config, K, params, method)
    return float(np.einsum("cabjl,cabjl->", _pair_weights(config), dT))


def dK_tail(config, K, params=SumParams()):
    """Bound on the truncation error of :func:`residual_dK`."""
    per_unit = lattice.derivative_tail_bound(config.L, K, params.radius)
    w = np.sum(config.zeta ** 2, axis=1)
    plus = config.orientation == PLUS
    minus = config.orientation == MINUS
    return float(per_unit * np.sum(w[plus]) * np.sum(w[minus]))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class PointReport:
    eps: tuple
    orientation: int
    zeta: np.ndarray
    curvature: np.ndarray
    eigenvalues: np.ndarray
    lambdas: np.ndarray
    mu1: float
    kernel: str
    tail: float


@dataclasses.dataclass
class ObstructionReport:
    """Residual suite of a configuration with its per-point breakdown.

    ``residuals`` are scale-normalised; ``raw_residuals`` are not. ``tails``
    bounds the truncation error of each normalised residual.
    """

    suite: str
    radius: int
    scale: float
    names: list
    residuals: np.ndarray
    raw_residuals: np.ndarray
    tails: np.ndarray
    points: list
    dK_method: str
    family_warning: str = None

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.residuals)))

    @property
    def norm(self):
        return float(np.linalg.norm(self.residuals))

    def verdict(self, tol=1e-6):
        """``'unobstructed'`` when every residual is below ``tol``."""
        return "unobstructed" if self.max_abs < tol else "obstructed"

    def to_dict(self, tol=1e-6):
        return {
            "suite": self.suite,
            "radius": self.radius,
            "scale": self.scale,
            "dK_method": self.dK_method,
            "n_residuals": len(self.names),
            "family_warning": self.family_warning,
            "max_abs": self.max_abs,
            "norm": self.norm,
            "tolerance": tol,
            "verdict": self.verdict(tol),
            "residuals": [
                {"name": n, "value": float(v), "raw": float(r), "tail": float(t)}
                for n, v, r, t in zip(self.names, self.residuals,
                                      self.raw_residuals, self.tails)],
            "points": [{
                "eps": list(pt.eps),
                "orientation": {PLUS: "+", MINUS: "-"}.get(pt.orientation),
                "zeta": pt.zeta.tolist(),
                "curvature": pt.curvature.tolist(),
                "eigenvalues": pt.eigenvalues.tolist(),
                "lambda": pt.lambdas.tolist(),
                "mu1": pt.mu1,
                "kernel": pt.kernel,
                "tail": pt.tail,
            } for pt in self.points],
        }

    def to_json(self, tol=1e-6):
        return json.dumps(self.to_dict(tol), indent=2)

    def to_csv(self):
        """Rows ``point, residual, value, tail`` (deformation rows use ``torus``)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["point", "residual", "value", "tail"])
        for n, v, t in zip(self.names, self.residuals, self.tails):
            point, _, name = n.partition(":")
            w.writerow([point, name, repr(float(v)), repr(float(t))])
        return buf.getvalue()


def zeta_scale(config):
    """``s^2``: mean squared norm of the glued ``zeta``."""
    glued = config.orientation != 0
    return float(np.mean(np.sum(config.zeta[glued] ** 2, axis=1)))


class SuiteEvaluator:
    """Residual suite as a fast function of ``(orientation, zeta)`` at fixed ``L``.

    Class tensors and their derivatives along the suite's deformation
    directions are computed once, so each evaluation is a handful of small
    tensor contractions.
    """

    def __init__(self, L, suite=FULL, params=SumParams(), dK_method="analytic"):
        if suite not in SUITES:
            raise ValueError(f"suite must be one of {SUITES}, got {suite!r}")
        if dK_method not in DK_METHODS:
            raise ValueError(f"dK_method must be one of {DK_METHODS}, got {dK_method!r}")
        self.L = lattice.as_lattice(L)
        self.suite = suite
        self.params = params
        self.dK_method = dK_method
        ct = class_tensors(self.L, params.radius, order6=dK_method != "fd")
        lattice._check_tail(ct.scalar_tail, params)
        self.T = ct.T
        self.directions = (traceless_directions() if suite == FIRST_ORDER
                           else axis_directions())
        if dK_method == "analytic":
            self.dT = np.array([ct.derivative(K)[:, 0] for K in self.directions])
        elif dK_method == "closed-form":
            self.dT = np.array([ct.weighted(K)[:, 0] for K in self.directions])
        else:
            self.dT = np.array([_fd_tensors(self.L, K, params.radius)
                                for K in self.directions])
        self.scalar_tail = ct.scalar_tail

    @property
    def n_residuals(self):
        per_point = 3 if self.suite == FIRST_ORDER else 5
        return per_point * N_POINTS + len(self.directions)

    def names(self):
        keys = (("lambda1", "lambda2", "lambda3") if self.suite == FIRST_ORDER
                else ENTRY_NAMES)
        out = [f"{eps_label(EPS[p])}:{k}" for p in range(N_POINTS) for k in keys]
        return out + [f"torus:dK{k + 1}" for k in range(len(self.directions))]

    def blocks(self, orientation, zeta):
        orientation = np.asarray(orientation)
        pidx = _pairing_index(orientation, False)
        Tpq = self.T[_CLASS, pidx[None, :]]
        mask = ((orientation[:, None] * orientation[None, :]) == -1).astype(float)
        return np.einsum("pq,pqikjl,qi,qk->pjl", mask, Tpq, zeta, zeta)

    def raw(self, orientation, zeta):
        """Unnormalised residual vector and the curvature blocks."""
        orientation = np.asarray(orientation)
        zeta = np.asarray(zeta, dtype=float)
        C = self.blocks(orientation, zeta)
        if self.suite == FIRST_ORDER:
            cur = np.concatenate([lambda_vector(C[p], zeta[p]) for p in range(N_POINTS)])
        else:
            cur = np.stack([C[:, i, j] for i, j in _ENTRY_IDX], axis=1).ravel()
        plus = orientation == PLUS
        minus = orientation == MINUS
        W = np.zeros((16, 3, 3, 3, 3))
        for i in np.flatnonzero(plus):
            qi = np.outer(zeta[i], zeta[i])
            for j in np.flatnonzero(minus):
                W[i ^ j] += qi[:, :, None, None] * np.outer(zeta[j], zeta[j])
        dk = np.einsum("cabjl,kcabjl->k", W, self.dT)
        return np.concatenate([cur, dk]), C

    def weights(self, zeta):
        s2 = float(np.mean(np.sum(np.asarray(zeta) ** 2, axis=1)))
        nd = len(self.directions)
        return s2, np.array([s2] * (self.n_residuals - nd) + [s2 ** 2] * nd)

    def __call__(self, orientation, zeta):
        """Scale-normalised residual vector."""
        raw, _ = self.raw(orientation, zeta)
        _, w = self.weights(zeta)
        return raw / w


def assemble_suite(config, suite=FULL, params=SumParams(), dK_method="analytic"):
    """Evaluate a residual suite and return an :class:`ObstructionReport`."""
    _, n_constraints = count_freedoms_constraints(config, suite)
    if not np.any(config.orientation == PLUS) or not np.any(config.orientation == MINUS):
        raise ConfigurationError("both orientations must be present")
    ev = SuiteEvaluator(config.L, suite, params, dK_method)
    raw, C = ev.raw(config.orientation, config.zeta)
    s2, w = ev.weights(config.zeta)
    ctail = curvature_tails(config, params)
    points = []
    per_point = 3 if suite == FIRST_ORDER else 5
    tails = []
    for p in range(N_POINTS):
        z = config.zeta[p]
        points.append(PointReport(
            tuple(int(e) for e in EPS[p]), int(config.orientation[p]), z.copy(),
            C[p].copy(), np.linalg.eigvalsh(C[p]), lambda_vector(C[p], z),
            mu1(C[p], z), classify_kernel(C[p]).value, float(ctail[p])))
        tails += [ctail[p] / s2] * per_point
    tails += [dK_tail(config, K, params) / s2 ** 2 for K in ev.directions]
    report = ObstructionReport(suite, params.radius, float(np.sqrt(s2)), ev.names(),
                               raw / w, raw, np.array(tails), points, dK_method)
    assert len(report.names) == n_constraints
    return report


def equivalence_check(config, samples=100, params=SumParams(), seed=0):
    """Largest discrepancy in the transpose identity over random samples.

    For opposite points ``i`` and ``j`` and a direction ``z`` the identity reads

        <B_{j-i}(zeta_i, z) zeta_j, zeta_j> = <B_{j-i}(zeta_j, zeta_j) zeta_i, z>,

    the left side using ``i``'s convention and the right side ``j``'s.
    """
    plus = np.flatnonzero(config.orientation == PLUS)
    minus = np.flatnonzero(config.orientation == MINUS)
    if plus.size == 0 or minus.size == 0:
        raise ConfigurationError("both orientations must be present")
    ct = _tensors(config, params)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        i, j = int(rng.choice(plus)), int(rng.choice(minus))
        if rng.random() < 0.5:
            i, j = j, i
        z = rng.normal(size=3)
        lhs, rhs = transpose_identity_sides(ct.T, i ^ j, config.orientation[i],
                                            config.zeta[i], config.zeta[j], z)
        worst = max(worst, abs(lhs - rhs))
    return worst


def transpose_identity_sides(T, cls, orientation_i, zeta_i, zeta_j, z):
    """Both sides of the transpose identity from class tensors ``T``."""
    pi = 0 if orientation_i == PLUS else 1
    lhs = np.einsum("a,b,abjl,j,l->", zeta_i, z, T[cls, pi], zeta_j, zeta_j)
    rhs = np.einsum("a,b,abjl,j,l->", zeta_j, zeta_j, T[cls, 1 - pi], zeta_i, z)
    return float(lhs), float(rhs)


@dataclasses.dataclass
class SinglePositiveReport:
    """Invertibility census at the majority points of a lopsided pattern."""

    minority_sign: int
    minority: list
    eigenvalues: dict
    min_abs_eig: dict
    spectral_tail: dict
    certified_invertible: list
    verdict: str
    stable_obstruction: bool

    def to_dict(self):
        return {
            "minority_orientation": "+" if self.minority_sign == PLUS else "-",
            "minority_points": [eps_label(EPS[p]) for p in self.minority],
            "points": [{
                "eps": eps_label(EPS[p]),
                "eigenvalues": self.eigenvalues[p].tolist(),
                "min_abs_eigenvalue": self.min_abs_eig[p],
                "spectral_tail": self.spectral_tail[p],
                "certified_invertible": p in self.certified_invertible,
            } for p in sorted(self.eigenvalues)],
            "verdict": self.verdict,
            "stable_obstruction": self.stable_obstruction,
        }


def single_positive_report(config, params=SumParams()):
    """Eigenvalues of the curvature at every point of the majority orientation.

    The minority orientation (at most three points, typically one positive
    gluing) provides the sources. If the curvature is invertible at any
    majority point, with a margin exceeding the spectral tail bound, the
    first-order equation ``C_p zeta_p = 0`` has no solution there and the
    verdict is ``obstructed``. ``stable_obstruction`` flags patterns with at
    most three positive gluings.
    """
    plus = [int(p) for p in np.flatnonzero(config.orientation == PLUS)]
    minus = [int(p) for p in np.flatnonzero(config.orientation == MINUS)]
    if not plus or not minus:
        raise ConfigurationError("both orientations must be present")
    if len(plus) <= len(minus):
        sign, minority, majority = PLUS, plus, minus
    else:
        sign, minority, majority = MINUS, minus, plus
    if len(minority) > 3:
        raise ConfigurationError(
            f"expected at most 3 gluings of one orientation, found {len(minority)}")
    C = curvature_blocks(config, params)
    stail = spectral_tails(config, params)
    eig, mins, tails, cert = {}, {}, {}, []
    for p in majority:
        e = np.linalg.eigvalsh(C[p])
        eig[p] = e
        mins[p] = float(np.min(np.abs(e)))
        tails[p] = float(stail[p])
        if mins[p] > tails[p]:
            cert.append(p)
    verdict = "obstructed" if cert else "undecided"
    return SinglePositiveReport(sign, minority, eig, mins, tails, cert, verdict,
                                len(plus) <= 3)


__all__ = [
    "ObstructionReport", "PointReport", "SuiteEvaluator", "SinglePositiveReport", "assemble_suite",
    "axis_directions", "curvature_at", "curvature_blocks", "curvature_tails",
    "dK_tail", "dK_tensors", "direction_from_K", "equivalence_check",
    "residual_dK", "residual_dz", "residual_full_R", "residual_lambda",
    "single_positive_report", "spectral_tails", "traceless_directions",
    "zeta_scale", "PAIRINGS", "PLUS_TO_MINUS", "MINUS_TO_PLUS", "SUITES",
]
