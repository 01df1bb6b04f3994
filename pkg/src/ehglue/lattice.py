"""Truncated lattice sums with rigorous tail bounds.

The sums run over ``v = L(x + 2a)`` for ``a`` in Z^4. A sum with truncation
radius ``R`` keeps the index box ``|x/2 + a|_inf <= R``; for integer ``x``
this is the set of ``v`` congruent to ``x`` mod 2 with ``|v|_inf <= 2R``, which
is symmetric under ``v -> -v`` and under ``x -> x + 2e``.

Tail bound
----------
For a term left out of the box, ``|L(x + 2a)| >= 2 sigma_min(L) |w|`` with
``w = x/2 + a`` and ``|w|_inf > R``. Comparing each term with the integral of
``|u|^-6`` over the unit cube centred at ``w`` gives

    sum_{excluded} |L(x + 2a)|^-6
        <= 2^-6 sigma_min(L)^-6 (1 + 1/R)^6 KAPPA / (R - 1/2)^2,

where ``KAPPA`` is the integral of ``|u|_2^-6`` over ``|u|_inf > 1`` in R^4.
Each term of ``B`` has Frobenius norm at most ``12 sqrt(2/3) |zeta||zeta'|``
times its scalar weight, which turns the scalar bound into a matrix bound.
"""

import collections
import dataclasses
import itertools
import os
import warnings

import numba
import numpy as np

from . import _kernels
from .algebra import (CONVENTIONS, MINUS_TO_PLUS, PLUS_TO_MINUS, convention_for,
                      convention_signs, omega, rho, trace_free)
from .algebra import sym as _sym

# Integral of |u|^-6 over {|u|_inf > 1} in R^4, equal to
# 32 * int_{[0,1]^3} (1 + |q|^2)^-3 dq = 6.0949998287... (rounded up).
KAPPA = 6.0950

# Frobenius norm bound of pi_tr sym(u (x) u') for unit u, u'.
_FROB_PER_UNIT = np.sqrt(2.0 / 3.0)

PAIRINGS = CONVENTIONS

THREADS_ENV = "EHGLUE_NUM_THREADS"


def thread_count_from_env(environ=None):
    """Thread count requested through ``EHGLUE_NUM_THREADS`` (``None`` if unset).

    Raises ``ValueError`` unless the value is an integer >= 1.
    """
    text = (os.environ if environ is None else environ).get(THREADS_ENV, "").strip()
    if not text:
        return None
    try:
        n = int(text)
    except ValueError:
        n = 0
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be an integer >= 1, got {text!r}")
    return n


def _apply_thread_env():
    try:
        n = thread_count_from_env()
    except ValueError as exc:
        warnings.warn(f"{exc}; using the default thread count")
        return
    if n is not None:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


_apply_thread_env()


class SingularLatticeError(ValueError):
    """A summand of a lattice sum sits at the origin."""


class TailToleranceError(ValueError):
    """The truncation radius is too small for the requested tail tolerance."""


@dataclasses.dataclass(frozen=True)
class SumParams:
    """Truncation radius and tail tolerance for lattice sums.

    ``tail_tol`` bounds the scalar tail ``sum |L(x+2a)|^-6`` over the excluded
    indices, that is the tail per unit of kernel weight. Pass ``inf`` to
    accept any tail.
    """

    radius: int = 40
    tail_tol: float = 1e-4

    def __post_init__(self):
        if int(self.radius) != self.radius or self.radius < 4:
            raise ValueError(f"radius must be an integer >= 4, got {self.radius}")
        if not self.tail_tol > 0:
            raise ValueError(f"tail_tol must be positive, got {self.tail_tol}")
        object.__setattr__(self, "radius", int(self.radius))


@dataclasses.dataclass(frozen=True)
class SumResult:
    """Value of a truncated sum together with a rigorous bound on its tail."""

    value: np.ndarray
    tail: float
    radius: int


def as_lattice(L):
    """Validate a lattice matrix and return it as a float array."""
    L = np.array(L, dtype=float)
    if L.shape != (4, 4):
        raise ValueError(f"L must be 4x4, got shape {L.shape}")
    if not np.all(np.isfinite(L)):
        raise ValueError("L has non-finite entries")
    if np.linalg.det(L) <= 0:
        raise ValueError("L must have positive determinant")
    return L


def sigma_min(L):
    return float(np.linalg.svd(np.asarray(L, dtype=float), compute_uv=False)[-1])


def scalar_tail_bound(L, radius):
    """Upper bound on ``sum |L(x+2a)|^-6`` over ``|x/2 + a|_inf > radius``.

    The bound holds for every real ``x``.
    """
    R = float(radius)
    s = sigma_min(L)
    return (2.0 * s) ** -6 * (1.0 + 1.0 / R) ** 6 * KAPPA / (R - 0.5) ** 2


def derivative_tail_bound(L, dL, radius):
    """Spectral-norm bound on the derivative of the omitted part of ``B``.

    Per unit ``|zeta||zeta'|``. Along ``dy = Kt y`` with ``Kt = dL L^-1`` each
    kernel ``12 pi_tr sym(u (x) u') / |y|^6`` changes at rate at most
    ``12 * 18 |Kt|`` times ``|y|^-6``: the rotation contributes at most
    ``4 |Kt|`` to each of ``u`` and ``u'`` and the radial factor ``6 |Kt|``.
    """
    Kt = np.asarray(dL, dtype=float) @ np.linalg.inv(np.asarray(L, dtype=float))
    return 216.0 * np.linalg.norm(Kt, 2) * scalar_tail_bound(L, radius)


def _check_tail(tail, params):
    if tail > params.tail_tol:
        raise TailToleranceError(
            f"tail bound {tail:.3e} exceeds tolerance {params.tail_tol:.3e} at "
            f"radius {params.radius}; increase the radius or the tolerance")


def _box(x, radius):
    # Integer a with |x/2 + a|_inf <= R.
    h = np.asarray(x, dtype=float) / 2.0
    lo = np.ceil(-radius - h - 1e-12).astype(np.int64)
    hi = np.floor(radius - h + 1e-12).astype(np.int64)
    return lo, hi


_pairing_signs = convention_signs
pairing_for = convention_for


def b_term(x, zeta, zeta_p, pairing=PLUS_TO_MINUS):
    """Single kernel ``12 (rho zeta) (x) (rho zeta') / |x|^6`` at offset x."""
    x = np.asarray(x, dtype=float)
    n2 = float(x @ x)
    if n2 == 0.0:
        raise SingularLatticeError("b_term is undefined at x = 0")
    r = rho(x, pairing)
    return 12.0 * np.outer(r @ zeta, r @ zeta_p) / n2 ** 3


def _raw_box(x, L, zeta, zeta_p, pairing, radius, mode, K=None):
    src, tgt = _pairing_signs(pairing)
    Z = np.einsum("i,ipq->pq", np.asarray(zeta, dtype=float), omega(src))
    Zp = np.einsum("i,ipq->pq", np.asarray(zeta_p, dtype=float), omega(src))
    lo, hi = _box(x, radius)
    Kmat = np.zeros((4, 4)) if K is None else np.asarray(K, dtype=float)
    total, nzero = _kernels.box_sum(L, lo, hi, np.asarray(x, dtype=float),
                                    Kmat, mode, Z, Zp, float(tgt))
    if nzero:
        raise SingularLatticeError(
            f"x = {np.asarray(x).tolist()} lies on the summation lattice")
    return total


def lattice_sum_B(x, L, zeta, zeta_p, pairing=PLUS_TO_MINUS, params=SumParams()):
    """``B_x^L(zeta, zeta') = pi_tr sym sum_a b_{L(x - 2a)}(zeta, zeta')``.

    The tail reported is a bound on the Frobenius norm of the omitted part.
    """
    L = as_lattice(L)
    x = np.asarray(x, dtype=float)
    scalar = scalar_tail_bound(L, params.radius)
    _check_tail(scalar, params)
    raw = _raw_box(x, L, zeta, zeta_p, pairing, params.radius, 1)
    value = trace_free(_sym(12.0 * raw))
    tail = 12.0 * _FROB_PER_UNIT * np.linalg.norm(zeta) * np.linalg.norm(zeta_p) * scalar
    return SumResult(value, float(tail), params.radius)


def epstein6(x, L, excluded=(), params=SumParams()):
    """Truncated ``sum_a |L(x + 2a)|^-6`` over ``a`` not in ``excluded``.

    ``excluded`` is a collection of integer 4-vectors ``a``. Excluded indices
    may be singular; any other singular summand raises.
    """
    L = as_lattice(L)
    x = np.asarray(x, dtype=float)
    tail = scalar_tail_bound(L, params.radius)
    _check_tail(tail, params)
    lo, hi = _box(x, params.radius)
    value, nzero = _kernels.scalar_box_sum(L, lo, hi, x)
    seen = set()
    for a in excluded:
        a = tuple(int(t) for t in a)
        if a in seen:
            continue
        seen.add(a)
        if np.any(np.asarray(a) < lo) or np.any(np.asarray(a) > hi):
            continue
        v = L @ (x + 2.0 * np.asarray(a, dtype=float))
        n2 = float(v @ v)
        if n2 == 0.0:
            nzero -= 1
        else:
            value -= 1.0 / n2 ** 3
    if nzero:
        raise SingularLatticeError(
            f"x = {x.tolist()} hits the origin at a non-excluded index")
    return SumResult(float(value), float(tail), params.radius)


def dL_lattice_sum(x, L, dL, zeta, zeta_p, pairing=PLUS_TO_MINUS,
                   params=SumParams(), step=None, richardson_tol=1e-6):
    """Directional derivative of ``B_x^L`` along ``L -> L + t dL``.

    Central difference with step ``h`` (default ``1e-5 |L| / |dL|``). The
    result at ``h`` is compared with the one at ``h/2``; a relative change
    above ``richardson_tol`` triggers a ``RuntimeWarning``. The difference
    quotient of the omitted terms is a derivative at an intermediate lattice,
    so the tail is :func:`derivative_tail_bound` at the worse endpoint, times
    ``sqrt(3)`` to pass from spectral to Frobenius norm.
    """
    L = as_lattice(L)
    dL = np.asarray(dL, dtype=float)
    nd = np.linalg.norm(dL)
    if nd == 0.0:
        return SumResult(np.zeros((3, 3)), 0.0, params.radius)
    h = 1e-5 * np.linalg.norm(L) / nd if step is None else float(step)

    def quotient(hh):
        plus = lattice_sum_B(x, L + hh * dL, zeta, zeta_p, pairing, params)
        minus = lattice_sum_B(x, L - hh * dL, zeta, zeta_p, pairing, params)
        return (plus.value - minus.value) / (2.0 * hh)

    d1 = quotient(h)
    d2 = quotient(h / 2.0)
    scale = max(np.linalg.norm(d1), np.finfo(float).tiny)
    if np.linalg.norm(d1 - d2) > richardson_tol * scale:
        warnings.warn(
            f"Richardson check failed: halving the step changed the derivative "
            f"by {np.linalg.norm(d1 - d2) / scale:.2e} (relative)",
            RuntimeWarning, stacklevel=2)
    per_unit = max(derivative_tail_bound(L + s * h * dL, dL, params.radius)
                   for s in (-1.0, 1.0))
    tail = np.sqrt(3.0) * per_unit * np.linalg.norm(zeta) * np.linalg.norm(zeta_p)
    return SumResult(d1, float(tail), params.radius)


def closed_form_dK(i, j, L, K, zeta_i, zeta_j, pairing=PLUS_TO_MINUS,
                   params=SumParams()):
    """Weighted lattice sum behind the closed-form torus-deformation residual.

    Returns ``sum_a w(v) <pi_tr b_{Lv}(zeta_i, zeta_i) zeta_j, zeta_j>`` with
    ``v = i - j - 2a`` and weight ``w(v) = <Lv, Kv> / |Lv|^2``.
    """
    L = as_lattice(L)
    K = np.asarray(K, dtype=float)
    zeta_i = np.asarray(zeta_i, dtype=float)
    zeta_j = np.asarray(zeta_j, dtype=float)
    x = np.asarray(i, dtype=float) - np.asarray(j, dtype=float)
    scalar = scalar_tail_bound(L, params.radius)
    _check_tail(scalar, params)
    raw = _raw_box(x, L, zeta_i, zeta_i, pairing, params.radius, 2, K)
    mat = trace_free(_sym(12.0 * raw))
    value = float(zeta_j @ mat @ zeta_j)
    kn = np.linalg.norm(K, 2) / sigma_min(L)
    tail = 12.0 * 2.0 * kn * np.dot(zeta_i, zeta_i) * np.dot(zeta_j, zeta_j) * scalar
    return SumResult(value, float(tail), params.radius)


# ---------------------------------------------------------------------------
# Parity-class tensors
# ---------------------------------------------------------------------------

def _expand(values, monomials, degree):
    # Scatter unique monomial sums into a fully symmetric tensor.
    full = np.zeros((values.shape[0],) + (4,) * degree)
    for k, m in enumerate(monomials):
        for perm in set(itertools.permutations(m)):
            full[(slice(None),) + perm] = values[:, k]
    return full


def is_diagonal(L):
    L = np.asarray(L, dtype=float)
    return bool(np.all(L == np.diag(np.diag(L))))


def class_moments(L, radius, order6=False):
    """Degree-4 (and optionally degree-6) moments per parity class.

    Returns ``(m4, m6)`` with ``m4[c]`` the full symmetric tensor
    ``sum y (x) y (x) y (x) y / |y|^10`` over the class ``c`` of ``v`` with
    ``0 < |v|_inf <= 2 radius`` and ``y = Lv``; ``m6[c]`` is the analogous
    degree-6 tensor weighted by ``|y|^-12`` (``None`` unless ``order6``).
    """
    L = as_lattice(L)
    nq, ns = len(_kernels.QUADS), len(_kernels.SEXTS)
    if is_diagonal(L):
        e4, e6 = _kernels.class_moments_diagonal(
            np.diag(L).copy(), int(radius), bool(order6),
            _kernels.EVEN4_I, _kernels.EVEN6_I)
        m4 = np.zeros((16, nq))
        m4[:, _kernels.EVEN4_TO_QUAD] = e4
        m6 = np.zeros((16, ns))
        m6[:, _kernels.EVEN6_TO_SEXT] = e6
    else:
        m4, m6 = _kernels.class_moments(
            np.ascontiguousarray(L), int(radius), bool(order6), _kernels.PAIR_I,
            _kernels.PAIR_J, _kernels.QUAD_FROM, _kernels.SEXT_FROM)
    full4 = _expand(m4, _kernels.QUADS, 4)
    full6 = _expand(m6, _kernels.SEXTS, 6) if order6 else None
    return full4, full6


def _quadratic_forms(pairing):
    # A[i, j] is the symmetric matrix with y^T A[i, j] y = <omega_i^src y,
    # omega_j^tgt y>, so (rho_y e_i)_j = y^T A[i, j] y / |y|^2.
    src, tgt = _pairing_signs(pairing)
    ws, wt = omega(src), omega(tgt)
    A = np.einsum("ipq,jpr->ijqr", ws, wt)
    return 0.5 * (A + np.transpose(A, (0, 1, 3, 2)))


def _finish(raw):
    # raw[i, k, j, l]: symmetrise in (j, l) and remove the trace.
    t = 0.5 * (raw + np.transpose(raw, (0, 1, 3, 2)))
    tr = np.einsum("ikjj->ik", t)
    return t - tr[:, :, None, None] / 3.0 * np.eye(3)


@dataclasses.dataclass(frozen=True)
class ClassTensors:
    """Bilinear lattice sums ``B_c`` for all 16 parity classes.

    ``T[c, p, i, k]`` is the traceless symmetric 3x3 matrix
    ``B_x^L(e_i, e_k)`` for any ``x`` in class ``c`` and pairing index ``p``
    (0 for plus-to-minus, 1 for minus-to-plus), so that
    ``B_x^L(zeta, zeta') = sum_ik zeta_i zeta'_k T[c, p, i, k]``.
    """

    L: np.ndarray
    radius: int
    T: np.ndarray
    m4: np.ndarray
    m6: np.ndarray | None
    scalar_tail: float

    def B(self, cls, zeta, zeta_p, pairing=PLUS_TO_MINUS):
        p = PAIRINGS.index(pairing)
        return np.einsum("i,k,ikjl->jl", zeta, zeta_p, self.T[cls, p])

    def derivative(self, dL):
        """Exact derivative of ``T`` along ``L -> L + t dL`` at fixed radius.

        Requires the degree-6 moments.
        """
        if self.m6 is None:
            raise ValueError("derivative needs class tensors built with order6=True")
        Kt = np.asarray(dL, dtype=float) @ np.linalg.inv(self.L)
        S = Kt + Kt.T
        out = np.empty_like(self.T)
        for p, pairing in enumerate(PAIRINGS):
            A = _quadratic_forms(pairing)
            Ad = np.einsum("ijpq,qr->ijpr", A, Kt)
            Ad = Ad + np.transpose(Ad, (0, 1, 3, 2))
            first = (np.einsum("ijpq,klrs,cpqrs->cikjl", Ad, A, self.m4)
                     + np.einsum("ijpq,klrs,cpqrs->cikjl", A, Ad, self.m4))
            second = np.einsum("ijpq,klrs,tu,cpqrstu->cikjl", A, A, S, self.m6)
            for c in range(16):
                out[c, p] = _finish(12.0 * (first[c] - 5.0 * second[c]))
        return out

    def weighted(self, dL):
        """Class tensors of ``sum <Lv, dL v> / |Lv|^2 b_{Lv}`` (needs degree 6)."""
        if self.m6 is None:
            raise ValueError("weighted sums need class tensors built with order6=True")
        Kt = np.asarray(dL, dtype=float) @ np.linalg.inv(self.L)
        Ks = 0.5 * (Kt + Kt.T)
        out = np.empty_like(self.T)
        for p, pairing in enumerate(PAIRINGS):
            A = _quadratic_forms(pairing)
            raw = np.einsum("ijpq,klrs,tu,cpqrstu->cikjl", A, A, Ks, self.m6)
            for c in range(16):
                out[c, p] = _finish(12.0 * raw[c])
        return out


def build_class_tensors(L, radius, order6=False):
    """Compute :class:`ClassTensors` from scratch (no caching)."""
    L = as_lattice(L)
    m4, m6 = class_moments(L, radius, order6)
    T = np.empty((16, 2, 3, 3, 3, 3))
    for p, pairing in enumerate(PAIRINGS):
        A = _quadratic_forms(pairing)
        raw = np.einsum("ijpq,klrs,cpqrs->cikjl", A, A, m4)
        for c in range(16):
            T[c, p] = _finish(12.0 * raw[c])
    return ClassTensors(L, int(radius), T, m4, m6, scalar_tail_bound(L, radius))


_CACHE = collections.OrderedDict()
_CACHE_SIZE = 8


def class_tensors(L, radius, order6=False):
    """Memoised :func:`build_class_tensors` keyed on the exact bytes of ``L``.

    A cached entry with degree-6 moments also serves requests without them.
    """
    L = as_lattice(L)
    key = (L.tobytes(), int(radius))
    hit = _CACHE.get(key)
    if hit is not None and (hit.m6 is not None or not order6):
        _CACHE.move_to_end(key)
        return hit
    ct = build_class_tensors(L, radius, order6)
    _CACHE[key] = ct
    while len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return ct
