"""Compiled inner loops for the lattice sums.

Every kernel walks the index box ``v = x + 2a`` with ``|v|_inf <= 2R`` (or the
equivalent box around a non-integer ``x``) in a fixed order. Partial sums are
kept per outermost index and reduced in order, so results do not depend on the
number of worker threads.
"""

import itertools

import numba
import numpy as np
from numba import njit, prange

# Prefer OpenMP; the bundled TBB is often too old and only produces warnings.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True)
def _omega_apply(y, sigma, out):
    # out[j] = omega_j^sigma y
    out[0, 0] = y[1]
    out[0, 1] = -y[0]
    out[0, 2] = sigma * y[3]
    out[0, 3] = -sigma * y[2]
    out[1, 0] = y[2]
    out[1, 1] = -sigma * y[3]
    out[1, 2] = -y[0]
    out[1, 3] = sigma * y[1]
    out[2, 0] = y[3]
    out[2, 1] = sigma * y[2]
    out[2, 2] = -sigma * y[1]
    out[2, 3] = -y[0]


@njit(cache=True, parallel=True)
def scalar_box_sum(L, lo, hi, x):
    """``sum |L(x + 2a)|^-6`` over the box ``[lo, hi]`` and the zero count."""
    n1 = hi[0] - lo[0] + 1
    part = np.zeros(n1)
    zeros = np.zeros(n1, dtype=np.int64)
    for i1 in prange(n1):
        v1 = x[0] + 2.0 * (lo[0] + i1)
        y1 = np.empty(4)
        y2 = np.empty(4)
        y3 = np.empty(4)
        for r in range(4):
            y1[r] = L[r, 0] * v1
        acc = 0.0
        nz = 0
        for a2 in range(lo[1], hi[1] + 1):
            v2 = x[1] + 2.0 * a2
            for r in range(4):
                y2[r] = y1[r] + L[r, 1] * v2
            for a3 in range(lo[2], hi[2] + 1):
                v3 = x[2] + 2.0 * a3
                for r in range(4):
                    y3[r] = y2[r] + L[r, 2] * v3
                for a4 in range(lo[3], hi[3] + 1):
                    v4 = x[3] + 2.0 * a4
                    t0 = y3[0] + L[0, 3] * v4
                    t1 = y3[1] + L[1, 3] * v4
                    t2 = y3[2] + L[2, 3] * v4
                    t3 = y3[3] + L[3, 3] * v4
                    n2 = t0 * t0 + t1 * t1 + t2 * t2 + t3 * t3
                    if n2 == 0.0:
                        nz += 1
                    else:
                        acc += 1.0 / (n2 * n2 * n2)
        part[i1] = acc
        zeros[i1] = nz
    total = 0.0
    nzero = 0
    for i1 in range(n1):
        total += part[i1]
        nzero += zeros[i1]
    return total, nzero


@njit(cache=True, parallel=True)
def box_sum(L, lo, hi, x, K, mode, Z, Zp, sigma):
    """Sum over ``v = x + 2a`` for integer ``a`` in the box ``[lo, hi]``.

    ``mode`` 0 accumulates the scalar ``|Lv|^-6`` into ``out[0, 0]``.
    ``mode`` 1 accumulates ``u (x) u' / |Lv|^6`` with
    ``u_j = <Z y, W_j y> / |y|^2``, ``u'_j = <Z' y, W_j y> / |y|^2``,
    ``W_j = omega_j^sigma`` and ``y = Lv``.
    ``mode`` 2 is mode 1 weighted by ``<y, K v> / |y|^2``.

    Returns the 3x3 accumulator and the number of skipped zero vectors.
    """
    n1 = hi[0] - lo[0] + 1
    part = np.zeros((n1, 3, 3))
    zeros = np.zeros(n1, dtype=np.int64)
    for i1 in prange(n1):
        a1 = lo[0] + i1
        v = np.empty(4)
        y = np.empty(4)
        w = np.empty((3, 4))
        u = np.empty(3)
        up = np.empty(3)
        acc = np.zeros((3, 3))
        nz = 0
        v[0] = x[0] + 2.0 * a1
        for a2 in range(lo[1], hi[1] + 1):
            v[1] = x[1] + 2.0 * a2
            for a3 in range(lo[2], hi[2] + 1):
                v[2] = x[2] + 2.0 * a3
                for a4 in range(lo[3], hi[3] + 1):
                    v[3] = x[3] + 2.0 * a4
                    n2 = 0.0
                    for r in range(4):
                        s = 0.0
                        for c in range(4):
                            s += L[r, c] * v[c]
                        y[r] = s
                        n2 += s * s
                    if n2 == 0.0:
                        nz += 1
                        continue
                    inv6 = 1.0 / (n2 * n2 * n2)
                    if mode == 0:
                        acc[0, 0] += inv6
                        continue
                    _omega_apply(y, sigma, w)
                    u[:] = 0.0
                    up[:] = 0.0
                    for r in range(4):
                        zy = 0.0
                        zpy = 0.0
                        for c in range(4):
                            zy += Z[r, c] * y[c]
                            zpy += Zp[r, c] * y[c]
                        for j in range(3):
                            u[j] += zy * w[j, r]
                            up[j] += zpy * w[j, r]
                    f = inv6 / (n2 * n2)
                    if mode == 2:
                        kv = 0.0
                        for r in range(4):
                            s = 0.0
                            for c in range(4):
                                s += K[r, c] * v[c]
                            kv += y[r] * s
                        f *= kv / n2
                    for j in range(3):
                        for l in range(3):
                            acc[j, l] += f * u[j] * up[l]
        part[i1] = acc
        zeros[i1] = nz
    total = np.zeros((3, 3))
    nzero = 0
    for i1 in range(n1):
        total += part[i1]
        nzero += zeros[i1]
    return total, nzero


# Monomial bookkeeping for the class-moment engine. Degree-2 products are
# indexed by pairs (i <= j); degree-4 and degree-6 monomials by sorted index
# tuples, each written as a product of lower-degree ones.
PAIRS = list(itertools.combinations_with_replacement(range(4), 2))
QUADS = list(itertools.combinations_with_replacement(range(4), 4))
SEXTS = list(itertools.combinations_with_replacement(range(4), 6))
_PAIR_ID = {p: k for k, p in enumerate(PAIRS)}
_QUAD_ID = {p: k for k, p in enumerate(QUADS)}
PAIR_I = np.array([p[0] for p in PAIRS], dtype=np.int64)
PAIR_J = np.array([p[1] for p in PAIRS], dtype=np.int64)
QUAD_FROM = np.array([[_PAIR_ID[m[:2]], _PAIR_ID[m[2:]]] for m in QUADS],
                     dtype=np.int64)
SEXT_FROM = np.array([[_QUAD_ID[m[:4]], _PAIR_ID[m[4:]]] for m in SEXTS],
                     dtype=np.int64)

# Even monomials used by the diagonal fast path: y_i^2 y_j^2 and
# y_i^2 y_j^2 y_k^2 in terms of squares s_i = y_i^2.
EVEN4 = list(itertools.combinations_with_replacement(range(4), 2))
EVEN6 = list(itertools.combinations_with_replacement(range(4), 3))
EVEN4_TO_QUAD = np.array([_QUAD_ID[tuple(sorted((i, i, j, j)))]
                          for i, j in EVEN4], dtype=np.int64)
EVEN6_TO_SEXT = np.array([SEXTS.index(tuple(sorted((i, i, j, j, k, k))))
                          for i, j, k in EVEN6], dtype=np.int64)
EVEN4_I = np.array(EVEN4, dtype=np.int64)
EVEN6_I = np.array(EVEN6, dtype=np.int64)


@njit(cache=True, parallel=True)
def class_moments(L, R, order6, pair_i, pair_j, quad_from, sext_from):
    """Per-parity-class moments of ``y = Lv`` over ``0 < |v|_inf <= 2R``.

    Returns ``m4[c, k] = sum y^QUADS[k] / |y|^10`` and, when ``order6`` is
    true, ``m6[c, k] = sum y^SEXTS[k] / |y|^12``. The class of ``v`` is
    ``8 (v1 mod 2) + 4 (v2 mod 2) + 2 (v3 mod 2) + (v4 mod 2)``. Only one
    vector of each pair ``+-v`` is visited and counted twice.
    """
    R2 = 2 * R
    n1 = R2 + 1
    nq = quad_from.shape[0]
    ns = sext_from.shape[0] if order6 else 0
    p4 = np.zeros((n1, 16, nq))
    p6 = np.zeros((n1, 16, max(ns, 1)))
    for i1 in prange(n1):
        v1 = i1
        y = np.empty(4)
        q = np.empty(pair_i.shape[0])
        m4 = np.empty(nq)
        acc4 = np.zeros((16, nq))
        acc6 = np.zeros((16, max(ns, 1)))
        lo2 = -R2 if v1 > 0 else 0
        for v2 in range(lo2, R2 + 1):
            lo3 = -R2 if (v1 > 0 or v2 > 0) else 0
            for v3 in range(lo3, R2 + 1):
                lo4 = -R2 if (v1 > 0 or v2 > 0 or v3 > 0) else 1
                for v4 in range(lo4, R2 + 1):
                    c = 8 * (v1 & 1) + 4 * (v2 & 1) + 2 * (v3 & 1) + (v4 & 1)
                    n2 = 0.0
                    for r in range(4):
                        y[r] = L[r, 0] * v1 + L[r, 1] * v2 + L[r, 2] * v3 + L[r, 3] * v4
                        n2 += y[r] * y[r]
                    w4 = 2.0 / (n2 * n2 * n2 * n2 * n2)
                    for k in range(q.shape[0]):
                        q[k] = y[pair_i[k]] * y[pair_j[k]]
                    for k in range(nq):
                        m4[k] = q[quad_from[k, 0]] * q[quad_from[k, 1]]
                        acc4[c, k] += w4 * m4[k]
                    if order6:
                        w6 = w4 / n2
                        for k in range(ns):
                            acc6[c, k] += w6 * m4[sext_from[k, 0]] * q[sext_from[k, 1]]
        p4[i1] = acc4
        p6[i1] = acc6
    m4t = np.zeros((16, nq))
    m6t = np.zeros((16, max(ns, 1)))
    for i1 in range(n1):
        m4t += p4[i1]
        m6t += p6[i1]
    return m4t, m6t


@njit(cache=True, parallel=True)
def class_moments_diagonal(d, R, order6, even4, even6):
    """Even moments for a diagonal lattice matrix ``diag(d)``.

    Sign flips of single coordinates preserve both the box and the parity
    class, so only the closed positive orthant is visited with weight
    ``2^(number of nonzero coordinates)`` and odd moments vanish.
    """
    R2 = 2 * R
    n1 = R2 + 1
    ne4 = even4.shape[0]
    ne6 = even6.shape[0]
    p4 = np.zeros((n1, 16, ne4))
    p6 = np.zeros((n1, 16, ne6))
    for i1 in prange(n1):
        v1 = i1
        s = np.empty(4)
        acc4 = np.zeros((16, ne4))
        acc6 = np.zeros((16, ne6))
        s[0] = (d[0] * v1) ** 2
        for v2 in range(0, R2 + 1):
            s[1] = (d[1] * v2) ** 2
            for v3 in range(0, R2 + 1):
                s[2] = (d[2] * v3) ** 2
                for v4 in range(0, R2 + 1):
                    if v1 == 0 and v2 == 0 and v3 == 0 and v4 == 0:
                        continue
                    s[3] = (d[3] * v4) ** 2
                    mult = 1.0
                    if v1 > 0:
                        mult *= 2.0
                    if v2 > 0:
                        mult *= 2.0
                    if v3 > 0:
                        mult *= 2.0
                    if v4 > 0:
                        mult *= 2.0
                    c = 8 * (v1 & 1) + 4 * (v2 & 1) + 2 * (v3 & 1) + (v4 & 1)
                    n2 = s[0] + s[1] + s[2] + s[3]
                    w4 = mult / (n2 * n2 * n2 * n2 * n2)
                    for k in range(ne4):
                        acc4[c, k] += w4 * s[even4[k, 0]] * s[even4[k, 1]]
                    if order6:
                        w6 = w4 / n2
                        for k in range(ne6):
                            acc6[c, k] += (w6 * s[even6[k, 0]] * s[even6[k, 1]]
                                           * s[even6[k, 2]])
        p4[i1] = acc4
        p6[i1] = acc6
    m4t = np.zeros((16, ne4))
    m6t = np.zeros((16, ne6))
    for i1 in range(n1):
        m4t += p4[i1]
        m6t += p6[i1]
    return m4t, m6t
