"""Linear algebra of 2-forms on R^4.

Self-dual (``+``) and anti-self-dual (``-``) 2-forms are stored as real
antisymmetric 4x4 matrices in the coordinate basis. The standard bases are

    omega_1^s = dx1^dx2 + s dx3^dx4
    omega_2^s = dx1^dx3 + s dx4^dx2
    omega_3^s = dx1^dx4 + s dx2^dx3

with ``s = +1`` or ``-1``. A coefficient vector ``zeta`` in R^3 maps to the form
``sum_i zeta_i omega_i^s``.

Sign conventions
----------------
Composition of two forms is ``compose(a, b) = a^T b = -a b``. With this choice
the rotation ``rho_x`` that carries a self-dual form to the anti-self-dual side
is the identity at ``x = e1`` and is diagonal ``diag(1, -1, -1)`` at ``x = e2``.
Concretely,

    (rho_x zeta)_j = <Z x, W_j x> / |x|^2,   Z = sum_i zeta_i omega_i^+,
                                             W_j = omega_j^-,

which is the matrix of ``zeta -> q^{-1} zeta q`` for the unit quaternion
``q = x/|x|``. The reverse rotation (anti-self-dual to self-dual) is its
transpose, ``zeta -> q zeta q^{-1}``.
"""

import numpy as np

PLUS = 1
MINUS = -1

PLUS_TO_MINUS = "plus-to-minus"
MINUS_TO_PLUS = "minus-to-plus"
CONVENTIONS = (PLUS_TO_MINUS, MINUS_TO_PLUS)

# Anti-self-dual curvature variations (times r^6) induced by the three
# infinitesimal Eguchi-Hanson deformations, in an adapted orthonormal basis.
# The off-diagonal entries are stored as given, not derived from the general
# bilinear rule.
VARIATION_CURVATURES = np.array([
    [[8.0, 0.0, 0.0], [0.0, -4.0, 0.0], [0.0, 0.0, -4.0]],
    [[0.0, 4.0, 0.0], [4.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    [[0.0, 0.0, 4.0], [0.0, 0.0, 0.0], [4.0, 0.0, 0.0]],
])
VARIATION_CURVATURES.setflags(write=False)


def _basis(sign):
    s = float(sign)
    w = np.zeros((3, 4, 4))
    w[0, 0, 1], w[0, 2, 3] = 1.0, s
    w[1, 0, 2], w[1, 3, 1] = 1.0, s
    w[2, 0, 3], w[2, 1, 2] = 1.0, s
    w -= np.transpose(w, (0, 2, 1))
    w.setflags(write=False)
    return w


OMEGA_PLUS = _basis(PLUS)
OMEGA_MINUS = _basis(MINUS)


def _check_sign(sign):
    if sign not in (PLUS, MINUS):
        raise ValueError(f"orientation sign must be +1 or -1, got {sign!r}")
    return sign


def omega(sign):
    """Return the (3, 4, 4) array of basis forms for orientation ``sign``."""
    return OMEGA_PLUS if _check_sign(sign) == PLUS else OMEGA_MINUS


def two_form_matrix(index, sign):
    """Matrix of ``omega_index^sign`` for ``index`` in 1..3."""
    if index not in (1, 2, 3):
        raise ValueError(f"index must be 1, 2 or 3, got {index!r}")
    return omega(sign)[index - 1].copy()


def convention_signs(convention):
    """``(source_sign, target_sign)`` of a rotation convention tag."""
    if convention == PLUS_TO_MINUS:
        return PLUS, MINUS
    if convention == MINUS_TO_PLUS:
        return MINUS, PLUS
    raise ValueError(
        f"unknown convention {convention!r}; expected one of {CONVENTIONS}")


def convention_for(source_sign):
    """Convention used by a gluing of orientation ``source_sign``."""
    return PLUS_TO_MINUS if _check_sign(source_sign) == PLUS else MINUS_TO_PLUS


def form_from_vector(zeta, sign):
    """Antisymmetric 4x4 matrix of ``sum_i zeta_i omega_i^sign``."""
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (3,):
        raise ValueError(f"zeta must have shape (3,), got {zeta.shape}")
    return np.einsum("i,ipq->pq", zeta, omega(sign))


def vector_from_form(form, sign):
    """Coefficients of ``form`` in the basis of orientation ``sign``.

    The basis forms are orthogonal with squared Frobenius norm 4, so the
    coefficient is a Frobenius inner product divided by 4. Components of the
    opposite orientation are discarded.
    """
    form = np.asarray(form, dtype=float)
    return np.einsum("pq,ipq->i", form, omega(sign)) / 4.0


def self_dual_part(form):
    """Projection of an antisymmetric matrix onto the self-dual forms."""
    return form_from_vector(vector_from_form(form, PLUS), PLUS)


def anti_self_dual_part(form):
    """Projection of an antisymmetric matrix onto the anti-self-dual forms."""
    return form_from_vector(vector_from_form(form, MINUS), MINUS)


def compose(a, b):
    """Composition ``a o b = a^T b`` of two 2-forms viewed as endomorphisms.

    For forms of opposite orientation the two factors commute and the result
    is a symmetric traceless matrix.
    """
    return np.asarray(a, dtype=float).T @ np.asarray(b, dtype=float)


def rho(x, convention=PLUS_TO_MINUS):
    """3x3 rotation ``rho_x`` between self-dual and anti-self-dual forms.

    For ``plus-to-minus`` entry ``[j, i]`` is
    ``<omega_i^+ x, omega_j^- x> / |x|^2``; ``minus-to-plus`` is the
    transpose. Raises ``ValueError`` at the origin.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise ValueError(f"x must have shape (4,), got {x.shape}")
    src, tgt = convention_signs(convention)
    n2 = float(x @ x)
    if n2 == 0.0:
        raise ValueError("rho is undefined at x = 0")
    sx = omega(src) @ x
    wx = omega(tgt) @ x
    return (wx @ sx.T) / n2


def rho_scale_invariance_check(x, s, tol=1e-12):
    """Whether ``rho(s x) == rho(x) == rho(-x)`` within ``tol``."""
    r = rho(x)
    return bool(np.max(np.abs(rho(s * np.asarray(x, dtype=float)) - r)) <= tol
                and np.max(np.abs(rho(-np.asarray(x, dtype=float)) - r)) <= tol)


def trace_free(m):
    """Trace-free part of a square matrix."""
    m = np.asarray(m, dtype=float)
    return m - np.trace(m) / m.shape[0] * np.eye(m.shape[0])


def sym(m):
    """Symmetric part of a square matrix."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def pi_tr(m):
    """Trace-free part of the symmetrisation of a 3x3 matrix."""
    return trace_free(sym(m))


def h4_curvature(zeta, orientation, x, r):
    """Curvature of the ``h4`` term: ``12 pi_tr(u (x) u) / r^6``, ``u = rho_x zeta``.

    ``orientation`` selects the rotation convention of the gluing. The
    eigenvalues are ``{8, -4, -4} |zeta|^2 / r^6``.
    """
    if not r > 0:
        raise ValueError(f"r must be positive, got {r!r}")
    u = rho(x, convention_for(orientation)) @ np.asarray(zeta, dtype=float)
    return 12.0 * pi_tr(np.outer(u, u)) / r ** 6


def eh_radial_coefficients(zeta_norm, r):
    """Radial coefficients ``(A, B)`` of the Eguchi-Hanson metric.

    ``A = sqrt(r^4 / (|zeta|^2 + r^4))`` multiplies ``dr^2 + r^2 theta_1^2``
    and ``B = sqrt(|zeta|^2 + r^4)`` multiplies the other two directions.
    """
    if not zeta_norm > 0:
        raise ValueError(f"zeta_norm must be positive, got {zeta_norm!r}")
    if r < 0:
        raise ValueError(f"r must be non-negative, got {r!r}")
    r4 = float(r) ** 4
    z2 = float(zeta_norm) ** 2
    return np.sqrt(r4 / (z2 + r4)), np.sqrt(z2 + r4)


def h4_field(zeta, orientation, x):
    """Leading ``|x|^-4`` correction of the Eguchi-Hanson metric at ``x``.

    Returns a symmetric traceless 4x4 matrix. For a positive gluing it is
    ``-compose(rho_x zeta as a '-' form, zeta as a '+' form) / (2 |x|^4)``;
    for a negative one the orientations swap and ``rho_x`` is transposed.
    """
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    n2 = float(x @ x)
    if n2 == 0.0:
        raise ValueError("h4_field is undefined at x = 0")
    if _check_sign(orientation) == PLUS:
        a = form_from_vector(rho(x, PLUS_TO_MINUS) @ zeta, MINUS)
        b = form_from_vector(zeta, PLUS)
    else:
        a = form_from_vector(zeta, MINUS)
        b = form_from_vector(rho(x, MINUS_TO_PLUS) @ zeta, PLUS)
    return -compose(a, b) / (2.0 * n2 * n2)


def variation_curvatures(r):
    """The three curvature variation matrices at radius ``r``."""
    return VARIATION_CURVATURES / float(r) ** 6


def quaternion_multiply(p, q):
    """Hamilton product of quaternions stored as ``(w, x, y, z)``."""
    p1, p2, p3, p4 = p
    q1, q2, q3, q4 = q
    return np.array([
        p1 * q1 - p2 * q2 - p3 * q3 - p4 * q4,
        p1 * q2 + p2 * q1 + p3 * q4 - p4 * q3,
        p1 * q3 - p2 * q4 + p3 * q1 + p4 * q2,
        p1 * q4 + p2 * q3 - p3 * q2 + p4 * q1,
    ])


def quaternion_conjugate(q):
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])
