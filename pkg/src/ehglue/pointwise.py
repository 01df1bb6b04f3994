"""Pointwise quantities at a single gluing point.

The functions here act on a 3x3 curvature block ``R`` (a symmetric matrix
in a constant orthonormal basis of 2-forms) and a gluing parameter ``zeta``.
The first-order obstructions are the contractions ``lambda_k`` of ``R zeta_hat``
with an adapted frame, and ``mu1`` is the determinant of ``R`` on the plane
orthogonal to ``zeta``.
"""

import enum

import numpy as np


class KernelClass(enum.Enum):
    """Kernel dimension of a traceless symmetric 3x3 block."""

    INVERTIBLE = "invertible"
    DIM1 = "dim1"
    DIM2 = "dim2"
    DIM3 = "dim3"


def complete_frame(zeta):
    """Orthonormal frame ``(f1, f2, f3)`` of R^3 adapted to ``zeta``.

    ``f1`` is the unit vector along ``zeta``. ``f2`` is obtained by
    orthonormalising the coordinate axis on which ``|zeta|`` has its smallest
    component (lowest index on ties). ``f3 = f1 x f2`` so the frame is
    positively oriented. Rows of the returned matrix are the frame vectors.
    """
    zeta = np.asarray(zeta, dtype=float)
    norm = np.linalg.norm(zeta)
    if norm == 0.0:
        raise ValueError("cannot complete a frame from the zero vector")
    f1 = zeta / norm
    axis = int(np.argmin(np.abs(f1)))
    e = np.zeros(3)
    e[axis] = 1.0
    f2 = e - (e @ f1) * f1
    f2 /= np.linalg.norm(f2)
    f3 = np.cross(f1, f2)
    return np.array([f1, f2, f3])


def lambda_vector(R, zeta):
    """First-order obstructions ``lambda_k = <R zeta_hat, f_k>``, k = 1, 2, 3."""
    frame = complete_frame(zeta)
    R = np.asarray(R, dtype=float)
    return frame @ (R @ frame[0])


def mu1(R, zeta):
    """Determinant of ``R`` restricted to the plane orthogonal to ``zeta``."""
    frame = complete_frame(zeta)
    R = np.asarray(R, dtype=float)
    block = frame[1:] @ R @ frame[1:].T
    return float(np.linalg.det(block))


def classify_kernel(R, tol=1e-10):
    """Classify a traceless symmetric 3x3 block by its kernel dimension.

    An eigenvalue counts as zero when its absolute value is at most
    ``tol * max|eigenvalue|``. The zero matrix is classified as ``DIM3``.
    """
    eig = np.linalg.eigvalsh(np.asarray(R, dtype=float))
    scale = np.max(np.abs(eig))
    if scale == 0.0:
        return KernelClass.DIM3
    nzero = int(np.sum(np.abs(eig) <= tol * scale))
    return [KernelClass.INVERTIBLE, KernelClass.DIM1, KernelClass.DIM2,
            KernelClass.DIM3][nzero]


def kahler_form_test(R, einstein_constant=0.0, tol=1e-10):
    """Whether a self-dual curvature block is compatible with a Kahler form.

    For an Einstein metric with constant ``Lambda`` a parallel self-dual form
    exists exactly when the eigenvalues of the (possibly non-traceless) block
    are ``{0, 0, Lambda}`` up to ``tol`` relative to the block scale.
    """
    eig = np.sort(np.linalg.eigvalsh(np.asarray(R, dtype=float)))
    target = np.sort(np.array([0.0, 0.0, float(einstein_constant)]))
    scale = max(np.max(np.abs(eig)), abs(einstein_constant))
    if scale == 0.0:
        return True
    return bool(np.max(np.abs(eig - target)) <= tol * scale)
