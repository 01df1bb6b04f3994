import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ehglue.pointwise import (KernelClass, classify_kernel, complete_frame,
                              kahler_form_test, lambda_vector, mu1)

vec3 = arrays(np.float64, 3, elements=st.floats(-10, 10)).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


def random_traceless(rng):
    a = rng.normal(size=(3, 3))
    a = a + a.T
    return a - np.trace(a) / 3 * np.eye(3)


@given(vec3)
def test_complete_frame_is_oriented_orthonormal(z):
    f = complete_frame(z)
    np.testing.assert_allclose(f @ f.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(f) == pytest.approx(1.0)
    np.testing.assert_allclose(f[0], z / np.linalg.norm(z))


def test_complete_frame_tie_break():
    f = complete_frame([1.0, 0.0, 0.0])
    np.testing.assert_allclose(f, np.eye(3))
    with pytest.raises(ValueError):
        complete_frame(np.zeros(3))


def test_lambda_one_is_the_quadratic_form(rng):
    R = random_traceless(rng)
    z = rng.normal(size=3)
    assert lambda_vector(R, z)[0] == pytest.approx(z @ R @ z / (z @ z))


def test_lambda_vanishes_when_zeta_is_in_the_kernel(rng):
    z = rng.normal(size=3)
    f = complete_frame(z)
    R = f.T @ np.diag([0.0, 2.0, -2.0]) @ f
    np.testing.assert_allclose(lambda_vector(R, z), 0.0, atol=1e-14)


def test_mu1_sign_property():
    # Traceless blocks with R zeta = 0 have a traceless 2x2 restriction,
    # whose determinant is -(p^2 + q^2) <= 0.
    rng = np.random.default_rng(7)
    for k in range(1000):
        z = rng.normal(size=3)
        f = complete_frame(z)
        p, q = rng.normal(size=2) if k % 10 else (0.0, 0.0)
        block = np.array([[0, 0, 0], [0, p, q], [0, q, -p]], dtype=float)
        R = f.T @ block @ f
        np.testing.assert_allclose(lambda_vector(R, z), 0.0, atol=1e-12)
        m = mu1(R, z)
        assert m <= 1e-12
        assert (abs(m) < 1e-12) == (p == 0.0 and q == 0.0)


def test_classify_kernel():
    assert classify_kernel(np.diag([1.0, 2.0, -3.0])) is KernelClass.INVERTIBLE
    assert classify_kernel(np.diag([0.0, 1.0, -1.0])) is KernelClass.DIM1
    assert classify_kernel(np.diag([0.0, 0.0, 1.0])) is KernelClass.DIM2
    assert classify_kernel(np.zeros((3, 3))) is KernelClass.DIM3
    assert classify_kernel(np.diag([1e-12, 1.0, -1.0])) is KernelClass.DIM1
    assert KernelClass("dim2") is KernelClass.DIM2


def test_kahler_form_test():
    assert kahler_form_test(np.diag([0.0, 0.0, 3.0]), 3.0)
    assert not kahler_form_test(np.diag([1.0, 0.0, 2.0]), 3.0)
    assert kahler_form_test(np.zeros((3, 3)))
    assert not kahler_form_test(np.diag([8.0, -4.0, -4.0]))
