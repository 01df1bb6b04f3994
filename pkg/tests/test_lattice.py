import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from ehglue import lattice
from ehglue.algebra import MINUS_TO_PLUS, PLUS_TO_MINUS
from ehglue.lattice import (KAPPA, SingularLatticeError, SumParams, TailToleranceError,
                            class_tensors, closed_form_dK, dL_lattice_sum, epstein6,
                            lattice_sum_B, scalar_tail_bound)
from oracles import direct_B, direct_epstein

E1 = np.array([1.0, 0.0, 0.0, 0.0])
LOOSE = SumParams(4, np.inf)


def near_identity(rng, size=0.15):
    return np.eye(4) + size * rng.normal(size=(4, 4))


def test_kappa_matches_quadrature():
    value, _ = integrate.tplquad(lambda a, b, c: (1 + a * a + b * b + c * c) ** -3,
                                 0, 1, 0, 1, 0, 1, epsabs=1e-13, epsrel=1e-13)
    assert 32 * value <= KAPPA < 32 * value + 1e-4


def test_sum_params_validation():
    with pytest.raises(ValueError):
        SumParams(3)
    with pytest.raises(ValueError):
        SumParams(10.5)
    with pytest.raises(ValueError):
        SumParams(10, 0.0)
    assert SumParams(10.0).radius == 10


def test_epstein_reference_value():
    res = epstein6(E1, np.eye(4), excluded=[(0, 0, 0, 0), (-1, 0, 0, 0)])
    # Frozen from the dense-grid oracle extrapolated with the tail bound.
    assert res.value == pytest.approx(0.1850688960728828, abs=1e-12)
    assert res.tail < 1e-4
    assert 0.18 <= res.value <= 0.20


@pytest.mark.parametrize("radius", [4, 6])
def test_epstein_matches_dense_grid(radius, rng):
    L = near_identity(rng)
    x = rng.normal(size=4)
    res = epstein6(x, L, params=SumParams(radius, np.inf))
    assert res.value == pytest.approx(direct_epstein(x, L, radius), rel=1e-12)


def test_epstein_excluded_indices():
    full = epstein6(E1, np.eye(4), params=LOOSE).value
    cut = epstein6(E1, np.eye(4), excluded=[(0, 0, 0, 0), (0, 0, 0, 0)], params=LOOSE).value
    assert full - cut == pytest.approx(1.0)


def test_epstein_singular_term():
    with pytest.raises(SingularLatticeError):
        epstein6(np.zeros(4), np.eye(4), params=LOOSE)
    res = epstein6(np.zeros(4), np.eye(4), excluded=[(0, 0, 0, 0)], params=LOOSE)
    assert np.isfinite(res.value)


def test_tail_bound_is_rigorous(rng):
    for _ in range(5):
        L = near_identity(rng, 0.3)
        if np.linalg.det(L) <= 0:
            continue
        x = rng.normal(size=4)
        small = epstein6(x, L, params=SumParams(4, np.inf))
        big = epstein6(x, L, params=SumParams(24, np.inf))
        assert 0 <= big.value - small.value <= small.tail


def test_tail_tolerance_error():
    with pytest.raises(TailToleranceError):
        epstein6(E1, np.eye(4), params=SumParams(4, 1e-9))


def test_lattice_validation():
    with pytest.raises(ValueError):
        lattice.as_lattice(np.diag([-1.0, 1.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        lattice.as_lattice(np.eye(3))
    with pytest.raises(ValueError):
        lattice.as_lattice(np.full((4, 4), np.nan))


def test_B_reference_value():
    res = lattice_sum_B(E1, np.eye(4), [1, 0, 0], [1, 0, 0])
    np.testing.assert_allclose(res.value, np.diag([16.24047895976601, -8.120239479883002,
                                                   -8.120239479883002]), atol=1e-10)
    assert res.tail < 1e-2


@pytest.mark.parametrize("pairing", [PLUS_TO_MINUS, MINUS_TO_PLUS])
def test_B_matches_quaternion_oracle(pairing, rng):
    L = near_identity(rng)
    x = rng.integers(0, 2, size=4).astype(float) + 0.3 * rng.normal(size=4)
    z, zp = rng.normal(size=(2, 3))
    got = lattice_sum_B(x, L, z, zp, pairing, LOOSE).value
    want = direct_B(x, L, z, zp, pairing == MINUS_TO_PLUS, 4)
    np.testing.assert_allclose(got, want, atol=1e-12 * np.abs(want).max())


@given(st.integers(0, 15), st.integers(0, 3), st.integers(-2, 2))
def test_B_periodic_even_traceless(cls, axis, shift):
    x = np.array([(cls >> (3 - k)) & 1 for k in range(4)], dtype=float)
    if not x.any():
        x[0] = 1.0 if cls == 0 else x[0]
    z = np.array([0.3, -1.1, 0.8])
    zp = np.array([1.0, 0.2, -0.4])
    base = lattice_sum_B(x, np.eye(4), z, zp, params=SumParams(6, np.inf)).value
    moved = x.copy()
    moved[axis] += 2 * shift
    np.testing.assert_allclose(
        lattice_sum_B(moved, np.eye(4), z, zp, params=SumParams(6, np.inf)).value, base,
        atol=1e-12)
    np.testing.assert_allclose(
        lattice_sum_B(-x, np.eye(4), z, zp, params=SumParams(6, np.inf)).value, base,
        atol=1e-12)
    np.testing.assert_allclose(base, base.T, atol=1e-14)
    assert abs(np.trace(base)) < 1e-12


@given(st.floats(0.2, 5.0))
def test_B_homogeneity_in_L(s):
    L = np.diag([1.0, 1.2, 0.9, 1.1])
    z = np.array([0.5, 1.0, -0.2])
    base = lattice_sum_B(E1, L, z, z, params=SumParams(4, np.inf)).value
    scaled = lattice_sum_B(E1, s * L, z, z, params=SumParams(4, np.inf)).value
    np.testing.assert_allclose(scaled, base * s ** -6, rtol=1e-12, atol=1e-14 * s ** -6)


def test_class_tensors_match_direct_sums(rng):
    for L in (np.eye(4), near_identity(rng)):
        ct = class_tensors(L, 6)
        for cls in (1, 6, 8, 15):
            x = np.array([(cls >> (3 - k)) & 1 for k in range(4)], dtype=float)
            z, zp = rng.normal(size=(2, 3))
            for pairing in (PLUS_TO_MINUS, MINUS_TO_PLUS):
                want = lattice_sum_B(x, L, z, zp, pairing, SumParams(6, np.inf)).value
                np.testing.assert_allclose(ct.B(cls, z, zp, pairing), want,
                                           atol=1e-11 * max(1.0, np.abs(want).max()))


def test_derivative_along_L_is_minus_six_B(rng):
    L = near_identity(rng)
    z = rng.normal(size=3)
    params = SumParams(6, np.inf)
    B = lattice_sum_B(E1, L, z, z, params=params).value
    d = dL_lattice_sum(E1, L, L, z, z, params=params)
    np.testing.assert_allclose(d.value, -6.0 * B, rtol=1e-6, atol=1e-8)
    ct = class_tensors(L, 6, order6=True)
    np.testing.assert_allclose(np.einsum("cpikjl,i,k->cpjl", ct.derivative(L), z, z)[8, 0],
                               -6.0 * B, atol=1e-10)


def test_analytic_derivative_matches_finite_differences(rng):
    L = near_identity(rng)
    dL = rng.normal(size=(4, 4))
    z, zp = rng.normal(size=(2, 3))
    params = SumParams(5, np.inf)
    fd = dL_lattice_sum(E1, L, dL, z, zp, params=params)
    ct = class_tensors(L, 5, order6=True)
    analytic = np.einsum("ikjl,i,k->jl", ct.derivative(dL)[8, 0], z, zp)
    np.testing.assert_allclose(analytic, fd.value, atol=1e-6 * np.abs(analytic).max())
    assert fd.tail > 0


def test_dL_zero_direction():
    res = dL_lattice_sum(E1, np.eye(4), np.zeros((4, 4)), [1, 0, 0], [1, 0, 0], params=LOOSE)
    assert np.all(res.value == 0) and res.tail == 0


def test_richardson_warning_on_huge_step():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dL_lattice_sum(E1, np.eye(4), np.diag([1.0, 0, 0, 0]), [1, 0, 0], [1, 0, 0],
                       params=LOOSE, step=0.3)
    assert any("Richardson" in str(w.message) for w in caught)


def test_closed_form_with_scaling_weight_reproduces_B(rng):
    # With dL = L every weight <Lv, dL v>/|Lv|^2 equals one.
    L = near_identity(rng)
    zi, zj = rng.normal(size=(2, 3))
    i = np.array([1, 0, 0, 0])
    j = np.zeros(4)
    res = closed_form_dK(i, j, L, L, zi, zj, params=LOOSE)
    B = lattice_sum_B(i - j, L, zi, zi, params=LOOSE).value
    assert res.value == pytest.approx(zj @ B @ zj, rel=1e-12)


def test_closed_form_matches_class_tensor_weights(rng):
    K = np.diag([1.0, 0.0, 0.0, 0.0])
    zi, zj = rng.normal(size=(2, 3))
    res = closed_form_dK([1, 0, 0, 0], [0, 0, 0, 0], np.eye(4), K, zi, zj,
                         params=SumParams(6, np.inf))
    ct = class_tensors(np.eye(4), 6, order6=True)
    w = np.einsum("ikjl,i,k,j,l->", ct.weighted(K)[8, 0], zi, zi, zj, zj)
    assert res.value == pytest.approx(w, rel=1e-10)


def test_scalar_tail_bound_decreases():
    L = np.eye(4)
    assert scalar_tail_bound(L, 40) < scalar_tail_bound(L, 20) < scalar_tail_bound(L, 10)
    assert scalar_tail_bound(2 * L, 10) == pytest.approx(scalar_tail_bound(L, 10) / 64)


def test_thread_env_parsing():
    assert lattice.thread_count_from_env({}) is None
    assert lattice.thread_count_from_env({"EHGLUE_NUM_THREADS": "3"}) == 3
    for bad in ("0", "-2", "two"):
        with pytest.raises(ValueError):
            lattice.thread_count_from_env({"EHGLUE_NUM_THREADS": bad})
