import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sdd_sim.errors import InvalidArgument
from sdd_sim.spectral import (apply_semigroup, build_dirichlet_laplacian_1d, frac_power_norm, frac_power_norms,
                              nodal_norm, tail_ratio, to_modal, to_nodal)

coeffs = arrays(np.float64, 8, elements=st.floats(-10, 10, allow_nan=False))


def test_eigenvalues_closed_form():
    op = build_dirichlet_laplacian_1d(2.0, 6, 24)
    k = np.arange(1, 7)
    np.testing.assert_allclose(op.eigenvalues, (k * math.pi / 2.0) ** 2, rtol=1e-15)
    assert op.lambda1 == pytest.approx((math.pi / 2) ** 2)
    assert op.volume == 2.0


def test_unit_interval_pi_has_integer_spectrum(op8):
    np.testing.assert_allclose(op8.eigenvalues, np.arange(1, 9) ** 2, rtol=1e-14)


def test_grid_and_default_size():
    op = build_dirichlet_laplacian_1d(math.pi, 5)
    assert op.n_grid == 20
    np.testing.assert_allclose(op.grid, np.arange(1, 21) * math.pi / 21)


def test_discrete_orthonormality(op8):
    gram = op8.basis.T @ op8.basis * op8.dx
    np.testing.assert_allclose(gram, np.eye(8), atol=1e-13)


def test_eigenfunction_values(op8):
    x = np.array([0.3, 1.1, 2.9])
    np.testing.assert_allclose(op8.eigenfunction(3, x), math.sqrt(2 / math.pi) * np.sin(3 * x))


@pytest.mark.parametrize("L, N, G", [(0.0, 4, 16), (-1.0, 4, 16), (1.0, 0, 16), (1.0, 4, 7)])
def test_build_rejects_bad_arguments(L, N, G):
    with pytest.raises(InvalidArgument):
        build_dirichlet_laplacian_1d(L, N, G)


@given(coeffs)
def test_modal_nodal_round_trip(v):
    op = build_dirichlet_laplacian_1d(math.pi, 8, 32)
    np.testing.assert_allclose(to_modal(op, to_nodal(op, v)), v, atol=1e-12 * (1 + np.abs(v).max()))


@given(coeffs)
def test_parseval_on_grid(v):
    op = build_dirichlet_laplacian_1d(math.pi, 8, 32)
    assert nodal_norm(op, to_nodal(op, v)) == pytest.approx(np.linalg.norm(v), rel=1e-12, abs=1e-12)


def test_semigroup_exact_decay(op8):
    v = np.zeros(8)
    v[0], v[2] = 1.0, 2.0
    out = apply_semigroup(op8, 0.25, 0.7, v)
    np.testing.assert_allclose(out[[0, 2]], [math.exp(-1.25 * 0.7), 2 * math.exp(-9.25 * 0.7)], rtol=1e-15)


@settings(max_examples=50)
@given(coeffs, st.floats(0, 2), st.floats(0, 2), st.floats(0, 1))
def test_semigroup_property_and_contraction(v, s, t, d):
    op = build_dirichlet_laplacian_1d(math.pi, 8, 32)
    a = apply_semigroup(op, d, s, apply_semigroup(op, d, t, v))
    b = apply_semigroup(op, d, s + t, v)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)
    assert np.linalg.norm(b) <= np.linalg.norm(v) * (1 + 1e-15)


def test_semigroup_rejects_negative_time(op8):
    with pytest.raises(InvalidArgument):
        apply_semigroup(op8, 0.0, -1.0, np.ones(8))


def test_frac_power_norm(op8):
    v = np.zeros(8)
    v[3] = 2.0
    assert frac_power_norm(op8, 0.0, v) == pytest.approx(2.0)
    assert frac_power_norm(op8, 0.25, v) == pytest.approx(2.0 * 16 ** 0.25)
    states = np.vstack([v, 2 * v])
    np.testing.assert_allclose(frac_power_norms(op8, 0.25, states), [4.0, 8.0])
    with pytest.raises(InvalidArgument):
        frac_power_norm(op8, 1.5, v)


def test_tail_ratio():
    assert tail_ratio(np.array([1.0, 0.0, 0.0, 0.0])) == 0.0
    assert tail_ratio(np.zeros(4)) == 0.0
    assert 0 < tail_ratio(np.ones(8)) < 1
