import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sdd_sim.errors import InvalidArgument, OutOfWindowError
from sdd_sim.history import (HistorySegment, InitialFunction, eval_at, extend, load_initial_csv, push,
                             segment_sup_norm, uniform_theta, write_initial_csv)
from sdd_sim.spectral import build_dirichlet_laplacian_1d, to_nodal


def linear_segment():
    t = np.linspace(-1.0, 0.0, 5)
    v = np.column_stack([t, 2 * t + 1])
    return HistorySegment(t, v, 1.0)


def test_eval_at_nodes_is_exact():
    seg = linear_segment()
    for t, v in zip(seg.times, seg.values):
        assert np.array_equal(eval_at(seg, t), v)


@given(st.floats(-1.0, 0.0))
def test_eval_at_reproduces_linear_functions(s):
    seg = linear_segment()
    np.testing.assert_allclose(seg.eval_at(s), [s, 2 * s + 1], atol=1e-15)


def test_out_of_window_raises():
    seg = linear_segment()
    with pytest.raises(OutOfWindowError):
        seg.eval_at(-1.1)
    with pytest.raises(OutOfWindowError):
        seg.eval_at(0.01)


def test_extend_holds_phi_zero():
    phi = InitialFunction.from_callable(lambda s: np.array([1 + s, s * s]), 1.0, 10)
    seg = extend(phi, 0.4)
    np.testing.assert_array_equal(seg.at(0.4).eval_at(0.3), phi.at_zero)
    with pytest.raises(OutOfWindowError):
        seg.at(0.5)
    with pytest.raises(InvalidArgument):
        extend(phi, 0.0)


def test_push_keeps_window_and_bounds_memory():
    r = 0.5
    seg = HistorySegment([-r, 0.0], np.zeros((2, 1)), r)
    h = 0.01
    for n in range(1, 2001):
        push(seg, n * h, [n * h])
    t = seg.t_now
    assert len(seg) <= int(r / h) + 3
    np.testing.assert_allclose(seg.eval_at(t - r), [t - r], rtol=1e-12)
    np.testing.assert_allclose(seg.eval_at(t - 0.123), [t - 0.123], rtol=1e-12)
    with pytest.raises(InvalidArgument):
        seg.push(t, [0.0])


def test_sup_norm_sees_interior_peak():
    t = np.array([-1.0, -0.5, 0.0])
    v = np.array([[0.0], [3.0], [1.0]])
    assert segment_sup_norm(HistorySegment(t, v, 1.0)) == 3.0


def test_window_samples_interpolates_endpoints():
    seg = linear_segment()
    times, vals = seg.window_samples(-0.9, -0.3)
    assert times[0] == -0.9 and times[-1] == -0.3
    np.testing.assert_allclose(vals[:, 0], times, atol=1e-15)


def test_initial_function_validation():
    with pytest.raises(InvalidArgument):
        InitialFunction(np.array([-1.0, -0.1]), np.zeros((2, 2)))
    with pytest.raises(InvalidArgument):
        InitialFunction(np.array([-1.0, -1.0, 0.0]), np.zeros((3, 2)))
    with pytest.raises(InvalidArgument):
        InitialFunction(np.array([-1.0, 0.0]), np.zeros((3, 2)))


def test_uniform_theta_ends_exactly_at_zero():
    g = uniform_theta(0.7, 70)
    assert g[0] == -0.7 and g[-1] == 0.0 and g.size == 71


def test_resampling_is_identity_for_linear_data():
    phi = InitialFunction.from_callable(lambda s: np.array([3 * s - 1]), 1.0, 4)
    fine = phi.resampled(40)
    np.testing.assert_allclose(fine.values[:, 0], 3 * fine.theta - 1, atol=1e-14)
    assert phi.resampled(4) is phi


def test_csv_round_trip_modal(tmp_path):
    op = build_dirichlet_laplacian_1d(math.pi, 4, 16)
    phi = InitialFunction.from_callable(lambda s: np.array([1, s, s * s, math.sin(s)]), 1.0, 7)
    path = tmp_path / "phi.csv"
    write_initial_csv(path, phi)
    back = load_initial_csv(path, op)
    np.testing.assert_array_equal(back.theta, phi.theta)
    np.testing.assert_array_equal(back.values, phi.values)


def test_csv_grid_columns_are_projected(tmp_path):
    op = build_dirichlet_laplacian_1d(math.pi, 4, 16)
    v = np.array([0.5, 0.0, -0.25, 0.0])
    nodal = to_nodal(op, v)
    path = tmp_path / "phi.csv"
    lines = ["theta," + ",".join(f"grid_{j + 1}" for j in range(op.n_grid))]
    for s in (-1.0, 0.0):
        lines.append(f"{s}," + ",".join(repr(float(x)) for x in nodal))
    path.write_text("\n".join(lines) + "\n")
    phi = load_initial_csv(path, op)
    np.testing.assert_allclose(phi.at_zero, v, atol=1e-14)


def test_csv_rejects_mixed_columns(tmp_path):
    op = build_dirichlet_laplacian_1d(math.pi, 4, 16)
    path = tmp_path / "bad.csv"
    path.write_text("theta,modal_1,grid_2\n-1,0,0\n0,0,0\n")
    with pytest.raises(InvalidArgument):
        load_initial_csv(path, op)
