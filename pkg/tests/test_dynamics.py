import csv
import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qhblowup.compactify import P_value, compactify_point
from qhblowup.dynamics import (
    ExpansionTerm,
    dopri5,
    estimate_tmax,
    expansion_residual_order,
    integrate,
    monitor_lemma_G,
    tmax_from_y,
)
from qhblowup.errors import DegenerateFit, NotConverging, StepSizeUnderflow


def test_dopri5_exponential():
    ts, ys, _ = dopri5(lambda t, y: -y, 0.0, [1.0], 5.0, rtol=1e-12, atol=1e-14)
    assert ys[-1][0] == pytest.approx(math.exp(-5.0), rel=1e-10)


def test_dopri5_agrees_with_scipy():
    def lorenz(t, y):
        return np.array([10 * (y[1] - y[0]), y[0] * (28 - y[2]) - y[1], y[0] * y[1] - 8 / 3 * y[2]])

    times = np.linspace(0, 2, 11)
    _, _, samples = dopri5(lorenz, 0.0, [1.0, 1.0, 1.0], 2.0, rtol=1e-11, atol=1e-12, sample_times=times)
    ref = solve_ivp(lorenz, (0, 2), [1.0, 1.0, 1.0], method="DOP853", rtol=1e-12, atol=1e-12, t_eval=times)
    assert np.max(np.abs(samples - ref.y.T)) < 1e-6


def test_dopri5_dense_output_matches_steps():
    times = np.linspace(0, 3, 31)
    _, _, samples = dopri5(lambda t, y: np.array([y[1], -y[0]]), 0.0, [1.0, 0.0], 3.0,
                           rtol=1e-11, atol=1e-13, sample_times=times)
    assert np.max(np.abs(samples[:, 0] - np.cos(times))) < 1e-9


def test_dopri5_step_underflow_at_singularity():
    with pytest.raises(StepSizeUnderflow):
        dopri5(lambda t, y: y ** 2, 0.0, [1.0], 2.0)


def test_trajectory_invariants(get_system):
    _, _, sys_ = get_system("kk")
    tr = integrate(sys_, np.array([0.5, 0.3]), 20.0)
    assert np.all(tr.P ** (1 / tr.two_c) <= 1 + 1e-10)
    assert np.all(np.diff(tr.t_physical) >= 0)
    assert np.all(np.diff(tr.tau) > 0)


def test_equilibrium_trajectory_is_constant(get_system):
    _, _, sys_ = get_system("scalar_cubic")
    tr = integrate(sys_, np.array([1.0]), 10.0)
    assert np.max(np.abs(tr.states - 1.0)) < 1e-14


def test_interior_equilibrium_has_zero_G(get_system):
    # the origin is an equilibrium of g with G = 0
    _, _, sys_ = get_system("scalar_cubic")
    tr = integrate(sys_, np.array([0.0]), 5.0)
    assert np.max(np.abs(tr.G)) == 0
    assert monitor_lemma_G(tr) < 1e-12


def test_horizon_invariance(get_system):
    _, _, sys_ = get_system("andrews1")
    x0 = np.array([0.6, 0.0])
    x0[1] = (1 - x0[0] ** 2) ** 0.5
    assert abs(P_value(x0, sys_.compact) - 1) < 1e-12
    tr = integrate(sys_, x0, 50.0)
    assert np.max(np.abs(tr.P - 1)) < 1e-8


def test_integrator_tolerance_halving(get_system):
    _, _, sys_ = get_system("kk")
    x0 = np.array([0.8, 0.3])
    a = integrate(sys_, x0, 10.0, rtol=1e-10, atol=1e-12).states[-1]
    b = integrate(sys_, x0, 10.0, rtol=5e-11, atol=5e-13).states[-1]
    assert np.max(np.abs(a - b)) < 10 * 5e-11 * max(1, np.max(np.abs(b)))


def test_sink_attraction_scalar(get_system):
    _, _, sys_ = get_system("scalar_cubic")
    tr = integrate(sys_, np.array([0.8]), 40.0)
    assert abs(tr.states[-1][0] - 1) < 1e-6


def test_below_separatrix_does_not_blow_up(get_system):
    _, _, sys_ = get_system("scalar_cubic")
    with pytest.raises(NotConverging):
        estimate_tmax(sys_, np.array([0.5]), tau_max=200)


def test_tmax_decreases_with_initial_size(get_system):
    _, _, sys_ = get_system("scalar_square")
    ts = [tmax_from_y(sys_, [y0]).t_max for y0 in [0.5, 1.0, 2.0, 4.0]]
    assert ts == pytest.approx([2.0, 1.0, 0.5, 0.25], abs=1e-5)
    assert all(a > b for a, b in zip(ts, ts[1:]))


def test_tmax_scalar_cubic_exact(get_system):
    _, _, sys_ = get_system("scalar_cubic")
    y0 = 1.5
    est = tmax_from_y(sys_, [y0])
    # y' = -y + y^3 blows up at -log(1 - 1/y0^2)/2
    assert est.t_max == pytest.approx(-0.5 * math.log(1 - 1 / y0 ** 2), abs=1e-6)
    assert est.converged


def test_csv_export(tmp_path, get_system):
    _, _, sys_ = get_system("kk")
    tr = integrate(sys_, np.array([0.5, 0.3]), 1.0, sample_dt=0.1)
    path = tmp_path / "traj.csv"
    tr.to_csv(path, ["u", "v"])
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["tau", "t", "u", "v", "p", "G"]
    assert len(rows) == len(tr.tau) + 1
    assert float(rows[-1][0]) == pytest.approx(1.0)


def test_leading_term_of_pure_qh_field_is_exact(get_system):
    spec, _, _ = get_system("scalar_square")
    with mpmath.workdps(50):
        terms = [ExpansionTerm(0, mpmath.mpf(1), mpmath.mpf(-1))]
        fits = expansion_residual_order(spec.to_field(), terms)
    assert fits[0].status == "exact"


def test_expansion_fit_degenerate_when_too_few_points(get_system):
    spec, _, _ = get_system("scalar_square")
    with mpmath.workdps(50):
        # 1/theta + 1 leaves a residual of 2/theta, but only 8 grid points
        terms = [ExpansionTerm(0, mpmath.mpf(1), mpmath.mpf(-1)), ExpansionTerm(0, mpmath.mpf(1), mpmath.mpf(0))]
        with pytest.raises(DegenerateFit):
            expansion_residual_order(spec.to_field(), terms, npts=8)


def test_compactified_start_matches_original(get_system):
    _, _, sys_ = get_system("scalar_square")
    x0 = compactify_point(np.array([1.0]), sys_.compact)
    est = estimate_tmax(sys_, x0)
    assert est.t_max == pytest.approx(1.0, abs=1e-5)
