import math

import numpy as np
import pytest

from westfem import (FeSpace, FitFailureError, TimeGrid, Trajectory, WATER,
                     WaveState, WesterveltStepper, channel_mesh, fit_power,
                     h1_seminorm, interval_mesh, l2_norm, nodal_interpolate,
                     order, qoi, ritz_project, run, trajectory_error)
from westfem.errors import OrderTable, NormReport
from westfem.problems import ChannelData

# frozen q(h) measurements of the full-scale focus experiment; the
# power-law fit on them is known to give gamma ~ 1.82
QFIT_H = [0.00250000000005457, 0.00125000000002728, 0.000624999999899956,
          0.000312500000063665, 0.000156249999918145]
QFIT_Q = [1180.47875053766, 1177.48279070331, 1176.60715459484,
          1176.37817570144, 1176.32006256018]


def test_l2_norm_examples():
    V = FeSpace(interval_mesh(1.0, 8))
    one = nodal_interpolate(V, lambda x: np.ones_like(x))
    assert l2_norm(one) == pytest.approx(1.0, rel=1e-14)
    assert l2_norm(V.function()) == 0.0
    V128 = FeSpace(interval_mesh(1.0, 128))
    s = nodal_interpolate(V128, lambda x: np.sin(np.pi * x))
    assert abs(l2_norm(s) - math.sqrt(0.5)) < 1e-4


def test_h1_seminorm_examples():
    V = FeSpace(interval_mesh(1.0, 16))
    const = nodal_interpolate(V, lambda x: 3.0 + 0.0 * x)
    assert h1_seminorm(const) < 1e-12
    lin = nodal_interpolate(V, lambda x: x)
    assert h1_seminorm(lin) == pytest.approx(1.0, rel=1e-13)
    V128 = FeSpace(interval_mesh(1.0, 128))
    s = nodal_interpolate(V128, lambda x: np.sin(np.pi * x))
    assert abs(h1_seminorm(s) - np.pi / math.sqrt(2.0)) < 1e-3


def test_norm_homogeneity():
    V = FeSpace(interval_mesh(1.0, 32))
    rng = np.random.default_rng(23)
    f = V.function(rng.normal(size=V.n_dofs))
    s = -3.7
    g = V.function(s * f.dofs)
    assert abs(l2_norm(g) - abs(s) * l2_norm(f)) <= 1e-12 * l2_norm(g)
    assert abs(h1_seminorm(g) - abs(s) * h1_seminorm(f)) \
        <= 1e-12 * h1_seminorm(g)


def test_order_examples():
    assert order(4e-4, 1e-4) == pytest.approx(2.0, abs=1e-12)
    assert order(1e-3, 5e-4) == pytest.approx(1.0, abs=1e-12)
    for p in (1, 2, 3):
        assert order(1.0, 2.0 ** -p) == pytest.approx(p, abs=1e-12)
    with pytest.raises(ValueError):
        order(0.0, 1.0)
    with pytest.raises(ValueError):
        order(1.0, -2.0)


def _toy_trajectory(space, dof_seq, times, stride=1):
    traj = Trajectory(space, np.asarray(times), stride)
    for i, dofs in enumerate(dof_seq):
        traj.snapshot_indices.append(i)
        traj.snapshots.append(WaveState(times[i], np.asarray(dofs, float),
                                        np.zeros(space.n_dofs),
                                        np.zeros(space.n_dofs)))
    return traj


def test_trajectory_error_same_trajectory_is_zero():
    V = FeSpace(interval_mesh(1.0, 4))
    rng = np.random.default_rng(1)
    seq = [rng.normal(size=V.n_dofs) for _ in range(3)]
    t = [0.0, 0.5, 1.0]
    a = _toy_trajectory(V, seq, t)
    b = _toy_trajectory(V, seq, t)
    rep = a and trajectory_error(a, b)
    assert rep.as_tuple() == (0.0, 0.0, 0.0, 0.0, 0.0)


def test_trajectory_error_constant_fields():
    V = FeSpace(interval_mesh(1.0, 4))
    ones = np.ones(V.n_dofs)
    t = [0.0, 0.5, 1.0]
    a = _toy_trajectory(V, [2.0 * ones] * 3, t)
    b = _toy_trajectory(V, [np.zeros(V.n_dofs)] * 3, t)
    rep = trajectory_error(a, b)
    f = V.function(2.0 * ones)
    assert rep.LinfL2_u == pytest.approx(l2_norm(f), rel=1e-13)


def test_trajectory_error_trapezoid_arithmetic():
    # |e(t0)| = 3, |e(t1)| = 4, dt = 1 -> L2L2 = sqrt(0.5*9 + 0.5*16)
    V = FeSpace(interval_mesh(1.0, 8))
    c3 = 3.0 * np.ones(V.n_dofs)
    c4 = 4.0 * np.ones(V.n_dofs)
    t = [0.0, 1.0]
    a = Trajectory(V, np.array(t), 1)
    b = Trajectory(V, np.array(t), 1)
    for i, (ua, ub) in enumerate([(c3, np.zeros(V.n_dofs)),
                                  (c4, np.zeros(V.n_dofs))]):
        a.snapshot_indices.append(i)
        b.snapshot_indices.append(i)
        a.snapshots.append(WaveState(t[i], ua, ua, ua))
        b.snapshots.append(WaveState(t[i], ub, ub, ub))
    rep = trajectory_error(a, b)
    assert rep.L2L2_a == pytest.approx(math.sqrt(12.5), rel=1e-13)
    assert rep.LinfL2_u == pytest.approx(4.0, rel=1e-13)


def test_trajectory_error_rejects_mismatched_grids():
    V = FeSpace(interval_mesh(1.0, 4))
    a = _toy_trajectory(V, [np.zeros(V.n_dofs)] * 2, [0.0, 1.0])
    b = _toy_trajectory(V, [np.zeros(V.n_dofs)] * 2, [0.0, 2.0])
    with pytest.raises(ValueError):
        trajectory_error(a, b)


def test_trajectory_error_coarse_to_fine():
    Vc = FeSpace(interval_mesh(1.0, 4))
    Vf = FeSpace(interval_mesh(1.0, 8))
    lin_c = nodal_interpolate(Vc, lambda x: 2.0 * x)
    lin_f = nodal_interpolate(Vf, lambda x: 2.0 * x)
    t = [0.0, 1.0]
    a = _toy_trajectory(Vc, [lin_c.dofs] * 2, t)
    b = _toy_trajectory(Vf, [lin_f.dofs] * 2, t)
    rep = trajectory_error(a, b)
    assert max(rep.as_tuple()) < 1e-12   # P1 transfer reproduces linears


def test_qoi_examples():
    V = FeSpace(interval_mesh(1.0, 8))
    zero = _toy_trajectory(V, [np.zeros(V.n_dofs)] * 3, [0.0, 0.5, 1.0])
    assert qoi(zero) == 0.0
    ones = np.ones(V.n_dofs)
    single = _toy_trajectory(V, [ones], [0.0])
    assert qoi(single) == pytest.approx(l2_norm(V.function(ones)), rel=1e-13)


def test_qoi_uses_all_recorded_steps():
    data = ChannelData()
    V = FeSpace(channel_mesh(1))
    u0 = ritz_project(V, data.grad_u0)
    v0 = ritz_project(V, data.grad_u1)
    stepper = WesterveltStepper(V, WATER)
    traj = run(stepper, TimeGrid(37e-6, 21), u0, v0, stride=10)
    assert qoi(traj) == pytest.approx(float(np.max(traj.l2_u)), rel=1e-15)
    assert traj.l2_u.size == 21


def test_fit_power_exact_recovery():
    h = np.array([0.1, 0.05, 0.01, 0.001, 0.0001])
    q = 1.0 + 2.0 * h ** 1.5
    alpha, beta, gamma, resid = fit_power(h, q)
    assert abs(alpha - 1.0) < 1e-6
    assert abs(beta - 2.0) < 1e-6
    assert abs(gamma - 1.5) < 1e-6
    assert resid < 1e-9


def test_fit_power_frozen_qoi_data():
    alpha, beta, gamma, resid = fit_power(QFIT_H, QFIT_Q)
    assert gamma == pytest.approx(1.82, abs=0.01)
    assert alpha == pytest.approx(1176.28, abs=0.1)
    scipy_optimize = pytest.importorskip("scipy.optimize")
    popt, _ = scipy_optimize.curve_fit(
        lambda hh, a, b, g: a + b * hh ** g,
        np.array(QFIT_H), np.array(QFIT_Q),
        p0=(alpha, beta, gamma), maxfev=100000)
    assert gamma == pytest.approx(popt[2], abs=1e-4)


def test_fit_power_constant_data_terminates():
    h = np.array([0.1, 0.05, 0.025, 0.0125])
    alpha, beta, gamma, resid = fit_power(h, np.full(4, 3.25))
    assert alpha == pytest.approx(3.25, abs=1e-10)
    assert abs(beta) < 1e-8
    assert resid < 1e-10


def test_fit_power_residual_not_worse_than_start():
    h = np.array(QFIT_H)
    q = np.array(QFIT_Q)
    start = (1.0, 1.0, 2.0)
    design = np.column_stack([np.ones_like(h), h ** 2.0])
    coef, *_ = np.linalg.lstsq(design, q, rcond=None)
    start_resid = np.linalg.norm(coef[0] + coef[1] * h ** 2.0 - q)
    *_, resid = fit_power(h, q, start=start)
    assert resid <= start_resid + 1e-12


def test_fit_power_validates_input():
    with pytest.raises(ValueError):
        fit_power([0.1, 0.2], [1.0, 2.0])
    with pytest.raises(ValueError):
        fit_power([0.1, -0.2, 0.3], [1.0, 2.0, 3.0])


def test_order_table_nan_markers():
    reports = [NormReport(4.0, 2.0, 4.0, 2.0, 4.0),
               NormReport(1.0, 1.0, 1.0, 1.0, 1.0)]
    table = OrderTable.from_reports([1, 2], reports)
    assert math.isnan(table.orders["LinfL2_u"][0])
    assert table.orders["LinfL2_u"][1] == pytest.approx(2.0)
    zero_reports = [NormReport(0.0, 0.0, 0.0, 0.0, 0.0)] * 2
    z = OrderTable.from_reports([1, 2], zero_reports)
    assert np.all(np.isnan(z.orders["LinfL2_u"]))


def test_trajectory_error_swap_symmetric_same_space():
    V = FeSpace(interval_mesh(1.0, 6))
    rng = np.random.default_rng(29)
    t = [0.0, 0.5, 1.0]
    seq_a = [rng.normal(size=V.n_dofs) for _ in t]
    seq_b = [rng.normal(size=V.n_dofs) for _ in t]
    a = _toy_trajectory(V, seq_a, t)
    b = _toy_trajectory(V, seq_b, t)
    fwd = trajectory_error(a, b)
    bwd = trajectory_error(b, a)
    assert fwd.as_tuple() == pytest.approx(bwd.as_tuple(), rel=1e-13)


def test_qoi_empty_trajectory_rejected():
    V = FeSpace(interval_mesh(1.0, 4))
    empty = Trajectory(V, np.array([0.0, 1.0]), 1)
    with pytest.raises(ValueError):
        qoi(empty)
