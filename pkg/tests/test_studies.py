import numpy as np
import pytest

from westfem import TimeGrid
from westfem.problems import ChannelData, FocusSource, MmsCase, study_mesh
from westfem.studies import channel_study, focus_study, mms_study


def test_study_mesh_kinds():
    assert study_mesh("channel", 2).n_elems == 200
    assert study_mesh("focus", 1).n_elems == 700
    assert study_mesh("mms", 5).n_elems == 32
    with pytest.raises(ValueError):
        study_mesh("bogus", 1)


def test_focus_source_modulation():
    src = FocusSource()
    w = src.omega
    switch = 2 * np.pi / w
    # pure sine before the switch, modulated afterwards
    t1 = 0.5 * switch
    assert src(t1) == pytest.approx(1e7 * np.sin(w * t1), rel=1e-12)
    t2 = 1.5 * switch
    expected = 1e7 * np.sin(w * t2) * (1.0 + np.sin(w * t2 / 4.0))
    assert src(t2) == pytest.approx(expected, rel=1e-12)
    # continuous at the switch: both branches vanish there
    assert abs(src(switch)) < 1e-4
    assert abs(src(np.nextafter(switch, 1.0))) < 1e-4


def test_mms_case_source_consistency():
    # residual of the exact solution under the manufactured source is zero
    case = MmsCase()
    x = np.linspace(0.05, 0.95, 7)
    t = 0.37
    pi2 = np.pi ** 2
    s = np.sin(np.pi * x)
    u_tt = s * case.time_factor_dtt(t)
    lap_u = -pi2 * s * case.time_factor(t)
    lap_v = -pi2 * s * case.time_factor_dt(t)
    v = s * case.time_factor_dt(t)
    resid = case.alpha(x, t) * u_tt - case.material.c ** 2 * lap_u \
        - case.material.b * lap_v + case.beta(x, t) * v - case.source(x, t)
    assert np.max(np.abs(resid)) < 1e-12


def test_channel_study_small():
    grid = TimeGrid(37e-6, 201)
    res = channel_study([1, 2], 4, grid, stride=100)
    assert res.levels == [1, 2]
    order_u = res.table.orders["LinfL2_u"][1]
    assert order_u == pytest.approx(2.0, abs=0.35)
    assert set(res.trajectories) == {1, 2, 4}
    assert res.h[1] == pytest.approx(0.002, rel=1e-12)


def test_channel_study_validates_levels():
    grid = TimeGrid(37e-6, 11)
    with pytest.raises(ValueError):
        channel_study([1, 2], 2, grid)
    with pytest.raises(ValueError):
        channel_study([], 3, grid)


def test_mms_study_small():
    grid = TimeGrid(1.0, 201)
    res = mms_study([3, 4, 5], grid)
    orders = res.table.orders["LinfL2_u"][1:]
    assert np.all(np.abs(orders - 2.0) < 0.2)
    h1_orders = res.table.orders["LinfH1_u"][1:]
    assert np.all(np.abs(h1_orders - 1.0) < 0.2)


def test_focus_study_small():
    grid = TimeGrid(40e-6, 41)
    res = focus_study([1, 2, 3], grid, stride=40)
    assert res.q.shape == (3,)
    assert np.all(res.q > 0.0)
    assert res.h[0] > res.h[1] > res.h[2]
    assert len(res.fit) == 4
    with pytest.raises(ValueError):
        focus_study([1, 2], grid)
