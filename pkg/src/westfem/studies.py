"""Convergence-study drivers for the channel, focus and MMS experiments.

Each driver marches all refinement levels on one shared time grid and
accumulates the space-time error norms step by step, so no full
trajectory ever has to be stored: coarse states are interpolated onto
the reference mesh (channel) or compared against the closed-form
solution (MMS) as the runs proceed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (ExactErrorAccumulator, OrderTable,
                     SpaceTimeErrorAccumulator, fit_power, order)
from .fespace import FeSpace, ritz_project, transfer_matrix
from .problems import ChannelData, FocusSource, MmsCase, study_mesh
from .wavesolver import (FixedPointConfig, LinearWaveStepper, NewmarkParams,
                         RunRecorder, SolverConfig, WATER, WesterveltStepper,
                         march)


@dataclass
class ConvergenceResult:
    """Per-level errors/orders of a reference- or exact-based study."""

    kind: str
    levels: list
    ref_level: int | None
    h: dict                      # level -> mesh size
    reports: list                # NormReport per level
    table: OrderTable
    trajectories: dict = field(default_factory=dict)


@dataclass
class FocusResult:
    """q(h) data, power-law fit and q-difference orders of a focus study."""

    levels: list
    h: np.ndarray
    q: np.ndarray
    fit: tuple                   # (alpha, beta, gamma, residual)
    e_ref: np.ndarray            # |q_N - q at finest level|, finest excluded
    orders: np.ndarray           # NaN where undefined
    trajectories: dict = field(default_factory=dict)


def _lockstep(steppers, states, grid, on_state):
    """March several steppers on one grid, calling ``on_state`` per step."""
    times = grid.times()
    iters = {key: 0 for key in steppers}
    on_state(0, states, iters)
    for n in range(1, grid.n_points):
        for key, stepper in steppers.items():
            try:
                states[key], iters[key] = stepper.step(states[key], times[n])
            except Exception as exc:
                exc.step_index = n
                exc.study_level = key
                raise
        on_state(n, states, iters)
    return states


def channel_study(levels, ref_level, grid, material=WATER,
                  newmark=NewmarkParams(), fixed_point=FixedPointConfig(),
                  data=ChannelData(), solver=SolverConfig(), stride=200,
                  progress=None):
    """Desk-scale rerun of the channel experiment.

    Runs every level plus the reference on the shared time grid from
    Ritz-projected Gaussian initial data and accumulates the five
    space-time norms of each level against the reference.
    """
    levels = sorted(int(n) for n in levels)
    ref_level = int(ref_level)
    if not levels:
        raise ValueError("need at least one level")
    if ref_level <= max(levels):
        raise ValueError("reference level must exceed every study level")
    keys = levels + [ref_level]

    spaces, steppers, states, recorders = {}, {}, {}, {}
    for n_level in keys:
        if progress:
            progress(f"channel level {n_level}: setup")
        V = FeSpace(study_mesh("channel", n_level))
        spaces[n_level] = V
        steppers[n_level] = WesterveltStepper(
            V, material, newmark, fixed_point, solver=solver)
        u0 = ritz_project(V, data.grad_u0)
        v0 = ritz_project(V, data.grad_u1)
        states[n_level] = steppers[n_level].initial_state(u0, v0)
        recorders[n_level] = RunRecorder(steppers[n_level], grid, stride)

    ref_space = spaces[ref_level]
    prolong = {n: transfer_matrix(spaces[n], ref_space) for n in levels}
    accs = {n: SpaceTimeErrorAccumulator(ref_space, grid.n_points, grid.dt)
            for n in levels}

    def on_state(n, current, iters):
        ref = current[ref_level]
        for lvl in levels:
            s = current[lvl]
            P = prolong[lvl]
            accs[lvl].add(P @ s.u - ref.u, P @ s.v - ref.v, P @ s.a - ref.a)
        for lvl in keys:
            recorders[lvl].record(n, current[lvl], iters[lvl])
        if progress and n % 500 == 0 and n:
            progress(f"channel step {n}/{grid.n_points - 1}")

    _lockstep(steppers, states, grid, on_state)
    reports = [accs[n].report() for n in levels]
    return ConvergenceResult(
        "channel", levels, ref_level,
        {n: spaces[n].mesh.h_max for n in keys}, reports,
        OrderTable.from_reports(levels, reports),
        {n: recorders[n].traj for n in keys})


def mms_study(levels, grid, case=None, newmark=NewmarkParams(0.25, 0.5),
              solver=SolverConfig(), stride=200, progress=None):
    """Linear variable-coefficient verification against the exact solution.

    Uses the non-dissipative Newmark pair by default so the measured
    errors are spatial; the dissipative pair stays the default for the
    physical studies.
    """
    case = case or MmsCase()
    levels = sorted(int(n) for n in levels)
    reports, trajectories, h = [], {}, {}
    for n_level in levels:
        if progress:
            progress(f"mms level {n_level}")
        V = FeSpace(study_mesh("mms", n_level))
        h[n_level] = V.mesh.h_max
        stepper = LinearWaveStepper(
            V, case.material, newmark, alpha=case.alpha,
            beta_coeff=case.beta, source=case.source, solver=solver)
        u0 = ritz_project(V, case.grad_u0)
        v0 = ritz_project(V, case.grad_u1)
        acc = ExactErrorAccumulator(V, case.exact_at_quadpoints(V),
                                    grid.n_points, grid.dt)
        recorder = RunRecorder(stepper, grid, stride)
        for n, state, iters in march(stepper, grid,
                                     stepper.initial_state(u0, v0)):
            acc.add(state)
            recorder.record(n, state, iters)
        reports.append(acc.report())
        trajectories[n_level] = recorder.traj
    return ConvergenceResult("mms", levels, None, h, reports,
                             OrderTable.from_reports(levels, reports),
                             trajectories)


def focus_study(levels, grid, material=WATER, newmark=NewmarkParams(),
                fixed_point=FixedPointConfig(), source=None,
                solver=SolverConfig(), stride=500, progress=None):
    """Focused-ultrasound q(h) study with the power-law fit.

    Each level starts from rest and is driven by the modulated transducer
    flux; the finest level serves as the reference for the q-difference
    orders.
    """
    source = source or FocusSource()
    levels = sorted(int(n) for n in levels)
    if len(levels) < 3:
        raise ValueError("focus study needs at least three levels to fit")
    hs, qs, trajectories = [], [], {}
    for n_level in levels:
        if progress:
            progress(f"focus level {n_level}: running")
        V = FeSpace(study_mesh("focus", n_level))
        stepper = WesterveltStepper(V, material, newmark, fixed_point,
                                    neumann_g=source, solver=solver)
        recorder = RunRecorder(stepper, grid, stride)
        zero = V.function()
        for n, state, iters in march(stepper, grid,
                                     stepper.initial_state(zero, zero)):
            recorder.record(n, state, iters)
        traj = recorder.traj
        trajectories[n_level] = traj
        hs.append(V.mesh.h_max)
        qs.append(float(np.max(traj.l2_u)))
        if progress:
            progress(f"focus level {n_level}: h={hs[-1]:.6e} q={qs[-1]:.6f}")
    hs = np.array(hs)
    qs = np.array(qs)
    fit = fit_power(hs, qs)
    e_ref = np.abs(qs[:-1] - qs[-1])
    orders = np.full(len(levels) - 1, np.nan)
    for i in range(1, e_ref.size):
        if e_ref[i - 1] > 0.0 and e_ref[i] > 0.0:
            orders[i] = order(e_ref[i - 1], e_ref[i])
    return FocusResult(levels, hs, qs, fit, e_ref, orders, trajectories)
