"""Discrete space-time error norms, convergence orders and the q(h) fit.

The five tabulated norms are max-in-time L2 and H1-seminorm errors of u
and u_t plus the L2-in-time L2 error of u_tt; L2 norms are evaluated
through the consistent mass matrix, seminorms through the stiffness
matrix, and the time integral uses trapezoid weights on the shared time
grid.  The quantity of interest of the focus experiment is the running
max of the solution's L2 norm, and its h-dependence is fitted to
``alpha + beta h^gamma`` with a damped Gauss-Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fespace import transfer_matrix


class FitFailureError(RuntimeError):
    """The nonlinear least-squares fit could not make progress."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


NORM_KEYS = ("LinfL2_u", "LinfH1_u", "LinfL2_v", "LinfH1_v", "L2L2_a")


@dataclass(frozen=True)
class NormReport:
    """The five space-time error norms of one level-vs-reference pair."""

    LinfL2_u: float
    LinfH1_u: float
    LinfL2_v: float
    LinfH1_v: float
    L2L2_a: float

    def as_tuple(self):
        return tuple(getattr(self, k) for k in NORM_KEYS)


def l2_norm(f):
    """L2 norm of an FE function via the consistent mass matrix."""
    M = f.space.mass()
    return math.sqrt(max(float(f.dofs @ (M @ f.dofs)), 0.0))


def h1_seminorm(f):
    """H1 seminorm of an FE function via the stiffness matrix."""
    K = f.space.stiffness()
    return math.sqrt(max(float(f.dofs @ (K @ f.dofs)), 0.0))


def order(e_prev, e_next):
    """Observed convergence order log2(e_prev / e_next)."""
    if e_prev <= 0.0 or e_next <= 0.0:
        raise ValueError("orders require strictly positive errors")
    return math.log(e_prev / e_next) / math.log(2.0)


def qoi(traj):
    """Max over recorded steps of the solution's L2 norm."""
    if traj.l2_u is not None and traj.l2_u.size:
        return float(np.max(traj.l2_u))
    if not traj.snapshots:
        raise ValueError("empty trajectory")
    M = traj.space.mass()
    return max(math.sqrt(max(float(s.u @ (M @ s.u)), 0.0))
               for s in traj.snapshots)


class SpaceTimeErrorAccumulator:
    """Streaming accumulation of the five norms on the reference space.

    Feed the difference vectors (already on the reference space) snapshot
    by snapshot via :meth:`add`; ``dt`` is the spacing between
    consecutive snapshots fed in.
    """

    def __init__(self, ref_space, n_snapshots, dt):
        self.M = ref_space.mass()
        self.K = ref_space.stiffness()
        self.n = int(n_snapshots)
        self.dt = float(dt)
        self._count = 0
        self._max = np.zeros(4)
        self._a_sq_sum = 0.0

    def _l2sq(self, d):
        return max(float(d @ (self.M @ d)), 0.0)

    def _h1sq(self, d):
        return max(float(d @ (self.K @ d)), 0.0)

    def add(self, du, dv, da):
        w = 0.5 if self._count in (0, self.n - 1) else 1.0
        vals = (self._l2sq(du), self._h1sq(du), self._l2sq(dv),
                self._h1sq(dv))
        np.maximum(self._max, vals, out=self._max)
        self._a_sq_sum += w * self.dt * self._l2sq(da)
        self._count += 1

    def report(self):
        if self._count != self.n:
            raise ValueError(f"expected {self.n} snapshots, got {self._count}")
        m = np.sqrt(self._max)
        return NormReport(m[0], m[1], m[2], m[3], math.sqrt(self._a_sq_sum))


def trajectory_error(coarse, ref):
    """Space-time norms of (coarse - ref) on the reference space.

    Both trajectories must share the time grid and snapshot schedule;
    the coarse state is interpolated onto the reference space first.
    """
    if coarse.times.shape != ref.times.shape or \
            not np.allclose(coarse.times, ref.times, rtol=0.0, atol=0.0):
        raise ValueError("trajectories must share the time grid")
    if coarse.snapshot_indices != ref.snapshot_indices:
        raise ValueError("trajectories must share the snapshot schedule")
    if not ref.snapshots:
        raise ValueError("empty trajectories")
    idx = ref.snapshot_indices
    if len(idx) > 1:
        strides = np.diff(idx)
        if np.any(strides != strides[0]):
            raise ValueError("snapshots must be uniformly strided")
        dt = (ref.times[idx[1]] - ref.times[idx[0]])
    else:
        dt = 1.0
    same_space = coarse.space is ref.space
    P = None if same_space else transfer_matrix(coarse.space, ref.space)
    acc = SpaceTimeErrorAccumulator(ref.space, len(idx), dt)
    for sc, sr in zip(coarse.snapshots, ref.snapshots):
        if same_space:
            acc.add(sc.u - sr.u, sc.v - sr.v, sc.a - sr.a)
        else:
            acc.add(P @ sc.u - sr.u, P @ sc.v - sr.v, P @ sc.a - sr.a)
    return acc.report()


# -- quadrature norms against closed-form fields ------------------------------


def quad_l2_error(space, dofs, exact_q):
    """L2 distance between an FE dof vector and exact values at the
    quadrature points (``exact_q`` has shape (n_elems, n_qp))."""
    uh_q = dofs[space.mesh.elements] @ space.phi.T
    d = uh_q - exact_q
    return math.sqrt(max(float(np.sum(space.detJxW * d * d)), 0.0))


def quad_h1_error(space, dofs, exact_grad_q):
    """H1-seminorm distance; ``exact_grad_q`` has shape (E, Q, dim)."""
    gh = np.einsum("el,eqlc->eqc", dofs[space.mesh.elements],
                   space.grad_phys)
    d = gh - exact_grad_q
    return math.sqrt(max(float(np.sum(space.detJxW * np.sum(d * d, axis=-1))),
                         0.0))


class ExactErrorAccumulator:
    """Streaming norms of (FE trajectory - closed-form solution).

    ``exact(t)`` must return quadrature-point arrays ``(u, gu, v, gv, a)``
    with shapes (E,Q), (E,Q,dim), (E,Q), (E,Q,dim), (E,Q).
    """

    def __init__(self, space, exact, n_snapshots, dt):
        self.space = space
        self.exact = exact
        self.n = int(n_snapshots)
        self.dt = float(dt)
        self._count = 0
        self._max = np.zeros(4)
        self._a_sq_sum = 0.0

    def add(self, state):
        u_q, gu_q, v_q, gv_q, a_q = self.exact(state.t)
        vals = (quad_l2_error(self.space, state.u, u_q),
                quad_h1_error(self.space, state.u, gu_q),
                quad_l2_error(self.space, state.v, v_q),
                quad_h1_error(self.space, state.v, gv_q))
        np.maximum(self._max, np.square(vals), out=self._max)
        w = 0.5 if self._count in (0, self.n - 1) else 1.0
        self._a_sq_sum += w * self.dt * \
            quad_l2_error(self.space, state.a, a_q) ** 2
        self._count += 1

    def report(self):
        if self._count != self.n:
            raise ValueError(f"expected {self.n} snapshots, got {self._count}")
        m = np.sqrt(self._max)
        return NormReport(m[0], m[1], m[2], m[3], math.sqrt(self._a_sq_sum))


# -- order tables --------------------------------------------------------------


@dataclass
class OrderTable:
    """Errors and observed orders per refinement level."""

    levels: list
    errors: dict          # norm key -> array of errors per level
    orders: dict          # norm key -> array (NaN where undefined)

    @classmethod
    def from_reports(cls, levels, reports):
        errors = {k: np.array([getattr(r, k) for r in reports])
                  for k in NORM_KEYS}
        orders = {}
        for k, e in errors.items():
            o = np.full(len(levels), np.nan)
            for i in range(1, len(levels)):
                if e[i - 1] > 0.0 and e[i] > 0.0:
                    o[i] = order(e[i - 1], e[i])
            orders[k] = o
        return cls(list(levels), errors, orders)


# -- nonlinear power-law fit ---------------------------------------------------


def _power_model(h, params):
    alpha, beta, gamma = params
    with np.errstate(over="ignore"):
        return alpha + beta * np.exp(gamma * np.log(h))


def fit_power(h, q, start=(1.0, 1.0, 2.0), tol=1e-10, max_iter=200):
    """Fit q ~ alpha + beta * h**gamma by damped Gauss-Newton.

    The model is linear in (alpha, beta), so those two components of the
    start are first replaced by their exact least-squares values at the
    starting gamma (a Gauss-Newton step restricted to the linear
    subspace); without this projection the iteration stalls in the flat
    region around beta ~ 1.  Levenberg damping multiplies by 10 whenever
    a step increases the residual; convergence is a relative parameter
    update below ``tol``.  Returns ``(alpha, beta, gamma,
    residual_norm)``.
    """
    h = np.asarray(h, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if h.size < 3 or h.size != q.size:
        raise ValueError("need at least three (h, q) pairs")
    if np.any(h <= 0.0):
        raise ValueError("mesh sizes must be positive")
    params = np.array(start, dtype=np.float64)
    log_h = np.log(h)
    design = np.column_stack([np.ones_like(h),
                              np.exp(params[2] * log_h)])
    params[:2], *_ = np.linalg.lstsq(design, q, rcond=None)
    lam = 1e-3
    resid = _power_model(h, params) - q
    cost = float(resid @ resid)
    for _ in range(max_iter):
        hg = np.exp(params[2] * log_h)
        jac = np.column_stack([np.ones_like(h), hg, params[1] * hg * log_h])
        g = jac.T @ resid
        jtj = jac.T @ jac
        scale = np.diag(np.maximum(np.diag(jtj), 1e-30))
        step = None
        for _ in range(60):
            try:
                step = np.linalg.solve(jtj + lam * scale, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = params + step
            trial_resid = _power_model(h, trial) - q
            trial_cost = float(trial_resid @ trial_resid)
            if np.isfinite(trial_cost) and trial_cost <= cost + 1e-30:
                break
            lam *= 10.0
            step = None
        if step is None:
            raise FitFailureError(
                "damping retries exhausted without residual decrease",
                math.sqrt(cost))
        params = params + step
        resid = trial_resid
        cost = trial_cost
        lam = max(lam / 10.0, 1e-12)
        if np.linalg.norm(step) <= tol * max(np.linalg.norm(params), 1e-30):
            break
    return float(params[0]), float(params[1]), float(params[2]), \
        math.sqrt(cost)
