"""Newmark time integration for the acoustic wave solvers.

Two steppers share one effective-system kernel:

* :class:`LinearWaveStepper` integrates the variable-coefficient wave
  equation  alpha u_tt - c^2 Lap(u) - b Lap(u_t) + beta u_t = f  in its
  Galerkin form (one linear solve per step);
* :class:`WesterveltStepper` integrates the quasilinear Westervelt
  equation  (1 - 2k u) u_tt - c^2 Lap(u) - b Lap(u_t) = 2k u_t^2  by a
  per-step fixed-point iteration on the acceleration vector: each sweep
  freezes the coefficient at the current iterate, giving the linear
  problem with alpha = 1 - 2k u and a velocity operator containing
  -2k M(u_t), and stops when the acceleration update is small.

The Newmark update with parameters (beta, gamma) writes the new
displacement/velocity as predictors plus acceleration corrections, so
each sweep solves for the acceleration a^{n+1}:

    [M + gamma dt C + beta dt^2 c^2 K] a = F - c^2 K u* - C v*.

Degeneracy of the 1 - 2k u factor is monitored through the nodal margin
1 - 2k max|u| and surfaced as :class:`DegenerateStateError`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import assembly
from .assembly import DirichletEliminator
from .linalg import pcg
from .mesh import BoundaryTag


class DegenerateStateError(RuntimeError):
    """The factor 1 - 2k u lost its positivity margin."""


class FixedPointDivergenceError(RuntimeError):
    """The per-step fixed-point iteration exceeded its iteration budget."""


@dataclass(frozen=True)
class MaterialParams:
    """Acoustic medium: sound speed c [m/s], density rho [kg/m^3],
    sound diffusivity b [m^2/s], nonlinearity coefficient beta_a [-]."""

    c: float
    rho: float
    b: float
    beta_a: float

    def __post_init__(self):
        if self.c <= 0.0 or self.rho <= 0.0:
            raise ValueError("c and rho must be positive")
        if self.b < 0.0:
            raise ValueError("b must be nonnegative")

    @property
    def k(self):
        """Nonlinearity parameter k = beta_a / (rho c^2) [1/Pa]."""
        return self.beta_a / (self.rho * self.c ** 2)


WATER = MaterialParams(c=1500.0, rho=1000.0, b=6e-9, beta_a=3.5)


@dataclass(frozen=True)
class NewmarkParams:
    beta: float = 0.45
    gamma: float = 0.75

    def __post_init__(self):
        if not (self.gamma >= 0.5 and self.beta >= 0.5 * self.gamma):
            warnings.warn("Newmark parameters outside the unconditional "
                          "stability region (gamma >= 1/2, beta >= gamma/2)",
                          stacklevel=3)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_points`` times on [0, T]."""

    T: float
    n_points: int

    def __post_init__(self):
        if self.T <= 0.0:
            raise ValueError("final time must be positive")
        if self.n_points < 2:
            raise ValueError("need at least two time grid points")

    @property
    def dt(self):
        return self.T / (self.n_points - 1)

    def times(self):
        return np.linspace(0.0, self.T, self.n_points)


@dataclass
class WaveState:
    """Displacement/velocity/acceleration dof vectors at one time level."""

    t: float
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-8
    max_iter: int = 50
    floor: float = 1.0       # absolute floor [Pa/s^2] in the stop test

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("fixed-point tolerance must be positive")


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int | None = None


def nondegeneracy_check(u, k):
    """Margin 1 - 2 k max|u|; positive margins keep 1 - 2ku coercive."""
    if k < 0.0:
        raise ValueError("k must be nonnegative")
    u = np.asarray(u)
    peak = float(np.max(np.abs(u))) if u.size else 0.0
    return 1.0 - 2.0 * k * peak


def newmark_predict(state, dt, p):
    """Newmark predictors (u*, v*); correctors add beta dt^2 a / gamma dt a."""
    u_star = state.u + dt * state.v + dt * dt * (0.5 - p.beta) * state.a
    v_star = state.v + dt * (1.0 - p.gamma) * state.a
    return u_star, v_star


def _zeroed(space, f):
    """Dof vector of ``f`` with Dirichlet entries cleared."""
    dofs = np.array(f.dofs if hasattr(f, "dofs") else f, dtype=np.float64)
    if dofs.shape != (space.n_dofs,):
        raise ValueError("initial data length does not match the space")
    dofs[space.dirichlet_dofs] = 0.0
    return dofs


class _NewmarkCore:
    """State shared by both steppers: operators, elimination, solver."""

    def __init__(self, space, material, newmark, solver):
        self.space = space
        self.material = material
        self.newmark = newmark
        self.solver = solver
        self.K = space.stiffness()
        self.pattern = space.pattern
        self.eliminator = (DirichletEliminator(self.K, space.dirichlet_dofs)
                           if space.dirichlet_dofs.size else None)
        has_absorbing = space.mesh.facet_nodes(BoundaryTag.ABSORBING).size > 0
        self.B_data = (space.boundary_mass(BoundaryTag.ABSORBING).data
                       if has_absorbing else None)
        self._phi_outer = np.einsum("qi,qj->qij", space.phi, space.phi) \
            .reshape(space.phi.shape[0], -1)

    def mass_values_q(self, wq):
        """Weighted-mass pattern values from quadrature-point weights."""
        space = self.space
        local = np.tensordot(space.detJxW * wq, self._phi_outer, axes=(1, 0))
        return np.bincount(space.scatter.ravel(), weights=local.ravel(),
                           minlength=self.pattern.nnz)

    def mass_values_fe(self, dofs):
        return self.mass_values_q(dofs[self.space.mesh.elements]
                                  @ self.space.phi.T)

    def solve_acceleration(self, m_data, c_data, rhs, dt, x0):
        p = self.newmark
        c2 = self.material.c ** 2
        a_data = m_data + (p.gamma * dt) * c_data \
            + (p.beta * dt * dt * c2) * self.K.data
        if self.eliminator is not None:
            a_data = self.eliminator.values(a_data)
            rhs = self.eliminator.rhs(rhs)
        A = self.pattern.with_data(a_data)
        x, report = pcg(A, rhs, tol=self.solver.tol,
                        max_iter=self.solver.max_iter, x0=x0)
        return x, report

    def rhs_at(self, c_data, u_star, v_star, force):
        c2 = self.material.c ** 2
        rhs = -c2 * (self.K @ u_star)
        rhs -= self.pattern.with_data(c_data) @ v_star
        if force is not None:
            rhs = rhs + force
        return rhs


class LinearWaveStepper:
    """One Newmark solve per step for the variable-coefficient equation.

    ``alpha``, ``beta_coeff`` and ``source`` may be constants or callables
    of the quadrature coordinates and time (``f(x, t)`` in 1D,
    ``f(x, y, t)`` in 2D); ``source_vector`` is an optional callable
    ``t -> dof vector`` added to the load (used for manufactured
    right-hand sides assembled directly in dof space).
    """

    def __init__(self, space, material, newmark=NewmarkParams(),
                 alpha=1.0, beta_coeff=0.0, source=None, source_vector=None,
                 alpha_floor=0.0, solver=SolverConfig()):
        self.core = _NewmarkCore(space, material, newmark, solver)
        self.space = space
        self.material = material
        self.alpha = alpha
        self.beta_coeff = beta_coeff
        self.source = source
        self.source_vector = source_vector
        self.alpha_floor = alpha_floor
        mass_data = space.mass().data
        if not callable(alpha):
            if float(alpha) <= alpha_floor:
                raise DegenerateStateError("constant alpha must be positive")
            self._m_alpha_const = float(alpha) * mass_data
        else:
            self._m_alpha_const = None
        if not callable(beta_coeff):
            self._m_beta_const = (float(beta_coeff) * mass_data
                                  if float(beta_coeff) != 0.0 else 0.0)
        else:
            self._m_beta_const = None
        if source is not None and not callable(source):
            self._const_load = (float(source) * assembly.load(space, 1.0)
                                if float(source) != 0.0 else None)
        else:
            self._const_load = None

    def _coeff_q(self, w, t):
        space = self.space
        coords = tuple(space.qp_phys[..., d]
                       for d in range(space.mesh.dim))
        vals = np.asarray(w(*coords, t), dtype=np.float64)
        return np.broadcast_to(vals, space.qp_phys.shape[:2])

    def _alpha_values(self, t):
        if self._m_alpha_const is not None:
            return self._m_alpha_const
        aq = self._coeff_q(self.alpha, t)
        if np.min(aq) <= self.alpha_floor:
            raise DegenerateStateError(
                f"alpha dropped to {np.min(aq):.3e} at t={t:.6e}")
        return self.core.mass_values_q(aq)

    def _damping_values(self, t):
        c_data = self.material.b * self.core.K.data
        if self.core.B_data is not None:
            c_data = c_data + self.material.c * self.core.B_data
        if self._m_beta_const is None:
            c_data = c_data + self.core.mass_values_q(
                self._coeff_q(self.beta_coeff, t))
        elif np.ndim(self._m_beta_const) > 0:
            c_data = c_data + self._m_beta_const
        return c_data

    def _force(self, t):
        f = None
        if callable(self.source):
            fq = self._coeff_q(self.source, t)
            local = np.einsum("eq,qi->ei", self.space.detJxW * fq,
                              self.space.phi)
            f = np.bincount(self.space.mesh.elements.ravel(),
                            weights=local.ravel(),
                            minlength=self.space.n_dofs)
        elif self._const_load is not None:
            f = self._const_load
        if self.source_vector is not None:
            fv = self.source_vector(t)
            f = fv if f is None else f + fv
        return f

    def initial_state(self, u0, v0):
        """Consistent initial acceleration from the PDE at t = 0."""
        space = self.space
        u = _zeroed(space, u0)
        v = _zeroed(space, v0)
        m_data = self._alpha_values(0.0)
        c_data = self._damping_values(0.0)
        rhs = self.core.rhs_at(c_data, u, v, self._force(0.0))
        if self.core.eliminator is not None:
            m_sys = self.core.eliminator.matrix(m_data)
            rhs = self.core.eliminator.rhs(rhs)
        else:
            m_sys = self.core.pattern.with_data(m_data)
        a, _ = pcg(m_sys, rhs, tol=self.core.solver.tol,
                   max_iter=self.core.solver.max_iter)
        return WaveState(0.0, u, v, a)

    def step(self, state, t_next):
        """Advance to ``t_next`` with exactly one linear solve."""
        p = self.core.newmark
        dt = t_next - state.t
        u_star, v_star = newmark_predict(state, dt, p)
        m_data = self._alpha_values(t_next)
        c_data = self._damping_values(t_next)
        rhs = self.core.rhs_at(c_data, u_star, v_star,
                               self._force(t_next))
        a, _ = self.core.solve_acceleration(m_data, c_data, rhs, dt,
                                            x0=state.a)
        u = u_star + p.beta * dt * dt * a
        v = v_star + p.gamma * dt * a
        return WaveState(t_next, u, v, a), 1


class WesterveltStepper:
    """Fixed-point Newmark stepper for the semi-discrete Westervelt equation.

    ``neumann_g`` is an optional callable ``t -> flux amplitude`` on the
    NEUMANN_SOURCE boundary; absorbing boundary facets contribute the
    damping operator c B automatically.  With ``explicit_rhs`` the
    quadratic term is kept on the right-hand side as 2k (v^i)^2 instead
    of being folded into the velocity operator.
    """

    def __init__(self, space, material, newmark=NewmarkParams(),
                 fixed_point=FixedPointConfig(), neumann_g=None,
                 margin_min=0.05, explicit_rhs=False, solver=SolverConfig()):
        self.core = _NewmarkCore(space, material, newmark, solver)
        self.space = space
        self.material = material
        self.fixed_point = fixed_point
        self.margin_min = float(margin_min)
        self.explicit_rhs = bool(explicit_rhs)
        self.neumann_g = neumann_g
        self._mass_data = space.mass().data
        has_source = space.mesh.facet_nodes(BoundaryTag.NEUMANN_SOURCE).size
        self._trace_load = (assembly.neumann_load(
            space, BoundaryTag.NEUMANN_SOURCE) if has_source else None)

    def _force(self, t):
        if self.neumann_g is None or self._trace_load is None:
            return None
        # Weak Neumann term c^2 g(t) (phi, 1)_Gamma; the b g'(t) term is
        # dropped (b/c^2 ~ 1e-15 s makes it irrelevant at kHz frequencies).
        return (self.material.c ** 2) * float(self.neumann_g(t)) \
            * self._trace_load

    def _check_margin(self, u, t):
        margin = nondegeneracy_check(u, self.material.k)
        if margin <= self.margin_min:
            raise DegenerateStateError(
                f"non-degeneracy margin {margin:.4f} <= {self.margin_min} "
                f"at t={t:.6e}")
        return margin

    def _operators(self, u, v):
        """(M(1-2ku) values, velocity-operator values, rhs extra) at an
        iterate."""
        k = self.material.k
        m_data = self._mass_data
        c_data = self.material.b * self.core.K.data
        if self.core.B_data is not None:
            c_data = c_data + self.material.c * self.core.B_data
        extra = None
        if k != 0.0:
            m_data = m_data - (2.0 * k) * self.core.mass_values_fe(u)
            mv = self.core.mass_values_fe(v)
            if self.explicit_rhs:
                extra = (2.0 * k) * (self.core.pattern.with_data(mv) @ v)
            else:
                c_data = c_data - (2.0 * k) * mv
        return m_data, c_data, extra

    def initial_state(self, u0, v0):
        """Solve M(1 - 2k u0) a0 = 2k N(v0) + F(0) - c^2 K u0 - C v0."""
        space = self.space
        u = _zeroed(space, u0)
        v = _zeroed(space, v0)
        self._check_margin(u, 0.0)
        k = self.material.k
        m_data = self._mass_data
        c_data = self.material.b * self.core.K.data
        if self.core.B_data is not None:
            c_data = c_data + self.material.c * self.core.B_data
        force = self._force(0.0)
        if k != 0.0:
            m_data = m_data - (2.0 * k) * self.core.mass_values_fe(u)
            quad = (2.0 * k) * (self.core.pattern.with_data(
                self.core.mass_values_fe(v)) @ v)
            force = quad if force is None else force + quad
        rhs = self.core.rhs_at(c_data, u, v, force)
        if self.core.eliminator is not None:
            m_sys = self.core.eliminator.matrix(m_data)
            rhs = self.core.eliminator.rhs(rhs)
        else:
            m_sys = self.core.pattern.with_data(m_data)
        a, _ = pcg(m_sys, rhs, tol=self.core.solver.tol,
                   max_iter=self.core.solver.max_iter)
        return WaveState(0.0, u, v, a)

    def step(self, state, t_next):
        """Advance one step; returns ``(state, n_solves)``."""
        p = self.core.newmark
        fp = self.fixed_point
        dt = t_next - state.t
        u_star, v_star = newmark_predict(state, dt, p)
        force = self._force(t_next)
        a = state.a
        for sweep in range(1, fp.max_iter + 1):
            u_i = u_star + p.beta * dt * dt * a
            v_i = v_star + p.gamma * dt * a
            self._check_margin(u_i, t_next)
            m_data, c_data, extra = self._operators(u_i, v_i)
            f_total = force if extra is None else \
                (extra if force is None else force + extra)
            rhs = self.core.rhs_at(c_data, u_star, v_star, f_total)
            a_next, _ = self.core.solve_acceleration(m_data, c_data, rhs,
                                                     dt, x0=a)
            change = float(np.linalg.norm(a_next - a))
            a = a_next
            if change <= fp.tol * max(float(np.linalg.norm(a)), fp.floor):
                break
        else:
            raise FixedPointDivergenceError(
                f"fixed-point iteration did not converge within "
                f"{fp.max_iter} sweeps at t={t_next:.6e}")
        u = u_star + p.beta * dt * dt * a
        v = v_star + p.gamma * dt * a
        return WaveState(t_next, u, v, a), sweep


def initial_acceleration(stepper, u0, v0):
    """Consistent acceleration at t = 0 for either stepper."""
    return stepper.initial_state(u0, v0).a


@dataclass
class Trajectory:
    """Run record: per-step summaries plus strided state snapshots."""

    space: object
    times: np.ndarray
    snapshot_stride: int
    snapshot_indices: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    fp_iters: np.ndarray = None
    max_abs_u: np.ndarray = None
    margin: np.ndarray = None
    l2_u: np.ndarray = None

    @property
    def n_points(self):
        return self.times.size


def march(stepper, grid, state0):
    """Generate ``(index, state, fp_iters)`` along the time grid."""
    times = grid.times()
    state = state0
    yield 0, state, 0
    for n in range(1, grid.n_points):
        try:
            state, iters = stepper.step(state, times[n])
        except Exception as exc:
            exc.step_index = n
            raise
        yield n, state, iters


class RunRecorder:
    """Collects the per-step summary and strided snapshots of one run."""

    def __init__(self, stepper, grid, stride=1):
        self.space = stepper.space
        self._k = (stepper.material.k
                   if isinstance(stepper, WesterveltStepper) else 0.0)
        self._mass = stepper.space.mass()
        self.traj = Trajectory(stepper.space, grid.times(), stride,
                               fp_iters=np.zeros(grid.n_points, dtype=int),
                               max_abs_u=np.zeros(grid.n_points),
                               margin=np.zeros(grid.n_points),
                               l2_u=np.zeros(grid.n_points))
        self._stride = max(int(stride), 1)
        self._last = grid.n_points - 1

    def record(self, n, state, iters):
        t = self.traj
        t.fp_iters[n] = iters
        t.max_abs_u[n] = float(np.max(np.abs(state.u))) if state.u.size else 0.0
        t.margin[n] = 1.0 - 2.0 * self._k * t.max_abs_u[n]
        t.l2_u[n] = float(np.sqrt(max(state.u @ (self._mass @ state.u), 0.0)))
        if n % self._stride == 0 or n == self._last:
            t.snapshot_indices.append(n)
            t.snapshots.append(state)


def run(stepper, grid, u0, v0, stride=1):
    """March a configured stepper over a grid and record a Trajectory."""
    state0 = stepper.initial_state(u0, v0)
    rec = RunRecorder(stepper, grid, stride)
    for n, state, iters in march(stepper, grid, state0):
        rec.record(n, state, iters)
    return rec.traj
