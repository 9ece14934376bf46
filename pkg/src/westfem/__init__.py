"""Finite element solvers for Westervelt's nonlinear acoustic wave equation.

The package provides interval and curved-quad structured meshes, P1/Q1
spaces, Galerkin assembly, Newmark time stepping with a per-step
fixed-point linearization of the quasilinear term, space-time error
norms, and convergence-study drivers for a 1D channel, a 2D
focused-ultrasound problem and a manufactured-solution verification.
"""

from .mesh import (BoundaryTag, Mesh, channel_mesh, dump_mesh, focus_mesh,
                   interval_mesh, mesh_size, rect_mesh)
from .linalg import (IterativeSolveError, SingularPreconditionerError,
                     SolveReport, SparseMatrix, pcg, spmv)
from .fespace import (FeFunction, FeSpace, OutOfDomainError, evaluate,
                      nodal_interpolate, ritz_project, transfer,
                      transfer_matrix)
from .assembly import (apply_dirichlet, boundary_mass, load, neumann_load,
                       stiffness, weighted_mass)
from .wavesolver import (DegenerateStateError, FixedPointConfig,
                         FixedPointDivergenceError, LinearWaveStepper,
                         MaterialParams, NewmarkParams, SolverConfig,
                         TimeGrid, Trajectory, WATER, WaveState,
                         WesterveltStepper, initial_acceleration, march,
                         newmark_predict, nondegeneracy_check, run)
from .errors import (FitFailureError, NormReport, OrderTable, fit_power,
                     h1_seminorm, l2_norm, order, qoi, trajectory_error)

__version__ = "0.1.0"
