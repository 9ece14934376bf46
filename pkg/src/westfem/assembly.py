"""Galerkin assembly of the semi-discrete wave operators.

All volume operators (stiffness, weighted mass) and boundary operators
(boundary mass, trace loads) are assembled on the one sparsity pattern
precomputed by the space, so time steppers can combine them by value
arithmetic alone.  Scaling conventions: the stiffness matrix carries no
c^2 factor and the boundary mass carries no 1/c factor; use sites apply
the physics.

Coefficient fields may be scalars, callables evaluated directly at the
quadrature points (``w(x)`` in 1D, ``w(x, y)`` in 2D), or FE functions
whose piecewise-linear interpolant is sampled at the quadrature points.
Element loops are fully vectorized and the global scatter uses a fixed
summation order, so repeated assemblies are bit-identical.
"""

from __future__ import annotations

import numpy as np

from .linalg import SparseMatrix


def coefficient_at_quadpoints(space, w, qp=None):
    """Evaluate a coefficient field at (volume) quadrature points."""
    if qp is None:
        qp = space.qp_phys
    if hasattr(w, "dofs"):                       # FE function
        if w.space is not space:
            raise ValueError("FE coefficient must live on the same space")
        return w.dofs[space.mesh.elements] @ space.phi.T
    if callable(w):
        vals = np.asarray(w(*(qp[..., d] for d in range(qp.shape[-1]))),
                          dtype=np.float64)
        return np.broadcast_to(vals, qp.shape[:2])
    return np.full(qp.shape[:2], float(w))


def _scatter_matrix(space, local, symmetric=True):
    data = np.bincount(space.scatter.ravel(), weights=local.ravel(),
                       minlength=space.pattern.nnz)
    return space.pattern.with_data(data, symmetric=symmetric)


def stiffness(space):
    """K_ij = integral of grad(phi_i) . grad(phi_j)."""
    local = np.einsum("eq,eqic,eqjc->eij", space.detJxW, space.grad_phys,
                      space.grad_phys)
    return _scatter_matrix(space, local)


def weighted_mass(space, w):
    """M(w)_ij = integral of w phi_i phi_j; SPD whenever w >= w0 > 0."""
    wq = coefficient_at_quadpoints(space, w)
    local = np.einsum("eq,qi,qj->eij", space.detJxW * wq, space.phi,
                      space.phi)
    return _scatter_matrix(space, local)


def mass_values(space, dofs):
    """Pattern values of M(w) for nodal weight values ``dofs`` (hot path)."""
    wq = dofs[space.mesh.elements] @ space.phi.T
    local = np.einsum("eq,qi,qj->eij", space.detJxW * wq, space.phi,
                      space.phi)
    return np.bincount(space.scatter.ravel(), weights=local.ravel(),
                       minlength=space.pattern.nnz)


def boundary_mass(space, tag):
    """B_ij = integral of phi_i phi_j over the facets carrying ``tag``.

    Returns an all-zero matrix (not an error) when no facet has the tag.
    """
    fd = space.facet_data(tag)
    data = np.zeros(space.pattern.nnz)
    if fd.nodes.size:
        local = np.einsum("fq,qi,qj->fij", fd.detJxW, fd.phi, fd.phi)
        np.add.at(data, fd.scatter.ravel(), local.ravel())
    return space.pattern.with_data(data)


def load(space, f):
    """Load vector b_i = integral of f phi_i."""
    fq = coefficient_at_quadpoints(space, f)
    local = np.einsum("eq,qi->ei", space.detJxW * fq, space.phi)
    return np.bincount(space.mesh.elements.ravel(), weights=local.ravel(),
                       minlength=space.n_dofs)


def neumann_load(space, tag, g=1.0):
    """Trace load b_i = g * integral of phi_i over the tagged facets.

    ``g`` is a spatially constant flux amplitude; the weak form's c^2
    weighting is applied by the caller.
    """
    fd = space.facet_data(tag)
    b = np.zeros(space.n_dofs)
    if fd.nodes.size:
        local = np.einsum("fq,qi->fi", fd.detJxW, fd.phi)
        np.add.at(b, fd.nodes.ravel(), local.ravel())
    return float(g) * b


def apply_dirichlet(A, b, dofs):
    """Symmetric elimination of homogeneous Dirichlet constraints.

    Zeroes the constrained rows and columns, puts 1 on their diagonal and
    0 in the right-hand side, preserving symmetry and definiteness.
    Returns a new ``(matrix, vector)`` pair.
    """
    dofs = np.asarray(dofs, dtype=np.int64)
    b = np.asarray(b, dtype=np.float64).copy()
    if dofs.size == 0:
        return A, b
    elim = DirichletEliminator(A, dofs)
    return elim.matrix(A.data), elim.rhs(b)


class DirichletEliminator:
    """Reusable row/column elimination masks for one pattern + dof set."""

    def __init__(self, pattern, dofs):
        self.pattern = pattern
        self.dofs = np.asarray(dofs, dtype=np.int64)
        constrained = np.zeros(pattern.n_rows, dtype=bool)
        constrained[self.dofs] = True
        rows = pattern.expanded_rows()
        self.kill = constrained[rows] | constrained[pattern.indices]
        diag_pos = pattern.diag_positions()[self.dofs]
        if np.any(diag_pos < 0):
            raise ValueError("constrained dof lacks a diagonal entry")
        self.diag_pos = diag_pos

    def matrix(self, data):
        out = np.array(data, dtype=np.float64)
        out[self.kill] = 0.0
        out[self.diag_pos] = 1.0
        return self.pattern.with_data(out)

    def values(self, data):
        """In-place variant for the hot stepping loop."""
        data[self.kill] = 0.0
        data[self.diag_pos] = 1.0
        return data

    def rhs(self, b):
        b[self.dofs] = 0.0
        return b
