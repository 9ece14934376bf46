"""P1/Q1 finite element spaces.

A :class:`FeSpace` wraps a mesh and precomputes everything assembly and
evaluation need: basis values at quadrature points, physical gradients,
Jacobian-weighted quadrature weights, the global sparsity pattern shared
by all assembled operators, and per-tag boundary facet data.  Nodal
values coincide with degrees of freedom (one dof per mesh node).

Quadrature: 3-point Gauss per interval element (exact to degree 5) and
2x2 tensor Gauss on quadrilaterals (exact to bidegree 3), so weighted
mass matrices with piecewise-linear weights are integrated exactly in 1D
and consistently in 2D.  Boundary edges use 2-point Gauss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import assembly
from .linalg import SparseMatrix, pcg, solve_tridiagonal
from .mesh import BoundaryTag


class OutOfDomainError(ValueError):
    """A point to evaluate or transfer lies outside the mesh."""


_REF_TOL = 1e-12   # tolerance in reference coordinates for point location

# Gauss-Legendre rules on [-1, 1]
_G3_PTS = np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
_G3_WTS = np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
_G2_PTS = np.array([-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0)])
_G2_WTS = np.array([1.0, 1.0])


def _p1_basis(xi):
    """P1 segment basis on [-1, 1] at points xi: (Q, 2)."""
    xi = np.asarray(xi)
    return np.column_stack([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0])


def _q1_basis(xi, eta):
    """Q1 basis on [-1, 1]^2, counterclockwise node order: (Q, 4)."""
    return np.column_stack([
        (1.0 - xi) * (1.0 - eta) / 4.0,
        (1.0 + xi) * (1.0 - eta) / 4.0,
        (1.0 + xi) * (1.0 + eta) / 4.0,
        (1.0 - xi) * (1.0 + eta) / 4.0,
    ])


def _q1_grad(xi, eta):
    """Reference gradients of the Q1 basis: (Q, 4, 2)."""
    q = xi.size
    g = np.empty((q, 4, 2))
    g[:, 0, 0] = -(1.0 - eta) / 4.0
    g[:, 1, 0] = (1.0 - eta) / 4.0
    g[:, 2, 0] = (1.0 + eta) / 4.0
    g[:, 3, 0] = -(1.0 + eta) / 4.0
    g[:, 0, 1] = -(1.0 - xi) / 4.0
    g[:, 1, 1] = -(1.0 + xi) / 4.0
    g[:, 2, 1] = (1.0 + xi) / 4.0
    g[:, 3, 1] = (1.0 - xi) / 4.0
    return g


def jacobian_determinants(mesh):
    """Isoparametric Jacobian determinants at all volume quadrature points."""
    if mesh.dim == 1:
        pts = mesh.nodes[mesh.elements, 0]
        h = pts[:, 1] - pts[:, 0]
        return np.repeat(h[:, None] / 2.0, _G3_PTS.size, axis=1)
    xi, eta = np.meshgrid(_G2_PTS, _G2_PTS, indexing="ij")
    gref = _q1_grad(xi.ravel(), eta.ravel())          # (Q, 4, 2)
    corners = mesh.nodes[mesh.elements]               # (E, 4, 2)
    jac = np.einsum("qld,elc->eqcd", gref, corners)   # (E, Q, 2, 2)
    return jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]


@dataclass
class _FacetData:
    nodes: np.ndarray        # (F, k) node indices per facet
    phi: np.ndarray          # (Qf, k) basis on the facet
    detJxW: np.ndarray       # (F, Qf)
    qp_phys: np.ndarray      # (F, Qf, dim)
    scatter: np.ndarray      # (F, k, k) positions in the global pattern
    lengths: np.ndarray      # (F,) facet measures


class FeSpace:
    """Continuous piecewise (bi)linear space over a mesh.

    Attributes of note: ``n_dofs`` (= number of nodes), ``dirichlet_dofs``
    (sorted indices of nodes on Dirichlet-tagged facets), ``phi``
    (basis at quadrature points), ``grad_phys`` (physical gradients),
    ``detJxW`` (quadrature weights times Jacobians), ``qp_phys``
    (physical quadrature point coordinates) and ``pattern`` (the shared
    sparsity pattern of all assembled operators).
    """

    def __init__(self, mesh):
        self.mesh = mesh
        self.n_dofs = mesh.n_nodes
        self.dirichlet_dofs = mesh.tagged_node_set(BoundaryTag.DIRICHLET)
        self.quadrature = "gauss3" if mesh.dim == 1 else "gauss2x2"
        self._build_volume_tables()
        self._build_pattern()
        self._facets = {}
        self._cache = {}

    # -- construction -----------------------------------------------------

    def _build_volume_tables(self):
        mesh = self.mesh
        if mesh.dim == 1:
            xi = _G3_PTS
            self.phi = _p1_basis(xi)                          # (3, 2)
            pts = mesh.nodes[mesh.elements, 0]                # (E, 2)
            h = pts[:, 1] - pts[:, 0]
            if np.any(h <= 0.0):
                raise ValueError("element with non-positive length")
            self.detJxW = np.outer(h / 2.0, _G3_WTS)          # (E, 3)
            self.qp_phys = (pts[:, :1]
                            + np.outer(h, (xi + 1.0) / 2.0))[..., None]
            gref = np.array([-0.5, 0.5])
            self.grad_phys = np.broadcast_to(
                gref[None, None, :, None] * (2.0 / h)[:, None, None, None],
                (mesh.n_elems, xi.size, 2, 1)).copy()
        else:
            xi, eta = np.meshgrid(_G2_PTS, _G2_PTS, indexing="ij")
            xi, eta = xi.ravel(), eta.ravel()
            wq = np.outer(_G2_WTS, _G2_WTS).ravel()
            self.phi = _q1_basis(xi, eta)                     # (4, 4)
            gref = _q1_grad(xi, eta)                          # (Q, 4, 2)
            corners = mesh.nodes[mesh.elements]               # (E, 4, 2)
            jac = np.einsum("qld,elc->eqcd", gref, corners)   # (E, Q, 2, 2)
            det = jac[..., 0, 0] * jac[..., 1, 1] \
                - jac[..., 0, 1] * jac[..., 1, 0]
            if np.any(det <= 0.0):
                raise ValueError("element with non-positive Jacobian")
            inv_t = np.empty_like(jac)                        # J^{-T}
            inv_t[..., 0, 0] = jac[..., 1, 1] / det
            inv_t[..., 0, 1] = -jac[..., 1, 0] / det
            inv_t[..., 1, 0] = -jac[..., 0, 1] / det
            inv_t[..., 1, 1] = jac[..., 0, 0] / det
            self.grad_phys = np.einsum("eqcd,qld->eqlc", inv_t, gref)
            self.detJxW = det * wq[None, :]
            self.qp_phys = np.einsum("ql,elc->eqc", self.phi, corners)

    def _build_pattern(self):
        elems = self.mesh.elements
        n = self.n_dofs
        n_loc = elems.shape[1]
        rows = np.repeat(elems, n_loc, axis=1)                   # (E, L*L)
        cols = np.tile(elems, (1, n_loc))
        codes = rows.astype(np.int64) * n + cols
        unique_codes, inverse = np.unique(codes.ravel(), return_inverse=True)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, unique_codes // n + 1, 1)
        np.cumsum(indptr, out=indptr)
        self.pattern = SparseMatrix(n, n, indptr, unique_codes % n,
                                    np.zeros(unique_codes.size),
                                    symmetric=True)
        self._pattern_codes = unique_codes
        self.scatter = inverse.reshape(self.mesh.n_elems, n_loc, n_loc)

    def facet_data(self, tag):
        """Precomputed facet tables for a boundary tag (cached)."""
        if tag in self._facets:
            return self._facets[tag]
        mesh = self.mesh
        fnodes = mesh.facet_nodes(tag)
        n = self.n_dofs
        if fnodes.size == 0:
            data = _FacetData(fnodes, np.zeros((0, 0)), np.zeros((0, 0)),
                              np.zeros((0, 0, mesh.dim)),
                              np.zeros((0, 0, 0), dtype=np.int64),
                              np.zeros(0))
        elif mesh.dim == 1:
            pts = mesh.nodes[fnodes[:, 0]]                    # (F, 1)
            data = _FacetData(
                fnodes,
                np.ones((1, 1)),
                np.ones((fnodes.shape[0], 1)),
                pts[:, None, :],
                self._lookup(fnodes[:, 0].astype(np.int64) * n
                             + fnodes[:, 0])[:, None, None],
                np.ones(fnodes.shape[0]))
        else:
            ends = mesh.nodes[fnodes]                         # (F, 2, 2)
            lengths = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=1)
            phi = _p1_basis(_G2_PTS)                          # (2, 2)
            detJxW = np.outer(lengths / 2.0, _G2_WTS)
            qp = np.einsum("ql,flc->fqc", phi, ends)
            k = fnodes.shape[1]
            rows = np.repeat(fnodes, k, axis=1)
            cols = np.tile(fnodes, (1, k))
            pos = self._lookup(rows.astype(np.int64) * n + cols)
            data = _FacetData(fnodes, phi, detJxW, qp,
                              pos.reshape(-1, k, k), lengths)
        self._facets[tag] = data
        return data

    def _lookup(self, codes):
        pos = np.searchsorted(self._pattern_codes, codes.ravel())
        if np.any(pos >= self._pattern_codes.size) or \
                np.any(self._pattern_codes[pos] != codes.ravel()):
            raise ValueError("facet entry outside the volume pattern")
        return pos.reshape(codes.shape)

    # -- cached operators ---------------------------------------------------

    def mass(self):
        """Unweighted consistent mass matrix (cached)."""
        if "mass" not in self._cache:
            self._cache["mass"] = assembly.weighted_mass(self, 1.0)
        return self._cache["mass"]

    def stiffness(self):
        """Stiffness matrix without any c^2 scaling (cached)."""
        if "stiffness" not in self._cache:
            self._cache["stiffness"] = assembly.stiffness(self)
        return self._cache["stiffness"]

    def boundary_mass(self, tag):
        """Boundary mass matrix on facets with ``tag`` (cached)."""
        key = ("bmass", tag)
        if key not in self._cache:
            self._cache[key] = assembly.boundary_mass(self, tag)
        return self._cache[key]

    # -- functions ----------------------------------------------------------

    def function(self, dofs=None):
        if dofs is None:
            dofs = np.zeros(self.n_dofs)
        return FeFunction(self, np.asarray(dofs, dtype=np.float64))

    def coords(self):
        """Node coordinate columns (x,) in 1D or (x, y) in 2D."""
        return tuple(self.mesh.nodes[:, d] for d in range(self.mesh.dim))


@dataclass
class FeFunction:
    """Coefficient vector over a finite element space."""

    space: FeSpace
    dofs: np.ndarray

    def __post_init__(self):
        self.dofs = np.asarray(self.dofs, dtype=np.float64)
        if self.dofs.shape != (self.space.n_dofs,):
            raise ValueError("dof vector length does not match the space")

    def copy(self):
        return FeFunction(self.space, self.dofs.copy())

    def __call__(self, *point):
        return evaluate(self, *point)


def nodal_interpolate(space, g, zero_dirichlet=False):
    """Interpolate a callable at the mesh nodes.

    ``g`` takes coordinate arrays (``g(x)`` in 1D, ``g(x, y)`` in 2D).
    With ``zero_dirichlet`` the result is forced into the homogeneous
    Dirichlet subspace.
    """
    vals = np.asarray(g(*space.coords()), dtype=np.float64)
    vals = np.broadcast_to(vals, (space.n_dofs,)).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("interpolated data contains non-finite values")
    if zero_dirichlet:
        vals[space.dirichlet_dofs] = 0.0
    return FeFunction(space, vals)


def ritz_project(space, grad_u, tol=1e-9):
    """Gradient-matching elliptic projection onto the Dirichlet subspace.

    Solves ``(grad R_h u, grad phi) = (grad u, grad phi)`` for all basis
    functions, with homogeneous Dirichlet values pinned; ``grad_u`` is
    the analytic gradient callable (``g(x) -> du/dx`` in 1D,
    ``g(x, y) -> (du/dx, du/dy)`` in 2D).  The default tolerance sits
    just above the double-precision residual floor of the finest 1D
    stiffness systems.
    """
    if space.dirichlet_dofs.size == 0:
        raise ValueError("ritz_project requires a nonempty Dirichlet set")
    qp = space.qp_phys
    if space.mesh.dim == 1:
        gq = np.broadcast_to(np.asarray(grad_u(qp[..., 0]), dtype=np.float64),
                             qp.shape[:2])[..., None]
    else:
        gx, gy = grad_u(qp[..., 0], qp[..., 1])
        gq = np.stack([np.broadcast_to(np.asarray(gx, dtype=np.float64),
                                       qp.shape[:2]),
                       np.broadcast_to(np.asarray(gy, dtype=np.float64),
                                       qp.shape[:2])], axis=-1)
    local = np.einsum("eq,eqc,eqlc->el", space.detJxW, gq, space.grad_phys)
    b = np.bincount(space.mesh.elements.ravel(), weights=local.ravel(),
                    minlength=space.n_dofs)
    K, b = assembly.apply_dirichlet(space.stiffness(), b,
                                    space.dirichlet_dofs)
    # Jacobi-PCG on the pure stiffness system degrades like O(n) in 1D;
    # a direct tridiagonal sweep with iterative refinement provides the
    # start, pcg the residual guarantee.
    x0 = None
    if space.mesh.dim == 1:
        x0 = solve_tridiagonal(K, b)
        norm_b = np.linalg.norm(b)
        for _ in range(3):
            r = b - K @ x0
            if norm_b == 0.0 or np.linalg.norm(r) <= tol * norm_b:
                break
            x0 = x0 + solve_tridiagonal(K, r)
    x, _ = pcg(K, b, tol=tol, x0=x0)
    return FeFunction(space, x)


# -- point evaluation and transfer -------------------------------------------


def _locate_1d(space, x):
    nodes = space.mesh.nodes[:, 0]
    x = np.asarray(x, dtype=np.float64)
    elem = np.clip(np.searchsorted(nodes, x) - 1, 0, space.mesh.n_elems - 1)
    left = nodes[elem]
    h = nodes[elem + 1] - left
    xi = 2.0 * (x - left) / h - 1.0
    if np.any(np.abs(xi) > 1.0 + _REF_TOL * 4.0):
        raise OutOfDomainError("point outside the 1D mesh")
    return elem, np.clip(xi, -1.0, 1.0)


def _locate_2d(space, x, y):
    mesh = space.mesh
    if mesh.grid_shape is None:
        raise OutOfDomainError("point location needs a structured 2D grid")
    npx, npy = mesh.grid_shape
    nx, ny = npx - 1, npy - 1
    xs = mesh.nodes[:npx, 0]
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    i = np.clip(np.searchsorted(xs, x) - 1, 0, nx - 1)
    hx = xs[i + 1] - xs[i]
    xi = 2.0 * (x - xs[i]) / hx - 1.0
    if np.any(np.abs(xi) > 1.0 + _REF_TOL * 4.0):
        raise OutOfDomainError("point outside the grid in x")
    xi = np.clip(xi, -1.0, 1.0)
    t = (xi + 1.0) / 2.0
    yy = mesh.nodes[:, 1].reshape(npy, npx)
    # Edge curves y_j(x) are increasing in j; bisect for the cell row.
    lo = np.zeros_like(i)
    hi = np.full_like(i, ny - 1)
    for _ in range(int(np.ceil(np.log2(max(ny, 2)))) + 1):
        mid = (lo + hi) // 2
        y_top = yy[mid + 1, i] * (1.0 - t) + yy[mid + 1, i + 1] * t
        go_up = y > y_top
        lo = np.where(go_up, np.minimum(mid + 1, ny - 1), lo)
        hi = np.where(go_up, hi, mid)
    j = lo
    yb = yy[j, i] * (1.0 - t) + yy[j, i + 1] * t
    yt = yy[j + 1, i] * (1.0 - t) + yy[j + 1, i + 1] * t
    eta = 2.0 * (y - yb) / (yt - yb) - 1.0
    if np.any(np.abs(eta) > 1.0 + 1e-9):
        raise OutOfDomainError("point outside the grid in y")
    return j * nx + i, xi, np.clip(eta, -1.0, 1.0)


def evaluate(f, *point):
    """Evaluate an FeFunction at one point or at coordinate arrays."""
    space = f.space
    if space.mesh.dim == 1:
        (x,) = point
        scalar = np.isscalar(x)
        elem, xi = _locate_1d(space, np.atleast_1d(x))
        phi = _p1_basis(xi)
        vals = np.sum(phi * f.dofs[space.mesh.elements[elem]], axis=1)
    else:
        x, y = point
        scalar = np.isscalar(x) and np.isscalar(y)
        elem, xi, eta = _locate_2d(space, np.atleast_1d(x), np.atleast_1d(y))
        phi = _q1_basis(xi, eta)
        vals = np.sum(phi * f.dofs[space.mesh.elements[elem]], axis=1)
    return float(vals[0]) if scalar else vals


def transfer_matrix(coarse, fine):
    """Sparse interpolation operator from a coarse space to a fine one."""
    if coarse.mesh.dim != fine.mesh.dim:
        raise ValueError("spaces must share the spatial dimension")
    pts = fine.mesh.nodes
    if coarse.mesh.dim == 1:
        elem, xi = _locate_1d(coarse, pts[:, 0])
        phi = _p1_basis(xi)
    else:
        elem, xi, eta = _locate_2d(coarse, pts[:, 0], pts[:, 1])
        phi = _q1_basis(xi, eta)
    cols = coarse.mesh.elements[elem]
    rows = np.repeat(np.arange(fine.n_dofs), cols.shape[1])
    return SparseMatrix.from_coo(fine.n_dofs, coarse.n_dofs, rows,
                                 cols.ravel(), phi.ravel())


def transfer(f_coarse, fine_space):
    """Interpolate an FeFunction onto a finer space (exact when nested)."""
    P = transfer_matrix(f_coarse.space, fine_space)
    return FeFunction(fine_space, P @ f_coarse.dofs)
