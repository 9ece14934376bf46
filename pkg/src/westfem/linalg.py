"""Sparse symmetric linear algebra kernels.

Compressed-row matrices backed by plain numpy arrays, a matrix-vector
product, and a Jacobi-preconditioned conjugate gradient solver.  This is
all the linear algebra the wave solvers need: the time-stepping systems
are mass-dominated and well conditioned, so diagonal preconditioning is
enough and no factorization is required.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class IterativeSolveError(RuntimeError):
    """PCG failed to reach the requested tolerance within max_iter."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class SingularPreconditionerError(RuntimeError):
    """The Jacobi preconditioner hit a zero diagonal entry."""


@dataclass(frozen=True)
class SolveReport:
    """Iteration count and final relative residual of an iterative solve."""

    iterations: int
    relative_residual: float


class SparseMatrix:
    """Sparse matrix in compressed-row layout.

    ``indptr`` has length ``n_rows + 1``; row ``i`` occupies
    ``indices[indptr[i]:indptr[i+1]]`` / ``data[indptr[i]:indptr[i+1]]``
    with strictly increasing column indices.  Instances are treated as
    immutable after construction; :meth:`with_data` produces a sibling
    matrix sharing the sparsity pattern (and cached diagonal positions).
    """

    __slots__ = ("n_rows", "n_cols", "indptr", "indices", "data",
                 "symmetric", "_diag_pos")

    def __init__(self, n_rows, n_cols, indptr, indices, data, symmetric=False):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.asarray(data, dtype=np.float64)
        self.symmetric = bool(symmetric)
        self._diag_pos = None
        if self.indptr.shape != (self.n_rows + 1,):
            raise ValueError("indptr length must be n_rows + 1")
        if self.indices.shape != self.data.shape:
            raise ValueError("indices and data must have equal length")

    @property
    def nnz(self):
        return self.indices.size

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, values, symmetric=False):
        """Build a CSR matrix from COO triplets, summing duplicates."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
            raise ValueError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= n_cols):
            raise ValueError("column index out of range")
        codes = rows * np.int64(n_cols) + cols
        unique_codes, inverse = np.unique(codes, return_inverse=True)
        data = np.bincount(inverse, weights=values, minlength=unique_codes.size)
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(indptr, unique_codes // n_cols + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(n_rows, n_cols, indptr, unique_codes % n_cols, data,
                   symmetric=symmetric)

    @classmethod
    def identity(cls, n):
        return cls.diagonal_matrix(np.ones(n))

    @classmethod
    def diagonal_matrix(cls, diag):
        diag = np.asarray(diag, dtype=np.float64)
        n = diag.size
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1, dtype=np.int64), idx, diag.copy(),
                   symmetric=True)

    def with_data(self, data, symmetric=None):
        """Sibling matrix on the shared pattern with new values."""
        data = np.asarray(data, dtype=np.float64)
        if data.shape != self.data.shape:
            raise ValueError("data length does not match pattern")
        sym = self.symmetric if symmetric is None else symmetric
        other = SparseMatrix(self.n_rows, self.n_cols, self.indptr,
                             self.indices, data, symmetric=sym)
        other._diag_pos = self._diag_pos
        return other

    def expanded_rows(self):
        """Row index of every stored entry (COO expansion of indptr)."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64),
                         np.diff(self.indptr))

    def diag_positions(self):
        """Flat positions of diagonal entries; -1 where a row lacks one."""
        if self._diag_pos is None:
            rows = self.expanded_rows()
            on_diag = self.indices == rows
            pos = np.full(self.n_rows, -1, dtype=np.int64)
            pos[rows[on_diag]] = np.flatnonzero(on_diag)
            self._diag_pos = pos
        return self._diag_pos

    def diagonal(self):
        pos = self.diag_positions()
        m = min(self.n_rows, self.n_cols)
        diag = np.zeros(m)
        found = pos[:m] >= 0
        diag[found] = self.data[pos[:m][found]]
        return diag

    def matvec(self, x):
        return spmv(self, x)

    def __matmul__(self, x):
        return spmv(self, x)

    def toarray(self):
        dense = np.zeros((self.n_rows, self.n_cols))
        dense[self.expanded_rows(), self.indices] = self.data
        return dense

    def transpose(self):
        return SparseMatrix.from_coo(self.n_cols, self.n_rows, self.indices,
                                     self.expanded_rows(), self.data,
                                     symmetric=self.symmetric)

    def symmetry_defect(self):
        """Max entrywise |A_ij - A_ji| scaled by max(1, |A_ij|)."""
        t = self.transpose()
        if not np.array_equal(t.indptr, self.indptr) or \
                not np.array_equal(t.indices, self.indices):
            return np.inf
        if self.nnz == 0:
            return 0.0
        scale = np.maximum(1.0, np.abs(self.data))
        return float(np.max(np.abs(self.data - t.data) / scale))


def spmv(A, x):
    """Sparse matrix-vector product y = A @ x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n_cols,):
        raise ValueError(f"dimension mismatch: matrix is {A.n_rows}x{A.n_cols}, "
                         f"vector has shape {x.shape}")
    if A.n_rows == 0:
        return np.zeros(0)
    prod = A.data * x[A.indices]
    y = np.add.reduceat(prod, np.minimum(A.indptr[:-1], A.nnz - 1)) \
        if A.nnz else np.zeros(A.n_rows)
    # reduceat repeats the previous segment for empty rows; clear them.
    empty = np.diff(A.indptr) == 0
    if empty.any():
        y[empty] = 0.0
    return y


def solve_tridiagonal(A, b):
    """Direct Thomas sweep for a strictly tridiagonal CSR matrix.

    Used to warm-start pcg on 1D stiffness systems, whose Jacobi-PCG
    convergence degrades like O(n) on fine meshes.
    """
    n = A.n_rows
    b = np.asarray(b, dtype=np.float64)
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    rows = A.expanded_rows()
    offset = A.indices - rows
    if np.any(np.abs(offset) > 1):
        raise ValueError("matrix is not tridiagonal")
    lower[rows[offset == -1]] = A.data[offset == -1]
    diag[rows[offset == 0]] = A.data[offset == 0]
    upper[rows[offset == 1]] = A.data[offset == 1]
    c = np.zeros(n)
    d = np.zeros(n)
    c[0] = upper[0] / diag[0]
    d[0] = b[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / denom
        d[i] = (b[i] - lower[i] * d[i - 1]) / denom
    x = np.zeros(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def pcg(A, b, tol=1e-10, max_iter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients for SPD systems.

    Solves A x = b to a relative residual ``|b - A x|_2 <= tol * |b|_2``
    and returns ``(x, SolveReport)``.  Raises

    * :class:`SingularPreconditionerError` when the diagonal has a zero,
    * :class:`IterativeSolveError` (carrying the report) on non-convergence.
    """
    b = np.asarray(b, dtype=np.float64)
    if A.n_rows != A.n_cols:
        raise ValueError("pcg requires a square matrix")
    if b.shape != (A.n_rows,):
        raise ValueError("right-hand side length does not match matrix")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    n = A.n_rows
    if max_iter is None:
        max_iter = 10 * n

    diag = A.diagonal()
    if np.any(diag == 0.0):
        raise SingularPreconditionerError(
            "zero diagonal entry; Jacobi preconditioner undefined")
    inv_diag = 1.0 / diag

    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return np.zeros(n), SolveReport(0, 0.0)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - spmv(A, x)
    p = None
    rz_old = 0.0
    iterations = 0
    while True:
        rel = float(np.linalg.norm(r)) / norm_b
        if rel <= tol:
            # Guard against recurrence drift: confirm with the true residual.
            r = b - spmv(A, x)
            rel = float(np.linalg.norm(r)) / norm_b
            if rel <= tol:
                return x, SolveReport(iterations, rel)
        if iterations >= max_iter:
            raise IterativeSolveError(
                f"pcg did not converge in {iterations} iterations "
                f"(relative residual {rel:.3e}, tol {tol:.3e})",
                SolveReport(iterations, rel))
        z = inv_diag * r
        rz = float(r @ z)
        p = z if p is None else z + (rz / rz_old) * p
        Ap = spmv(A, p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise IterativeSolveError(
                "pcg breakdown: matrix is not positive definite",
                SolveReport(iterations, rel))
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rz_old = rz
        iterations += 1
