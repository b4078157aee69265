"""The reduced Jacobian J = Axx - Axy Ayy^{-1} Ayx behind an augmented system."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class ReducedJacobian:
    """Acts on the stacked node unknowns only; auxiliaries are eliminated."""

    def __init__(self, A: sp.spmatrix, nx: int):
        self.A = sp.csc_matrix(A)
        self.nx = nx
        self.shape = (nx, nx)
        self._lu = None
        self._lu_yy = None

    @property
    def lu(self):
        if self._lu is None:
            self._lu = spla.splu(self.A)
        return self._lu

    def _blocks(self):
        nx = self.nx
        A = self.A.tocsr()
        return A[:nx, :nx], A[:nx, nx:], A[nx:, :nx], A[nx:, nx:]

    def matvec(self, x):
        Axx, Axy, Ayx, Ayy = self._blocks()
        if Ayy.shape[0] == 0:
            return Axx @ x
        if self._lu_yy is None:
            self._lu_yy = spla.splu(sp.csc_matrix(Ayy))
        y = -self._lu_yy.solve(np.asarray(Ayx @ x))
        return Axx @ x + Axy @ y

    def solve(self, b):
        rhs = np.zeros(self.A.shape[0] if b.ndim == 1 else (self.A.shape[0], b.shape[1]))
        rhs[: self.nx] = b
        return self.lu.solve(rhs)[: self.nx]

    def solve_transpose(self, c):
        rhs = np.zeros(self.A.shape[0])
        rhs[: self.nx] = c
        return self.lu.solve(rhs, trans="T")[: self.nx]

    def to_dense(self, block: int = 512) -> np.ndarray:
        out = np.empty((self.nx, self.nx))
        for start in range(0, self.nx, block):
            stop = min(start + block, self.nx)
            cols = np.zeros((self.nx, stop - start))
            cols[np.arange(start, stop), np.arange(stop - start)] = 1.0
            out[:, start:stop] = self.matvec(cols)
        return out

    def sigma_min(self, row_weights=None, col_weights=None, tol: float = 1e-8,
                  seed: int = 0) -> float:
        """Smallest singular value of diag(row_w)**0.5 J diag(col_w)**-0.5.

        With quadrature weights on the unknowns and cell widths on the residual
        rows this is the discrete L2 -> L2 value, which is mesh independent; the
        default (no weights) is the plain Euclidean one.
        """
        dr = np.ones(self.nx) if row_weights is None else np.sqrt(np.asarray(row_weights))
        dc = np.ones(self.nx) if col_weights is None else np.sqrt(np.asarray(col_weights))

        def gram_inverse(v):
            # B^T B with B = Dc J^{-1} Dr^{-1}
            y = dc * self.solve(np.ravel(v) / dr)
            return self.solve_transpose(dc * y) / dr

        op = spla.LinearOperator((self.nx, self.nx), matvec=gram_inverse, dtype=float)
        v0 = np.random.default_rng(seed).standard_normal(self.nx)
        lam = spla.eigsh(op, k=1, which="LA", v0=v0, tol=tol, return_eigenvectors=False)[0]
        return float(1.0 / np.sqrt(lam))
