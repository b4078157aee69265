"""Arrays carrying sparse Jacobians, for assembling Newton systems.

A :class:`Tangent` holds values and, when tracking, the sparse matrix of
their derivatives with respect to the unknowns of a :class:`Tape`.  Derivative
rules are the elementary ones (product, quotient, chain rule through sqrt and
exp, linear maps).  Cumulative sums would make the Jacobian dense, so each one
introduces auxiliary unknowns y with the bidiagonal defining equation

    y_k - y_{k-1} - b_k = 0,

and the augmented system stays sparse.  At a point where the auxiliary
equations hold exactly (always true after evaluation) the x-block of the
augmented Newton step equals the Newton step of the reduced system.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class Tape:
    def __init__(self, x: np.ndarray, track: bool = True, capacity: int | None = None):
        self.nx = len(x)
        self.track = track
        self.ncols = self.nx
        self.capacity = capacity or 64 * self.nx
        self.aux_rows: list[sp.csr_matrix] = []
        self.aux_values: list[np.ndarray] = []

    def variables(self, x: np.ndarray, sizes) -> list[Tangent]:
        """Split the unknown vector into tracked blocks."""
        out, start = [], 0
        for size in sizes:
            jac = None
            if self.track:
                jac = sp.csr_matrix(
                    (np.ones(size), (np.arange(size), np.arange(start, start + size))),
                    shape=(size, self.capacity),
                )
            out.append(Tangent(x[start:start + size].copy(), jac, self))
            start += size
        return out

    def constant(self, values) -> Tangent:
        return Tangent(np.asarray(values, dtype=float), None, self)

    def cumsum(self, b: Tangent, reverse: bool = False) -> Tangent:
        """Inclusive cumulative sum y_k = sum_{i<=k} b_i (or i>=k if reverse)."""
        values = np.cumsum(b.values[::-1])[::-1] if reverse else np.cumsum(b.values)
        if not self.track or b.jac is None:
            return Tangent(values, None, self)
        m = len(values)
        start = self.ncols
        if start + m > self.capacity:
            raise RuntimeError("tape capacity exhausted; raise Tape.capacity")
        self.ncols += m
        off = 1 if reverse else -1
        bidiag = sp.diags([np.ones(m), -np.ones(m - 1)], [0, off], shape=(m, m), format="csr")
        block = sp.csr_matrix((bidiag.data, bidiag.indices + start, bidiag.indptr),
                              shape=(m, self.capacity))
        self.aux_rows.append(block - b.jac)
        self.aux_values.append(values)
        jac = sp.csr_matrix((np.ones(m), (np.arange(m), np.arange(start, start + m))),
                            shape=(m, self.capacity))
        return Tangent(values, jac, self)

    def augmented(self, rows: list[Tangent]) -> sp.csc_matrix:
        """Square augmented Jacobian: residual rows, then auxiliary equations."""
        blocks = [t.jac if t.jac is not None else sp.csr_matrix((len(t.values), self.capacity))
                  for t in rows]
        A = sp.vstack(blocks + self.aux_rows, format="csr")[:, : self.ncols]
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"augmented system is not square: {A.shape}")
        return A.tocsc()


def _jac_scale(jac, s):
    if jac is None:
        return None
    if np.ndim(s) == 0:
        return jac * float(s)
    return sp.diags(s) @ jac


def _jac_add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


class Tangent:
    __array_ufunc__ = None

    def __init__(self, values, jac, tape):
        self.values = values
        self.jac = jac
        self.tape = tape

    def __len__(self):
        return len(self.values)

    def _wrap(self, other):
        if isinstance(other, Tangent):
            return other
        return Tangent(np.asarray(other, dtype=float), None, self.tape)

    def __add__(self, other):
        o = self._wrap(other)
        return Tangent(self.values + o.values, _jac_add(self.jac, o.jac), self.tape)

    __radd__ = __add__

    def __neg__(self):
        return Tangent(-self.values, _jac_scale(self.jac, -1.0), self.tape)

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) + (-self)

    def __mul__(self, other):
        o = self._wrap(other)
        jac = _jac_add(_jac_scale(self.jac, o.values), _jac_scale(o.jac, self.values))
        return Tangent(self.values * o.values, jac, self.tape)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._wrap(other)
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        return self._wrap(other) * self.reciprocal()

    def reciprocal(self):
        inv = 1.0 / self.values
        return Tangent(inv, _jac_scale(self.jac, -inv * inv), self.tape)

    def square(self):
        return Tangent(self.values**2, _jac_scale(self.jac, 2.0 * self.values), self.tape)

    def __pow__(self, k):
        if k == 2:
            return self.square()
        return Tangent(self.values**k, _jac_scale(self.jac, k * self.values ** (k - 1)), self.tape)

    def sqrt(self):
        s = np.sqrt(self.values)
        return Tangent(s, _jac_scale(self.jac, 0.5 / s), self.tape)

    def exp(self):
        e = np.exp(self.values)
        return Tangent(e, _jac_scale(self.jac, e), self.tape)

    def apply(self, M: sp.spmatrix) -> Tangent:
        """Linear map by a sparse matrix."""
        return Tangent(M @ self.values, None if self.jac is None else (M @ self.jac).tocsr(), self.tape)

    def __getitem__(self, idx):
        jac = None if self.jac is None else self.jac[idx]
        values = self.values[idx]
        if np.isscalar(values) or np.ndim(values) == 0:
            values = np.atleast_1d(values)
            if jac is not None and jac.ndim == 1:
                jac = sp.csr_matrix(jac)
        return Tangent(values, jac, self.tape)


def concat(parts: list[Tangent]) -> Tangent:
    tape = parts[0].tape
    values = np.concatenate([p.values for p in parts])
    if not tape.track:
        return Tangent(values, None, tape)
    jacs = [p.jac if p.jac is not None else sp.csr_matrix((len(p), tape.capacity)) for p in parts]
    return Tangent(values, sp.vstack(jacs, format="csr"), tape)


# helpers that work for plain arrays and Tangents alike

def cumsum(x, reverse=False):
    if isinstance(x, Tangent):
        return x.tape.cumsum(x, reverse=reverse)
    return np.cumsum(x[::-1])[::-1] if reverse else np.cumsum(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, Tangent) else np.sqrt(x)


def exp(x):
    return x.exp() if isinstance(x, Tangent) else np.exp(x)


def values(x):
    return x.values if isinstance(x, Tangent) else np.asarray(x)
