"""Radial grids on (0, R_max], quadrature and finite differences.

The origin is never a node.  Fields carry an ``origin_power`` p meaning
f ~ c r**p as r -> 0; the first cell [0, r_0] is integrated with that law and
p >= 1 lets the derivative stencil at r_0 use the implied f(0) = 0.

Besides node operations the module exposes the cell ("box") operators used by
the nonlinear solvers: cell widths, cell averages, forward differences, the
arithmetic midpoint (for 1/r terms) and the geometric cell radius
sqrt(r_j r_{j+1}) (for 1/r**2 charge terms, where it keeps r**2 W' = -Q exact).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

GRADINGS = ("uniform", "geometric")
MIN_NODES = 4  # quadrature needs 4; differentiate asks for 16 itself


@dataclass(frozen=True)
class RadialGrid:
    n: int
    R_max: float
    grading: str = "uniform"
    q: float = 1.0
    r: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.r is None:
            object.__setattr__(self, "r", _nodes(self.n, self.R_max, self.grading, self.q))
        self.r.setflags(write=False)

    @cached_property
    def h(self) -> np.ndarray:
        """Cell widths r_{j+1} - r_j (length n - 1)."""
        return np.diff(self.r)

    @cached_property
    def r_mid(self) -> np.ndarray:
        """Arithmetic cell midpoint, used for 1/r terms."""
        return 0.5 * (self.r[:-1] + self.r[1:])

    @cached_property
    def r_cell(self) -> np.ndarray:
        """Cell radius sqrt(r_j r_{j+1}); makes 1/r_cell**2 = 1/(r_j r_{j+1})."""
        return np.sqrt(self.r[:-1] * self.r[1:])

    @property
    def w(self) -> np.ndarray:
        return self.weights(0)

    def weights(self, origin_power: int = 0) -> np.ndarray:
        """Trapezoid weights, first cell integrated as c r**p."""
        return _trapezoid_weights(self.r, origin_power)

    def descriptor(self) -> dict:
        return {"n": self.n, "R_max": self.R_max, "grading": self.grading, "q": self.q}

    def scaled(self, factor: float) -> RadialGrid:
        """Same grid with every node multiplied by ``factor``."""
        return RadialGrid(self.n, self.R_max * factor, self.grading, self.q, r=self.r * factor)

    def cell_average(self, f):
        return 0.5 * (f[:-1] + f[1:])

    def cell_difference(self, f):
        return (f[1:] - f[:-1]) / self.h


def _nodes(n, R_max, grading, q):
    if grading not in GRADINGS:
        raise ValueError(f"unknown grading {grading!r}; expected one of {GRADINGS}")
    if not (isinstance(n, (int, np.integer)) and n >= MIN_NODES):
        raise ValueError(f"n must be an integer >= {MIN_NODES}, got {n!r}")
    if not (np.isfinite(R_max) and R_max > 0):
        raise ValueError(f"R_max must be positive and finite, got {R_max!r}")
    if grading == "uniform":
        return R_max * np.arange(1, n + 1) / n
    if not (np.isfinite(q) and 1.0 <= q <= 1.05):
        raise ValueError(f"geometric ratio q must lie in [1, 1.05], got {q!r}")
    if q == 1.0:
        return R_max * np.arange(1, n + 1) / n
    # n cells [0,r_0], [r_0,r_1], ... with widths h_0 q**k
    widths = q ** np.arange(n)
    r = np.cumsum(widths)
    return R_max * r / r[-1]


def build_grid(n: int, R_max: float, grading: str = "uniform", q: float = 1.0) -> RadialGrid:
    """Build a graded radial grid with nodes in (0, R_max].

    >>> build_grid(16, 1.0).r[-1]
    1.0
    """
    return RadialGrid(int(n) if isinstance(n, (int, np.integer)) else n, float(R_max), grading, float(q))


def grid_from_descriptor(d: dict) -> RadialGrid:
    return build_grid(d["n"], d["R_max"], d.get("grading", "uniform"), d.get("q", 1.0))


@dataclass
class RadialField:
    grid: RadialGrid
    values: np.ndarray
    origin_power: int = 0
    tail: str = "decaying"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError(f"field has shape {self.values.shape}, grid has {self.grid.n} nodes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        if self.tail not in ("decaying", "bounded"):
            raise ValueError(f"tail must be 'decaying' or 'bounded', got {self.tail!r}")

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def origin_coefficient(self) -> float:
        """Extrapolate f / r**p to r = 0 (removes the r**(p+2) correction)."""
        p = self.origin_power
        r0, r1 = self.r[0], self.r[1]
        c0, c1 = self.values[0] / r0**p, self.values[1] / r1**p
        return (c0 * r1**2 - c1 * r0**2) / (r1**2 - r0**2)


def _trapezoid_weights(r, p):
    h = np.diff(r)
    w = np.empty_like(r)
    w[0] = r[0] / (p + 1)
    w[1:] = 0.5 * h
    w[:-1] += 0.5 * h
    return w


def trapezoid_cumulative(values, r, origin_power=0):
    """G_k = r_0 f_0/(p+1) + sum_{i<k} h_i (f_i + f_{i+1}) / 2."""
    h = np.diff(r)
    inc = np.empty_like(values)
    inc[0] = r[0] * values[0] / (origin_power + 1)
    inc[1:] = 0.5 * h * (values[:-1] + values[1:])
    return np.cumsum(inc)


def _cubic_cell_integrals(values, r, p):
    """Integrals over [0, r_0] and each cell of a local cubic interpolant."""
    if p >= 1:
        x = np.concatenate(([0.0], r))
        f = np.concatenate(([0.0], values))
        cells = np.arange(len(x) - 1)
    else:
        x, f = r, values
        cells = np.arange(-1, len(x) - 1)  # -1 marks the extrapolated origin cell
    m = len(x)
    start = np.clip(cells - 1, 0, m - 4)
    idx = start[:, None] + np.arange(4)[None, :]
    xs = x[idx]
    a = np.where(cells >= 0, x[np.clip(cells, 0, None)], 0.0)
    b = x[cells + 1]
    # local coordinates anchored at the left end of each cell
    xs = xs - a[:, None]
    span = b - a
    out = np.zeros(len(cells))
    for i in range(4):
        others = [k for k in range(4) if k != i]
        a1, a2, a3 = (xs[:, k] for k in others)
        denom = (xs[:, i] - a1) * (xs[:, i] - a2) * (xs[:, i] - a3)
        s1 = a1 + a2 + a3
        s2 = a1 * a2 + a1 * a3 + a2 * a3
        s3 = a1 * a2 * a3
        t = span
        integral = t**4 / 4 - s1 * t**3 / 3 + s2 * t**2 / 2 - s3 * t
        out += f[idx[:, i]] * integral / denom
    if p >= 1 and len(r) >= 4:
        k = min(ORIGIN_CELLS, len(r) - 1)
        out[:k + 1] = _origin_moment_integrals(values, r, p, k)
    return out


ORIGIN_CELLS = 16


def _origin_moment_integrals(values, r, p, k):
    """Integrals over [0, r_0] and the next k cells of r**p g(r), with g a local
    cubic through f/r**p.  Keeps relative accuracy where the cumulative integral
    is itself O(r**(p+1))."""
    P = np.polynomial.polynomial
    g = values / r**p
    edges = np.concatenate(([0.0], r[:k + 1]))
    out = np.empty(k + 1)
    for c in range(k + 1):
        lo = min(max(c - 2, 0), len(r) - 4)
        coef = P.polyfit(r[lo:lo + 4], g[lo:lo + 4], 3)
        antider = P.polyint(P.polymul(coef, [0.0] * p + [1.0]))
        out[c] = P.polyval(edges[c + 1], antider) - P.polyval(edges[c], antider)
    return out


def integrate_cumulative(f: RadialField, rule: str = "trapezoid") -> RadialField:
    """Cumulative integral G(r_k) = int_0^{r_k} f ds.

    ``rule="trapezoid"`` is second order and monotone (G non-decreasing for
    f >= 0).  ``rule="cubic"`` integrates a local four-point cubic per cell;
    fourth order, but monotonicity is not guaranteed.
    """
    p = max(f.origin_power, 0)
    if rule == "trapezoid":
        G = trapezoid_cumulative(f.values, f.r, p)
    elif rule == "cubic":
        G = np.cumsum(_cubic_cell_integrals(f.values, f.r, p))
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return RadialField(f.grid, G, origin_power=p + 1, tail="bounded")


def integrate_total(f: RadialField, rule: str = "trapezoid") -> float:
    return float(integrate_cumulative(f, rule).values[-1])


def derivative_matrix_coefficients(r, origin_power=0):
    """Three-point stencil coefficients (lower, centre, upper) per node.

    Row k approximates f'(r_k) as lo*f[k-1] + ce*f[k] + up*f[k+1]; the first
    row uses a virtual node f(0) = 0 when origin_power >= 1, otherwise a
    one-sided stencil on r_0, r_1, r_2 (returned separately as ``first``).
    The last row is one-sided on r_{n-3}, r_{n-2}, r_{n-1} (``last``).
    """
    n = len(r)
    hm = np.empty(n)
    hp = np.empty(n)
    hm[1:] = np.diff(r)
    hm[0] = r[0]
    hp[:-1] = np.diff(r)
    hp[-1] = np.nan
    lo = -hp / (hm * (hm + hp))
    ce = (hp - hm) / (hm * hp)
    up = hm / (hp * (hm + hp))
    first = None
    if origin_power < 1:
        first = _one_sided(r[0], r[1], r[2])
    last = _one_sided(r[-1], r[-2], r[-3])
    return lo, ce, up, first, last


def _one_sided(x0, x1, x2):
    """Weights for f'(x0) from f(x0), f(x1), f(x2) (exact for quadratics)."""
    d1, d2 = x1 - x0, x2 - x0
    c1 = d2 / (d1 * (d2 - d1))
    c2 = -d1 / (d2 * (d2 - d1))
    return np.array([-(c1 + c2), c1, c2])


def differentiate(f: RadialField) -> RadialField:
    """Second-order derivative on an arbitrary node sequence."""
    r, v = f.r, f.values
    if len(r) < 16:
        raise ValueError("differentiate needs at least 16 nodes")
    lo, ce, up, first, last = derivative_matrix_coefficients(r, f.origin_power)
    d = np.empty_like(v)
    d[1:-1] = lo[1:-1] * v[:-2] + ce[1:-1] * v[1:-1] + up[1:-1] * v[2:]
    if first is None:
        d[0] = ce[0] * v[0] + up[0] * v[1]  # f(0) = 0 drops the lower term
    else:
        d[0] = first @ v[:3]
    d[-1] = last @ v[[-1, -2, -3]]
    return RadialField(f.grid, d, origin_power=max(f.origin_power - 1, 0), tail=f.tail)
