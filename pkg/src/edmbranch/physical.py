"""Physical fields (Phi1, Phi2, A, T, V, omega) and checks on them.

:func:`physical_residual_fields` evaluates the radial equations

  sqrt(A) Phi1' = Phi1/r - ((omega - eV)(1+t) + m) Phi2
  sqrt(A) Phi2' = ((omega - eV)(1+t) - m) Phi1 - Phi2/r
  2rA t' = (A-1)(1+t) - 16 pi (omega-eV)(1+t)**3 (Phi1**2+Phi2**2)
           + 32 pi (1+t)**2 Phi1 Phi2 / r + 16 pi m (1+t)**2 (Phi1**2 - Phi2**2)
           + r**2 A (1+t)**3 V'**2
  sqrt(A)(1+t) V' = -(8 pi e / r**2) int_0^r (Phi1**2+Phi2**2)(1+t)/sqrt(A) ds

directly in physical variables, with A = 1 + a from the closed-form metric
integral.  It shares only the box conventions (cell averages, forward
differences, midpoint for 1/r, r_j r_{j+1} for r**2, trapezoid weights) with
the scaled system, never its algebra, so agreement between the two is a check
on the rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .choquard import ModelParams
from .edm_system import alpha
from .grid import RadialField, RadialGrid, trapezoid_cumulative
from .limit_state import ScaledState


@dataclass
class PhysicalSolution:
    """Physical fields; the metric is stored as a = A - 1 and t = T - 1.

    Keeping the small deviations avoids the cancellation in (1 + a) - 1.
    """

    Phi1: RadialField
    Phi2: RadialField
    a: RadialField
    t: RadialField
    V: RadialField
    omega: float
    params: ModelParams

    @property
    def A(self) -> RadialField:
        return RadialField(self.a.grid, 1.0 + self.a.values, tail="bounded")

    @property
    def T(self) -> RadialField:
        return RadialField(self.t.grid, 1.0 + self.t.values, tail="bounded")

    @property
    def grid_phys(self) -> RadialGrid:
        return self.Phi1.grid

    @property
    def eps(self) -> float:
        return self.params.m - self.omega


@dataclass
class Diagnostics:
    adm_mass: float
    adm_spread: float  # (max - min)/|mean| of R(1-A)/2 over the outer 10%
    norm_integral: float
    sup_t: float
    min_A: float
    max_A: float
    T_inf: float  # Coulomb-tail extrapolations of T and V to R -> infinity
    V_inf: float
    unscaled_residual_norms: np.ndarray


def reconstruct(state: ScaledState, params: ModelParams) -> PhysicalSolution:
    """Undo the rescaling: R = r / sqrt(eps)."""
    eps = state.eps
    if not eps > 0:
        raise ValueError("reconstruct needs eps > 0; the eps = 0 limit only exists in scaled form")
    s = np.sqrt(eps)
    grid = state.grid.scaled(1.0 / s)
    a = eps * alpha(eps, state, params)
    return PhysicalSolution(
        Phi1=RadialField(grid, s * state.phi.values, origin_power=1),
        Phi2=RadialField(grid, eps * state.chi.values, origin_power=2),
        a=RadialField(grid, a),
        t=RadialField(grid, eps * state.tau.values),
        V=RadialField(grid, eps * state.zeta.values),
        omega=params.m - eps,
        params=params,
    )


def metric_function(grid: RadialGrid, Phi1, Phi2, t, V, omega, e):
    """a(r) at nodes and cells from

    a = -(1/r) exp(-F) int_0^r [16 pi (omega - eV)(1+t)**2 (Phi1**2+Phi2**2)
        + s**2 (1+t)**2 V'**2] exp(F) ds,   F = int_0^r s (1+t)**2 V'**2 ds.
    """
    R, Rm, Rc, h = grid.r, grid.r_mid, grid.r_cell, grid.h
    Tb = 1.0 + grid.cell_average(t)
    dV = grid.cell_difference(V)
    g = Rm * Tb**2 * dV**2
    Y = np.cumsum(h * g)
    F_nodes = np.concatenate(([0.0], Y))
    F_cells = Y - 0.5 * h * g
    node_int = 16.0 * np.pi * (omega - e * V) * (1.0 + t) ** 2 * (Phi1**2 + Phi2**2) * np.exp(F_nodes)
    cell_int = Rm**2 * Tb**2 * dV**2 * np.exp(F_cells)
    Yc = np.cumsum(h * cell_int)
    C = trapezoid_cumulative(node_int, R, 2)
    S = np.cumsum(grid.weights(2) * node_int)
    a_nodes = -np.exp(-F_nodes) * (C + np.concatenate(([0.0], Yc))) / R
    a_cells = -np.exp(-F_cells) * (S[:-1] + Yc - 0.5 * h * cell_int) / Rc
    return a_nodes, a_cells


def physical_residual_fields(grid: RadialGrid, Phi1, Phi2, t, V, omega, params: ModelParams):
    """Cell residuals (LHS - RHS) of the four physical equations as printed."""
    m, e = params.m, params.e
    a_nodes, a_cells = metric_function(grid, Phi1, Phi2, t, V, omega, e)
    A_n, A_c = 1.0 + a_nodes, 1.0 + a_cells
    Rm, Rc = grid.r_mid, grid.r_cell
    Rc2 = grid.r[:-1] * grid.r[1:]
    av, df = grid.cell_average, grid.cell_difference
    P1, P2, Tb, Vb = av(Phi1), av(Phi2), 1.0 + av(t), av(V)
    dV = df(V)
    w = omega - e * Vb
    E1 = np.sqrt(A_c) * df(Phi1) - (P1 / Rm - (w * Tb + m) * P2)
    E2 = np.sqrt(A_c) * df(Phi2) - ((w * Tb - m) * P1 - P2 / Rm)
    rhs3 = (a_cells * Tb - 16.0 * np.pi * w * Tb**3 * (P1**2 + P2**2)
            + 32.0 * np.pi * Tb**2 * P1 * P2 / Rm + 16.0 * np.pi * m * Tb**2 * (P1**2 - P2**2)
            + Rc2 * A_c * Tb**3 * dV**2)
    E3 = 2.0 * Rc * A_c * df(t) - rhs3
    dens = (Phi1**2 + Phi2**2) * (1.0 + t) / np.sqrt(A_n)
    S = np.cumsum(grid.weights(2) * dens)
    E4 = np.sqrt(A_c) * Tb * dV + 8.0 * np.pi * e * S[:-1] / Rc2
    return E1, E2, E3, E4


def unscaled_residual_fields(phys: PhysicalSolution):
    p = phys
    return physical_residual_fields(p.grid_phys, p.Phi1.values, p.Phi2.values,
                                    p.t.values, p.V.values, p.omega, p.params)


def unscaled_residual(phys: PhysicalSolution) -> np.ndarray:
    """Sup-norms of the four physical residuals."""
    return np.array([np.max(np.abs(E)) for E in unscaled_residual_fields(phys)])


def _tail_limit(R, f):
    # least squares f = c0 + c1/R + c2/R**2; c0 is the value at infinity
    X = np.column_stack([np.ones_like(R), 1.0 / R, 1.0 / R**2])
    return float(np.linalg.lstsq(X, f, rcond=None)[0][0])


def diagnostics(phys: PhysicalSolution) -> Diagnostics:
    grid = phys.grid_phys
    R = grid.r
    A, T = phys.A.values, phys.T.values
    outer = slice(int(0.9 * grid.n), None)
    mass = R[outer] * (1.0 - A[outer]) / 2.0
    adm = float(np.mean(mass))
    spread = float((mass.max() - mass.min()) / abs(adm)) if adm != 0 else 0.0
    dens = (phys.Phi1.values**2 + phys.Phi2.values**2) * T / np.sqrt(A)
    return Diagnostics(
        adm_mass=adm,
        adm_spread=spread,
        norm_integral=float(grid.weights(2) @ dens),
        sup_t=float(np.max(np.abs(T - 1.0))),
        min_A=float(A.min()),
        max_A=float(A.max()),
        T_inf=_tail_limit(R[outer], T[outer]),
        V_inf=_tail_limit(R[outer], phys.V.values[outer]),
        unscaled_residual_norms=unscaled_residual(phys),
    )
