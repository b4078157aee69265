"""Scaled unknowns (phi, chi, tau, zeta) and the eps = 0 limit tuple."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .choquard import GroundState, ModelParams
from .grid import RadialField, RadialGrid, differentiate
from .potentials import kernel_sweeps


@dataclass
class ScaledState:
    eps: float
    phi: RadialField
    chi: RadialField
    tau: RadialField
    zeta: RadialField

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")
        grids = {id(f.grid) for f in (self.phi, self.chi, self.tau, self.zeta)}
        if len(grids) != 1 and not all(
                np.array_equal(f.grid.r, self.phi.grid.r) for f in (self.chi, self.tau, self.zeta)):
            raise ValueError("all four fields must share one grid")

    @property
    def grid(self) -> RadialGrid:
        return self.phi.grid

    def vector(self) -> np.ndarray:
        return np.concatenate([self.phi.values, self.chi.values, self.tau.values,
                               self.zeta.values])

    @classmethod
    def from_vector(cls, eps: float, grid: RadialGrid, x: np.ndarray) -> ScaledState:
        n = grid.n
        if x.shape != (4 * n,):
            raise ValueError(f"expected {4 * n} unknowns, got {x.shape}")
        return cls(eps,
                   RadialField(grid, x[:n], origin_power=1),
                   RadialField(grid, x[n:2 * n], origin_power=2),
                   RadialField(grid, x[2 * n:3 * n], origin_power=0),
                   RadialField(grid, x[3 * n:], origin_power=0))

    def with_eps(self, eps: float) -> ScaledState:
        return ScaledState.from_vector(eps, self.grid, self.vector())


def assemble_limit_state(gs: GroundState, params: ModelParams) -> ScaledState:
    """phi_0 and the closed forms chi_0, tau_0, zeta_0 of the eps = 0 system.

    chi_0 = (phi/r - phi')/(2m) uses the derivative carried by the ground-state
    solve; tau_0 and zeta_0 are 8 pi m W and 8 pi e W with
    W = int phi**2 / max(r, s) ds.
    """
    if not np.isclose(gs.a_coef, params.a_coef, rtol=1e-12) or not np.isclose(
            gs.beta, params.beta, rtol=1e-12):
        raise ValueError("ground state coefficients do not match params; rescale first")
    grid = gs.grid
    m, e = params.m, params.e
    W, _ = kernel_sweeps(gs.phi.values**2, grid.r, grid.weights(2))
    x = np.concatenate([gs.phi.values, gs.psi.values / (2.0 * m),
                        8.0 * np.pi * m * W, 8.0 * np.pi * e * W])
    return ScaledState.from_vector(0.0, grid, x)


def closed_form_chi(phi: RadialField, m: float) -> RadialField:
    """chi = (phi/r - phi')/(2m) with the node derivative stencil.

    The limit state itself uses the derivative carried by the box solve, which
    satisfies the discrete first equation exactly; this version is for
    arbitrary fields.
    """
    d = differentiate(phi).values
    return RadialField(phi.grid, (phi.values / phi.r - d) / (2.0 * m),
                       origin_power=phi.origin_power + 1)
