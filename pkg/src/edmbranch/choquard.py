"""Radial Choquard ground state  -phi'' + a phi - beta W[phi] phi = 0.

W[phi](r) = int phi(s)**2 / max(r, s) ds.  The equation is discretised as
the first-order box system in (phi, psi), with psi = phi/r - phi':

    phi' - phi/r + psi = 0,
    psi' + psi/r + a phi - beta W phi = 0,

collocated at cell midpoints, plus two boundary rows: psi ~ r**2 at the
origin (kills the singular psi ~ 1/r mode) and phi(R_max) = 0.  Since
psi' + psi/r = -phi'', the second row is the Choquard residual itself.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import tangent as tg
from .grid import RadialField, RadialGrid
from .newton import SolverError, newton
from .operators import ReducedJacobian
from .potentials import kernel_sweeps

logger = logging.getLogger(__name__)


class DomainError(ValueError):
    """Parameters outside the weak-coupling regime e**2 < m**2."""


class WrongBranchError(SolverError):
    """Newton converged, but not to a positive nodeless profile."""


@dataclass(frozen=True)
class ModelParams:
    m: float
    e: float

    def __post_init__(self):
        if not (np.isfinite(self.m) and np.isfinite(self.e)):
            raise ValueError("m and e must be finite")
        if self.m <= 0:
            raise ValueError(f"fermion mass must be positive, got m={self.m}")
        if self.e**2 >= self.m**2:
            raise DomainError(
                f"weak coupling (e/m)**2 < 1 is required, got e={self.e}, m={self.m}")

    @property
    def a_coef(self) -> float:
        return 2.0 * self.m

    @property
    def beta(self) -> float:
        return 16.0 * np.pi * (self.m**2 - self.e**2) * self.m


@dataclass
class GroundState:
    phi: RadialField
    psi: RadialField  # phi/r - phi' as produced by the box scheme
    a_coef: float
    beta: float
    v_prime_origin: float
    l2_mass: float
    residual_norm: float
    iterations: int = 0
    history: list = field(default_factory=list)

    @property
    def grid(self) -> RadialGrid:
        return self.phi.grid


def box_residual(x, grid, a, beta, track=False):
    """Residual rows [E1 (n-1), E2 (n-1), origin row, outer row]."""
    n = grid.n
    tape = tg.Tape(x, track=track, capacity=8 * n)
    v, psi = tape.variables(x, [n, n])
    r, rm = grid.r, grid.r_mid
    W, _ = kernel_sweeps(v * v, r, grid.weights(2))
    vb = grid.cell_average(v)
    pb = grid.cell_average(psi)
    E1 = grid.cell_difference(v) - vb / rm + pb
    E2 = grid.cell_difference(psi) + pb / rm + a * vb - beta * (grid.cell_average(W) * vb)
    origin = psi[0] - (r[0] / r[1]) ** 2 * psi[1]
    outer = v[n - 1]
    rows = [E1, E2, origin, outer]
    F = tg.concat(rows).values
    return F, (tape.augmented(rows) if track else None)


def _initial_guess(grid, a, beta, width):
    # c balances the well depth: beta W(0) = 2a for the guess
    r = grid.r / width
    c = 2.0 * np.sqrt(a / beta) * np.sqrt(a)
    g = np.exp(-0.5 * (np.sqrt(a) * r) ** 2)
    v = c * grid.r * g / width
    psi = c * grid.r**2 * g * a / width**3
    return np.concatenate([v, psi])


def _sign_changes(v):
    significant = np.abs(v) > 1e-10 * np.max(np.abs(v))
    s = np.sign(v[significant])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _package(grid, x, a, beta, result=None):
    n = grid.n
    phi = RadialField(grid, x[:n], origin_power=1)
    psi = RadialField(grid, x[n:], origin_power=2)
    l2 = float(grid.weights(2) @ phi.values**2)
    norm = float(np.max(np.abs(box_residual(x, grid, a, beta)[0])))
    return GroundState(phi, psi, a, beta, float(phi.origin_coefficient()), l2, norm,
                       iterations=result.iterations if result else 0,
                       history=list(result.history) if result else [])


def solve_ground_state_direct(grid: RadialGrid, a: float, beta: float, tol: float = 1e-10,
                              max_iters: int = 60, width: float = 2.0) -> GroundState:
    """Newton solve of the box system for arbitrary coefficients a, beta > 0."""
    if not 1e-12 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-12, 1e-6], got {tol}")
    x0 = _initial_guess(grid, a, beta, width)
    result = newton(lambda x, track: box_residual(x, grid, a, beta, track), x0, tol=tol,
                    max_iters=max_iters)
    v = result.x[: grid.n]
    if np.max(np.abs(v)) < 1e-8:
        raise WrongBranchError("converged to the trivial solution", result.history)
    if np.sum(v) < 0:
        v = -v
        result.x[: grid.n] = v
        result.x[grid.n:] *= -1
    changes = _sign_changes(v[:-1])
    if changes:
        raise WrongBranchError(f"solution has {changes} sign changes", result.history)
    logger.info("ground state: %d Newton iterations, |F| = %.2e", result.iterations,
                result.residual_norm)
    return _package(grid, result.x, a, beta, result)


def solve_canonical_ground_state(grid: RadialGrid, tol: float = 1e-10, **kw) -> GroundState:
    """Ground state of -v'' + v - W[v] v = 0 on ``grid``."""
    return solve_ground_state_direct(grid, 1.0, 1.0, tol=tol, **kw)


def rescale_to_model(v: GroundState, params: ModelParams, grid: RadialGrid | None = None
                     ) -> GroundState:
    """Map a solution for (a0, beta0) onto the coefficients of ``params``.

    phi(r) = lam * sqrt(beta0/beta) * v(lam r) with lam = sqrt(a/a0), applied node
    by node on the grid v.grid / lam.  If ``grid`` is given its nodes must be
    those nodes (to rounding); it is then used as the target grid.
    """
    a, beta = params.a_coef, params.beta
    if beta <= 0:
        raise DomainError("beta must be positive (e**2 < m**2)")
    lam = np.sqrt(a / v.a_coef)
    amp = lam * np.sqrt(v.beta / beta)
    target = v.grid.scaled(1.0 / lam) if lam != 1.0 else v.grid
    if grid is not None:
        if grid.n != target.n or not np.allclose(grid.r, target.r, rtol=1e-12, atol=0):
            raise ValueError("target grid is not the rescaled source grid")
        target = grid
    x = np.concatenate([amp * v.phi.values, amp * lam * v.psi.values])
    out = _package(target, x, a, beta)
    out.iterations, out.history = v.iterations, list(v.history)
    return out


def solve_ground_state(params: ModelParams, grid: RadialGrid, tol: float = 1e-10,
                       **kw) -> GroundState:
    """Solve the canonical problem on sqrt(a)*grid and transfer it to ``grid``."""
    lam = np.sqrt(params.a_coef)
    canonical = solve_canonical_ground_state(grid.scaled(lam), tol=tol, **kw)
    return rescale_to_model(canonical, params, grid=grid)


def linearization(gs: GroundState) -> ReducedJacobian:
    """Jacobian of the box system at the ground state, auxiliaries eliminated."""
    x = np.concatenate([gs.phi.values, gs.psi.values])
    _, A = box_residual(x, gs.grid, gs.a_coef, gs.beta, track=True)
    return ReducedJacobian(A, len(x))


def check_nondegeneracy(gs: GroundState, params: ModelParams | None = None) -> float:
    """Smallest singular value of the radial linearization at the ground state.

    The linearized box system is the first-order form of
    h -> -h'' + a h - beta W[phi] h - 2 beta phi W_mixed[phi, h]; a positive
    value certifies a trivial discrete kernel.  Residual rows are weighted by
    the cell widths and the unknowns by quadrature weights (discrete L2 norms on
    both sides), so the value does not drift with the grid size.
    """
    if params is not None and not np.isclose(gs.beta, params.beta, rtol=1e-12):
        gs = rescale_to_model(gs, params)
    g = gs.grid
    rows = np.concatenate([g.h, g.h, [1.0, 1.0]])
    cols = np.concatenate([g.weights(0)] * 2)
    return linearization(gs).sigma_min(rows, cols)


def ground_state_residual(gs: GroundState) -> float:
    x = np.concatenate([gs.phi.values, gs.psi.values])
    return float(np.max(np.abs(box_residual(x, gs.grid, gs.a_coef, gs.beta)[0])))
