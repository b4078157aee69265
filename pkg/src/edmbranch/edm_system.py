"""Residual and Jacobian of the rescaled Einstein-Dirac-Maxwell system.

Unknowns: phi, chi, tau, zeta at the grid nodes, related to the physical
fields by Phi1(R) = eps**0.5 phi(x), Phi2 = eps chi, t = eps tau, V = eps zeta
with x = eps**0.5 R and omega = m - eps.  Substituting into the physical
equations and dividing equation i by eps**p_i (p = 1, 3/2, 1, 3/2; the third
equation additionally by 2x) gives, with A = 1 + eps*alpha and c = 1 + e zeta,

  R1 = sqrt(A) phi' - phi/x + 2m chi + K1
  R2 = sqrt(A) chi' + chi/x + phi - m phi tau + e phi zeta + K2
  R3 = A tau' - alpha/(2x) + K3
  R4 = sqrt(A)(1 + eps tau) zeta' + (8 pi e/x**2) int_0^x phi**2 + K4

  K1 = eps (m tau - c) chi - eps**2 tau c chi
  K2 = eps tau c phi
  K3 = -(eps/(2x)) [alpha tau + 16 pi (1+eps tau)**2 B + 32 pi (1+eps tau)**2 phi chi/x
                    + x**2 A (1+eps tau)**3 zeta'**2]
  B  = -2m chi**2 - (m tau - c) phi**2 - eps (m tau - c) chi**2 + eps c tau phi**2
       + eps**2 c tau chi**2
  K4 = (8 pi e/x**2) int_0^x [(phi**2 + eps chi**2)(1+eps tau)/sqrt(A) - phi**2]

  alpha = -(1/x) exp(-eps**2 G) int_0^x [16 pi (m - eps c)(1+eps tau)**2
            (phi**2 + eps chi**2) + eps y**2 (1+eps tau)**2 zeta'**2] exp(eps**2 G) dy
  G(x) = int_0^x y (1+eps tau)**2 zeta'**2 dy

Every K_i carries an explicit factor eps, so K_i(0, .) = 0 holds bit-exactly.
The derivation is written out in docs/derivation.md.

Discretisation (Keller box): equations are collocated on cells [r_j, r_{j+1}]
with cell averages and forward differences; 1/x terms use the arithmetic
midpoint, x**2 and the charge terms use r_j r_{j+1}.  Cumulative integrals
use trapezoid weights with the origin cell integrated as r**2.  Boundary rows:

  chi_0 = (r_0/r_1)**2 chi_1                (regularity, chi ~ r**2)
  phi(R) = 0
  2 tau + eps tau**2 + alpha (1+eps tau)**2 = 0   i.e. (1+eps tau)**2 A = 1,
  zeta sqrt(A)(1+eps tau) = (8 pi e / R) int_0^R Psi,

the last two matching the electrovacuum exterior (T**2 A = 1, V = q/R), so
tau and zeta keep their Coulomb tails on the truncated domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import tangent as tg
from .choquard import ModelParams
from .grid import RadialGrid
from .limit_state import ScaledState
from .newton import MetricBreakdownError
from .operators import ReducedJacobian

# physical residual i (as printed, eq. 3 as 2RAt' - rhs) = eps**p_i * scaled
# residual i, with scaled residual 3 taken in its 2x-weighted form
SCALING_EXPONENTS = (1.0, 1.5, 1.0, 1.5)
MUTATIONS = ("k1", "k2", "k3", "k4")

FOUR_PI = 4.0 * np.pi


@dataclass
class Residual:
    """Cell residuals R1..R4 plus the four boundary rows."""

    x: np.ndarray  # arithmetic cell midpoints
    R1: np.ndarray
    R2: np.ndarray
    R3: np.ndarray
    R4: np.ndarray
    boundary: np.ndarray

    def fields(self):
        return (self.R1, self.R2, self.R3, self.R4)

    def sup_norms(self) -> np.ndarray:
        return np.array([np.max(np.abs(R)) for R in self.fields()])

    def sup_norm(self) -> float:
        return float(max(self.sup_norms().max(), np.max(np.abs(self.boundary))))

    def operator_forms(self):
        """The 1/r-weighted rows L1 = R1/r, L2 = R2/r, L3 = R3, L4 = R4."""
        return (self.R1 / self.x, self.R2 / self.x, self.R3, self.R4)

    def weighted_norms(self, h: np.ndarray) -> np.ndarray:
        """L2(r dr) norms of the operator forms."""
        return np.array([np.sqrt(np.sum(h * self.x * L**2)) for L in self.operator_forms()])


class _Ops:
    """Grid-dependent sparse maps, cached per grid."""

    _cache: dict = {}

    def __new__(cls, grid: RadialGrid):
        key = (grid.n, grid.r.tobytes())
        if key not in cls._cache:
            self = super().__new__(cls)
            n = grid.n
            h = grid.h
            # node cumulative (trapezoid, origin cell as r**2): increments
            rows = [0] + [k for k in range(1, n) for _ in (0, 1)]
            cols = [0] + [c for k in range(1, n) for c in (k - 1, k)]
            vals = [grid.r[0] / 3.0] + [v for k in range(1, n) for v in (0.5 * h[k - 1],) * 2]
            self.trap_inc = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
            # cell sums -> node values: G_0 = 0, G_k = Y_{k-1}
            self.pad = sp.csr_matrix((np.ones(n - 1), (np.arange(1, n), np.arange(n - 1))),
                                     shape=(n, n - 1))
            cls._cache.clear()
            cls._cache[key] = self
        return cls._cache[key]


def _system(eps, x, grid, params, track=False, mutate=None):
    if mutate is not None and mutate not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutate!r}; expected one of {MUTATIONS}")
    m, e = params.m, params.e
    n = grid.n
    ops = _Ops(grid)
    r, rm, rc, h = grid.r, grid.r_mid, grid.r_cell, grid.h
    rc2 = r[:-1] * r[1:]
    w2 = grid.weights(2)
    avg, diff = grid.cell_average, grid.cell_difference
    sign = {k: (-1.0 if mutate == k else 1.0) for k in MUTATIONS}

    tape = tg.Tape(x, track=track, capacity=12 * n)
    phi, chi, tau, zeta = tape.variables(x, [n] * 4)
    eps2 = eps * eps

    c = 1.0 + e * zeta
    one_t = 1.0 + eps * tau
    pb, cb, tb, zb = avg(phi), avg(chi), avg(tau), avg(zeta)
    ccb = 1.0 + e * zb
    one_tb = 1.0 + eps * tb
    dphi, dchi, dtau, dz = diff(phi), diff(chi), diff(tau), diff(zeta)
    dz2 = dz.square()

    # metric exponent G, nodes and cells
    g_cell = rm * one_tb.square() * dz2
    Y = tg.cumsum(h * g_cell)
    G_nodes = Y.apply(ops.pad)
    G_cell = Y - 0.5 * h * g_cell
    E_nodes = tg.exp(eps2 * G_nodes)
    E_cell = tg.exp(eps2 * G_cell)

    # alpha: node part (trapezoid / inclusive sums) and cell part (midpoint rule)
    phi2 = phi.square()
    dens = phi2 + eps * chi.square()
    I_nodes = 16.0 * np.pi * (m - eps * c) * one_t.square() * dens * E_nodes
    I_cell = eps * rm**2 * one_tb.square() * dz2 * E_cell
    C_nodes = tg.cumsum(I_nodes.apply(ops.trap_inc))
    S_I = tg.cumsum(w2 * I_nodes)
    Yc = tg.cumsum(h * I_cell)
    alpha_n = -(1.0 / r) * tg.exp(-eps2 * G_nodes) * (C_nodes + Yc.apply(ops.pad))
    alpha_c = -(1.0 / rc) * tg.exp(-eps2 * G_cell) * (S_I[:-1] + Yc - 0.5 * h * I_cell)

    A_n = 1.0 + eps * alpha_n
    A_c = 1.0 + eps * alpha_c
    if np.any(A_n.values <= 0) or np.any(A_c.values <= 0):
        raise MetricBreakdownError(f"1 + eps*alpha <= 0 at eps = {eps}")
    sA_n, sA_c = A_n.sqrt(), A_c.sqrt()

    K1 = eps * (m * tb - ccb) * cb - eps2 * tb * ccb * cb
    K2 = eps * tb * ccb * pb
    mtc = m * tb - ccb
    B = (-2.0 * m * cb.square() - mtc * pb.square() - eps * mtc * cb.square()
         + eps * ccb * tb * pb.square() + eps2 * ccb * tb * cb.square())
    K3 = -(eps / (2.0 * rc)) * (alpha_c * tb + 16.0 * np.pi * one_tb.square() * B
                                + 32.0 * np.pi * one_tb.square() * pb * cb / rm
                                + rc2 * A_c * one_tb.square() * one_tb * dz2)
    Psi = dens * one_t / sA_n
    S_phi = tg.cumsum(w2 * phi2)
    S_Psi = tg.cumsum(w2 * Psi)
    K4 = (8.0 * np.pi * e / rc2) * (S_Psi[:-1] - S_phi[:-1])

    R1 = sA_c * dphi - pb / rm + 2.0 * m * cb + sign["k1"] * K1
    R2 = sA_c * dchi + cb / rm + pb - m * pb * tb + e * pb * zb + sign["k2"] * K2
    R3 = A_c * dtau - alpha_c / (2.0 * rc) + sign["k3"] * K3
    R4 = (sA_c * one_tb * dz + (8.0 * np.pi * e / rc2) * S_phi[:-1] + sign["k4"] * K4)

    N = n - 1
    tN, aN = tau[N], alpha_n[N]
    b_origin = chi[0] - (r[0] / r[1]) ** 2 * chi[1]
    b_phi = phi[N]
    b_tau = 2.0 * tN + eps * tN.square() + aN * (1.0 + eps * tN).square()
    b_zeta = zeta[N] * sA_n[N] * (1.0 + eps * tN) - (8.0 * np.pi * e / r[N]) * S_Psi[N]

    rows = [R1, R2, R3, R4, b_origin, b_phi, b_tau, b_zeta]
    return {"rows": rows, "tape": tape, "alpha_nodes": alpha_n, "alpha_cells": alpha_c}


def _state_args(eps, state, params):
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    return state.vector(), state.grid


def alpha(eps: float, state: ScaledState, params: ModelParams):
    """alpha at the nodes (eps * alpha = a, the metric function A - 1)."""
    x, grid = _state_args(eps, state, params)
    return _system(eps, x, grid, params)["alpha_nodes"].values


def alpha_cells(eps: float, state: ScaledState, params: ModelParams):
    x, grid = _state_args(eps, state, params)
    return _system(eps, x, grid, params)["alpha_cells"].values


def scaled_residual(eps: float, state: ScaledState, params: ModelParams,
                    mutate: str | None = None) -> Residual:
    x, grid = _state_args(eps, state, params)
    rows = _system(eps, x, grid, params, mutate=mutate)["rows"]
    vals = [t.values for t in rows]
    return Residual(grid.r_mid, *vals[:4], np.concatenate(vals[4:]))


def residual_vector(eps, x, grid, params, track=False, mutate=None):
    """Stacked rows [R1, R2, R3, R4, boundary] and, if tracking, the augmented Jacobian."""
    out = _system(eps, x, grid, params, track=track, mutate=mutate)
    F = tg.concat(out["rows"]).values
    return F, (out["tape"].augmented(out["rows"]) if track else None)


def l2_weights(grid: RadialGrid):
    """Row and column weights for the discrete L2 -> L2 norm of the Jacobian."""
    rows = np.concatenate([grid.h] * 4 + [np.ones(4)])
    return rows, np.concatenate([grid.weights(0)] * 4)


def sigma_min(eps: float, state: ScaledState, params: ModelParams) -> float:
    """Smallest singular value of the Jacobian in discrete L2 norms."""
    return jacobian(eps, state, params).sigma_min(*l2_weights(state.grid))


def jacobian(eps: float, state: ScaledState, params: ModelParams) -> ReducedJacobian:
    """Frechet derivative of the stacked residual in (phi, chi, tau, zeta)."""
    x, grid = _state_args(eps, state, params)
    _, A = residual_vector(eps, x, grid, params, track=True)
    return ReducedJacobian(A, len(x))
