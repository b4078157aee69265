"""Self-checks of the discretised system, runnable from the command line.

Each check returns a :class:`Check` with the measured value and its
threshold.  The suite is deterministic for a given seed.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass

import numpy as np

from .choquard import ModelParams, solve_canonical_ground_state, solve_ground_state
from .continuation import SolverOptions, continue_branch
from .edm_system import (SCALING_EXPONENTS, jacobian, residual_vector, scaled_residual,
                         sigma_min)
from .grid import RadialGrid, build_grid
from .limit_state import ScaledState, assemble_limit_state
from .physical import physical_residual_fields, reconstruct

logger = logging.getLogger(__name__)


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def as_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = bool(d["passed"])
        d["value"] = float(d["value"])
        d["threshold"] = float(d["threshold"])
        return d


def random_smooth_state(grid: RadialGrid, eps: float, rng: np.random.Generator,
                        amplitude: float = 0.3) -> ScaledState:
    """A decaying non-solution state with the right behaviour at the origin."""
    r = grid.r
    a = amplitude * rng.uniform(0.5, 1.5, 4)
    b = rng.uniform(0.3, 1.0, 4)
    k = rng.uniform(0.2, 1.0, 4)
    phi = a[0] * r * np.exp(-b[0] * r) * (1.0 + 0.3 * np.sin(k[0] * r))
    chi = a[1] * r**2 * np.exp(-b[1] * r) * (1.0 + 0.3 * np.cos(k[1] * r))
    tau = a[2] * (np.exp(-b[2] * r**2) + 1.0 / (1.0 + r)) * (1.0 + 0.2 * np.sin(k[2] * r))
    zeta = a[3] * np.exp(-b[3] * r) * (1.0 + r) + 0.1 * a[3] / (1.0 + r)
    return ScaledState.from_vector(eps, grid, np.concatenate([phi, chi, tau, zeta]))


def scaling_identity_error(state: ScaledState, params: ModelParams,
                           mutate: str | None = None) -> np.ndarray:
    """Relative mismatch between physical residual i and eps**p_i * scaled residual i."""
    eps = state.eps
    S = scaled_residual(eps, state, params, mutate=mutate)
    phys = reconstruct(state, params)
    P = physical_residual_fields(phys.grid_phys, phys.Phi1.values, phys.Phi2.values,
                                 phys.t.values, phys.V.values, phys.omega, params)
    scaled = (S.R1, S.R2, 2.0 * state.grid.r_cell * S.R3, S.R4)
    out = []
    for Pi, Si, p in zip(P, scaled, SCALING_EXPONENTS):
        ref = eps**p * Si
        out.append(np.max(np.abs(Pi - ref)) / np.max(np.abs(ref)))
    return np.array(out)


def check_scaling_oracle(params, grid, eps_values=(1e-4, 1e-3, 1e-2), n_states=20, seed=0,
                         mutate=None, tol=1e-8) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for eps in eps_values:
        for _ in range(n_states):
            state = random_smooth_state(grid, eps, rng)
            worst = max(worst, float(scaling_identity_error(state, params, mutate).max()))
    return Check("scaling_oracle", worst < tol, worst, tol,
                 f"{n_states} states x eps {list(eps_values)}"
                 + (f", mutation {mutate}" if mutate else ""))


def fd_slope(eps, state: ScaledState, params, rng, deltas=(1e-4, 1e-5, 1e-6, 1e-7)):
    """Log-log slope of the directional finite-difference error and the errors."""
    grid = state.grid
    x = state.vector()
    d = random_smooth_state(grid, eps, rng, amplitude=1.0).vector()
    J = jacobian(eps, state, params)
    Jd = J.matvec(d)
    F0 = residual_vector(eps, x, grid, params)[0]
    errs = []
    for delta in deltas:
        F1 = residual_vector(eps, x + delta * d, grid, params)[0]
        errs.append(np.max(np.abs((F1 - F0) / delta - Jd)))
    slope = np.polyfit(np.log(deltas), np.log(errs), 1)[0]
    return float(slope), errs


def check_fd_jacobian(eps, state, params, seed=0) -> Check:
    slope, errs = fd_slope(eps, state, params, np.random.default_rng(seed))
    return Check(f"jacobian_fd_slope_eps={eps:g}", abs(slope - 1.0) <= 0.2, slope, 0.2,
                 "errors " + ", ".join(f"{e:.2e}" for e in errs))


def explicit_linearization(limit: ScaledState, params: ModelParams) -> np.ndarray:
    """Dense box discretisation of the eps = 0 linearization in r-weighted form.

    Rows (cells, stacked R1..R4, then the four closure rows) act on (h, k, l, z):
      h' - h/r + 2m k
      k' + k/r + h - m phi0 l + e phi0 z - m tau0 h + e zeta0 h
      l' + (16 pi m / r**2) int_0^r phi0 h
      z' + (16 pi e / r**2) int_0^r phi0 h
    closed by k_0 = (r_0/r_1)**2 k_1, h(R) = 0 and the linearized matching
    rows 2 l(R) + alpha'(R)[h] = 0, z(R) = (16 pi e / R) int_0^R phi0 h.
    """
    grid = limit.grid
    m, e = params.m, params.e
    n = grid.n
    N = n - 1
    r, h, rm = grid.r, grid.h, grid.r_mid
    rc2 = r[:-1] * r[1:]
    w = grid.weights(2)
    phi0, tau0, zeta0 = limit.phi.values, limit.tau.values, limit.zeta.values
    pb = 0.5 * (phi0[:-1] + phi0[1:])
    tb = 0.5 * (tau0[:-1] + tau0[1:])
    zb = 0.5 * (zeta0[:-1] + zeta0[1:])

    J = np.zeros((4 * n, 4 * n))
    H, K, L, Z = (slice(i * n, (i + 1) * n) for i in range(4))
    cells = np.arange(N)

    def stencil(block, row0, col_block, left, right):
        blk = J[row0:row0 + N, col_block]
        blk[cells, cells] += left
        blk[cells, cells + 1] += right

    # difference and average stencils
    for b, col in enumerate((H, K, L, Z)):
        stencil(b, b * N, col, -1.0 / h, 1.0 / h)
    stencil(0, 0, H, -0.5 / rm, -0.5 / rm)
    stencil(0, 0, K, m, m)
    stencil(1, N, K, 0.5 / rm, 0.5 / rm)
    stencil(1, N, H, 0.5 * (1.0 - m * tb + e * zb), 0.5 * (1.0 - m * tb + e * zb))
    stencil(1, N, L, -0.5 * m * pb, -0.5 * m * pb)
    stencil(1, N, Z, 0.5 * e * pb, 0.5 * e * pb)
    # nonlocal blocks: cumulative weights up to node k (inclusive)
    lower = np.tril(np.ones((N, n)), k=0) * (w * phi0)[None, :]
    J[2 * N:3 * N, H] += (16.0 * np.pi * m / rc2)[:, None] * lower
    J[3 * N:4 * N, H] += (16.0 * np.pi * e / rc2)[:, None] * lower
    # closure rows
    b0 = 4 * N
    J[b0, K.start] = 1.0
    J[b0, K.start + 1] = -(r[0] / r[1]) ** 2
    J[b0 + 1, H.start + N] = 1.0
    J[b0 + 2, L.start + N] = 2.0
    J[b0 + 2, H] = -(32.0 * np.pi * m / r[N]) * w * phi0
    J[b0 + 3, Z.start + N] = 1.0
    J[b0 + 3, H] = -(16.0 * np.pi * e / r[N]) * w * phi0
    return J


def check_linearization_anchor(limit: ScaledState, params, tol=1e-12) -> Check:
    J = jacobian(0.0, limit, params).to_dense()
    ref = explicit_linearization(limit, params)
    diff = float(np.max(np.abs(J - ref)))
    scale = float(np.max(np.abs(ref)))
    del J, ref
    return Check("linearization_anchor", diff <= tol * scale, diff / scale, tol,
                 f"max entry difference {diff:.3e}, max entry {scale:.3e}")


def check_limit_anchor(limit: ScaledState, params, tol=1e-6) -> list[Check]:
    res = scaled_residual(0.0, limit, params)
    worst = float(res.sup_norms().max())
    ratio = float(np.max(np.abs(limit.zeta.values * params.m - limit.tau.values * params.e)))
    # every remainder carries a factor eps: flipping its sign must change nothing at eps = 0
    bit_exact = all(
        np.array_equal(np.concatenate(res.fields()),
                       np.concatenate(scaled_residual(0.0, limit, params, mutate=k).fields()))
        for k in ("k1", "k2", "k3", "k4"))
    return [
        Check("limit_residual", worst < tol, worst, tol),
        Check("limit_potential_ratio", ratio <= 1e-12, ratio, 1e-12, "max |zeta m - tau e|"),
        Check("remainders_vanish_at_eps0", bit_exact, 0.0 if bit_exact else 1.0, 0.0),
    ]


def check_sigma_min(params, grid: RadialGrid, tol=1e-10) -> list[Check]:
    fine = build_grid(2 * grid.n, grid.R_max, grid.grading, grid.q)
    sig = []
    for g in (grid, fine):
        limit = assemble_limit_state(solve_ground_state(params, g, tol=tol), params)
        sig.append(sigma_min(0.0, limit, params))
    change = abs(sig[1] - sig[0]) / sig[0]
    return [Check("sigma_min_positive", sig[0] > 0, sig[0], 0.0, f"n = {grid.n}"),
            Check("sigma_min_refinement", change < 0.1, change, 0.1,
                  f"sigma_min {sig[0]:.6g} (n={grid.n}) vs {sig[1]:.6g} (n={fine.n})")]


def check_refinement_order(grid: RadialGrid, tol=1e-10) -> Check:
    """Self-convergence of the canonical ground state on nested uniform grids."""
    sols = []
    for k in (1, 2, 4):
        g = build_grid(k * grid.n, grid.R_max)
        sols.append(solve_canonical_ground_state(g, tol=tol).phi.values)
    # node k of a grid with n nodes coincides with node 2k+1 of the 2n grid
    e1 = np.max(np.abs(sols[0] - sols[1][1::2]))
    e2 = np.max(np.abs(sols[1] - sols[2][1::2]))
    ratio = float(e1 / e2)
    return Check("ground_state_refinement_ratio", ratio >= 3.5, ratio, 3.5,
                 f"differences {e1:.3e}, {e2:.3e}")


def check_branch(params, grid, opts: SolverOptions, eps_max=1e-2, steps=10) -> list[Check]:
    branch = continue_branch(params, eps_max, steps, opts, grid=grid)
    pts = branch.points
    x0 = pts[0].state.vector()
    eps = np.array([p.eps for p in pts[1:]])
    dev = np.array([np.max(np.abs(p.state.vector() - x0)) for p in pts[1:]])
    keep = eps >= 1e-4
    slope = float(np.polyfit(np.log(eps[keep]), np.log(dev[keep]), 1)[0]) if keep.sum() > 1 \
        else float("nan")
    iters = max(p.newton_iters for p in pts)
    recheck = max(float(np.max(np.abs(residual_vector(p.eps, p.state.vector(), grid, params)[0])))
                  for p in pts)
    return [
        Check("branch_complete", bool(not branch.truncated and branch.eps_reached == eps_max),
              branch.eps_reached, eps_max, f"{len(pts)} points"),
        Check("branch_newton_iterations", iters <= 8, iters, 8),
        Check("branch_residual_recheck", recheck < opts.tol, recheck, opts.tol),
        Check("branch_deviation_slope", 0.8 <= slope <= 1.2, slope, 1.0, "accepted range [0.8, 1.2]"),
    ]


def run_suite(params: ModelParams, grid: RadialGrid, opts: SolverOptions, seed: int = 0,
              mutate: str | None = None, quick: bool = False) -> list[Check]:
    t0 = time.perf_counter()
    checks: list[Check] = []
    n_states = 5 if quick else 20
    checks.append(check_scaling_oracle(params, grid, n_states=n_states, seed=seed, mutate=mutate))
    gs = solve_ground_state(params, grid, tol=min(opts.tol, 1e-10))
    limit = assemble_limit_state(gs, params)
    checks += check_limit_anchor(limit, params)
    checks.append(check_linearization_anchor(limit, params))
    checks.append(check_fd_jacobian(0.0, limit, params, seed=seed))
    branch_eps = 1e-2
    checks += check_branch(params, grid, opts, eps_max=branch_eps)
    point = continue_branch(params, branch_eps, 4, opts, limit=limit).points[-1]
    checks.append(check_fd_jacobian(branch_eps, point.state, params, seed=seed))
    checks += check_sigma_min(params, grid)
    checks.append(check_refinement_order(grid))
    logger.info("verification suite finished in %.1f s", time.perf_counter() - t0)
    return checks
