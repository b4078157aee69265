"""Predictor-corrector continuation of the scaled system in eps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .choquard import ModelParams, solve_ground_state
from .edm_system import residual_vector
from .grid import RadialGrid
from .limit_state import ScaledState, assemble_limit_state
from .newton import MetricBreakdownError, SolverError, newton

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iters: int = 30
    damping: bool = True

    def __post_init__(self):
        if not 1e-12 <= self.tol <= 1e-6:
            raise ValueError(f"tol must lie in [1e-12, 1e-6], got {self.tol}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass(frozen=True)
class BranchPoint:
    eps: float
    state: ScaledState
    residual_norm: float
    newton_iters: int
    history: tuple = ()


@dataclass
class Branch:
    params: ModelParams
    points: list[BranchPoint] = field(default_factory=list)
    eps_target: float = 0.0
    truncated: bool = False

    @property
    def eps_reached(self) -> float:
        return self.points[-1].eps if self.points else 0.0

    @property
    def limit(self) -> BranchPoint:
        return self.points[0]


def _correct(eps, x0, grid, params, opts: SolverOptions, mutate=None):
    return newton(lambda x, track: residual_vector(eps, x, grid, params, track, mutate),
                  x0, tol=opts.tol, max_iters=opts.max_iters, damping=opts.damping)


def newton_correct(eps: float, guess: ScaledState, params: ModelParams,
                   opts: SolverOptions | None = None) -> BranchPoint:
    """Solve the scaled system at fixed eps starting from ``guess``.

    Raises SolverError when the iteration stalls; the returned point always has
    residual sup-norm below ``opts.tol``.
    """
    opts = opts or SolverOptions()
    res = _correct(eps, guess.vector(), guess.grid, params, opts)
    state = ScaledState.from_vector(eps, guess.grid, res.x)
    return BranchPoint(eps, state, res.residual_norm, res.iterations, tuple(res.history))


def eps_schedule(eps_max: float, n_steps: int) -> np.ndarray:
    """Targets uniform in sqrt(eps), excluding 0."""
    k = np.arange(1, n_steps + 1)
    return eps_max * (k / n_steps) ** 2


def _predict(points: list[BranchPoint], eps: float) -> np.ndarray:
    last = points[-1]
    x = last.state.vector()
    if len(points) < 2:
        return x
    prev = points[-2]
    slope = (x - prev.state.vector()) / (last.eps - prev.eps)
    return x + (eps - last.eps) * slope


def continue_branch(params: ModelParams, eps_max: float, n_steps: int,
                    opts: SolverOptions | None = None, grid: RadialGrid | None = None,
                    limit: ScaledState | None = None, max_halvings: int = 10) -> Branch:
    """Follow eps -> eta(eps) from the limit state up to ``eps_max``.

    A failed corrector halves the step (in eps) up to ``max_halvings`` times;
    after that the branch is returned truncated at the last accepted point.
    """
    if eps_max < 0:
        raise ValueError("eps_max must be non-negative")
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    opts = opts or SolverOptions()
    if limit is None:
        if grid is None:
            raise ValueError("need a grid or a precomputed limit state")
        gs = solve_ground_state(params, grid, tol=min(opts.tol, 1e-10))
        limit = assemble_limit_state(gs, params)
    branch = Branch(params, eps_target=eps_max)
    # polish at eps = 0 so point 0 meets the corrector tolerance by construction
    branch.points.append(newton_correct(0.0, limit, params, opts))
    if eps_max == 0:
        return branch
    grid = limit.grid
    for target in eps_schedule(eps_max, n_steps):
        while branch.points[-1].eps < target:
            start = branch.points[-1].eps
            step = target - start
            for _ in range(max_halvings + 1):
                eps = start + step
                try:
                    res = _correct(eps, _predict(branch.points, eps), grid, params, opts)
                    break
                except (SolverError, MetricBreakdownError) as exc:
                    logger.info("corrector failed at eps=%.6g (%s); halving", eps, exc)
                    step *= 0.5
            else:
                branch.truncated = True
                return branch
            state = ScaledState.from_vector(eps, grid, res.x)
            branch.points.append(
                BranchPoint(eps, state, res.residual_norm, res.iterations, tuple(res.history)))
            logger.info("eps=%.6g accepted after %d Newton steps (|F|=%.2e)",
                        eps, res.iterations, res.residual_norm)
    return branch
