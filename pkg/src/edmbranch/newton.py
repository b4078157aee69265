"""Damped Newton iteration on sparse augmented systems."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Newton iteration failed; ``history`` holds the residual sup-norms."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class MetricBreakdownError(ArithmeticError):
    """1 + eps*alpha <= 0 somewhere: the metric coefficient A is not positive."""


@dataclass
class NewtonResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    history: list = field(default_factory=list)


# fun(x, track) -> (F, A) with A the augmented sparse Jacobian or None
SystemFunction = Callable[[np.ndarray, bool], tuple]


def newton(fun: SystemFunction, x0: np.ndarray, tol: float = 1e-10, max_iters: int = 30,
           max_halvings: int = 30, damping: bool = True) -> NewtonResult:
    x = np.array(x0, dtype=float)
    F, A = fun(x, True)
    norm = np.max(np.abs(F))
    history = [norm]
    for it in range(max_iters + 1):
        if norm < tol:
            return NewtonResult(x, norm, it, history)
        if it == max_iters:
            break
        rhs = np.zeros(A.shape[0])
        rhs[: len(F)] = -F
        try:
            dx = spla.splu(A).solve(rhs)[: len(x)]
        except RuntimeError as exc:  # exactly singular factor
            raise SolverError(f"singular Jacobian at iteration {it}: {exc}", history) from exc
        l2 = np.linalg.norm(F)
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = x + lam * dx
            try:
                F_trial = fun(trial, False)[0]
            except (MetricBreakdownError, FloatingPointError):
                F_trial = None
            if F_trial is not None and np.all(np.isfinite(F_trial)):
                if np.max(np.abs(F_trial)) < tol or not damping:
                    break
                if np.linalg.norm(F_trial) <= (1 - 1e-4 * lam) * l2:
                    break
            lam *= 0.5
        else:
            raise SolverError(f"step halving exhausted at iteration {it}", history)
        x = trial
        F, A = fun(x, True)
        norm = np.max(np.abs(F))
        history.append(norm)
        logger.debug("newton it=%d lambda=%g |F|=%.3e", it + 1, lam, norm)
    raise SolverError(f"no convergence in {max_iters} iterations (|F| = {norm:.3e})", history)
