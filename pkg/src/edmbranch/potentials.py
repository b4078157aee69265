"""Cumulative charge and the radial Newtonian kernel int f(s)/max(r,s) ds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tangent as tg
from .grid import RadialField, integrate_cumulative, trapezoid_cumulative


@dataclass
class ChargeProfile:
    Q: RadialField
    total: float


def cumulative_charge(phi: RadialField, rule: str = "trapezoid") -> ChargeProfile:
    """Q(r) = int_0^r phi**2 ds, origin cell integrated as r**(2p).

    The trapezoid rule matches the quadrature inside the nonlinear solvers;
    ``rule="cubic"`` is the fourth-order alternative of integrate_cumulative.
    """
    if phi.origin_power < 1:
        raise ValueError("cumulative_charge expects a field vanishing at the origin")
    p2 = 2 * phi.origin_power
    if rule == "trapezoid":
        Q = trapezoid_cumulative(phi.values**2, phi.r, p2)
    else:
        Q = integrate_cumulative(RadialField(phi.grid, phi.values**2, origin_power=p2),
                                 rule=rule).values
    return ChargeProfile(RadialField(phi.grid, Q, origin_power=p2 + 1, tail="bounded"), float(Q[-1]))


def kernel_sweeps(density, r, w):
    """Two-sweep evaluation of W_k = sum_i w_i density_i / max(r_k, r_i).

    Returns (W, S) where S_k = sum_{i<=k} w_i density_i.  Accepts plain arrays
    or Tangents.  Consecutive values obey W_{k+1} - W_k = -S_k h_k/(r_k r_{k+1})
    exactly, the discrete form of r**2 W' = -Q.
    """
    wd = w * density
    S = tg.cumsum(wd)
    outer = tg.cumsum(wd / r, reverse=True) - wd / r
    return S / r + outer, S


def newtonian_potential(phi: RadialField, rule: str = "trapezoid") -> RadialField:
    """W(r) = int_0^R phi(s)**2 / max(r, s) ds, truncated at R_max.

    The trapezoid version is the same-quadrature double sum; ``rule="cubic"``
    evaluates Q(r)/r + int_r^R phi**2/s ds with fourth-order cumulative sums.
    """
    if phi.origin_power < 1:
        raise ValueError("newtonian_potential expects a field vanishing at the origin")
    p2 = 2 * phi.origin_power
    if rule == "trapezoid":
        W, _ = kernel_sweeps(phi.values**2, phi.r, phi.grid.weights(p2))
    else:
        Q = cumulative_charge(phi, rule).Q.values
        inner = integrate_cumulative(
            RadialField(phi.grid, phi.values**2 / phi.r, origin_power=p2 - 1), rule=rule).values
        W = Q / phi.r + (inner[-1] - inner)
    return RadialField(phi.grid, np.asarray(W), origin_power=0, tail="decaying")
