import numpy as np
import pytest

from edmbranch import SolverOptions, build_grid, continue_branch
from edmbranch.limit_state import ScaledState
from edmbranch.physical import diagnostics, reconstruct, unscaled_residual


@pytest.fixture(scope="module")
def physical(desk_branch, params):
    return [(p.eps, reconstruct(p.state, params)) for p in desk_branch.points[1:]]


@pytest.fixture(scope="module")
def diags(physical):
    return [(eps, diagnostics(ph)) for eps, ph in physical]


def test_frequency_is_exact(physical, params):
    for eps, ph in physical:
        assert ph.omega == params.m - eps
        assert ph.eps == pytest.approx(eps, rel=1e-15)


def test_eps_zero_rejected(params, limit_state):
    with pytest.raises(ValueError):
        reconstruct(limit_state, params)


def test_zero_state_is_flat(params):
    g = build_grid(200, 40.0)
    ph = reconstruct(ScaledState.from_vector(1e-2, g, np.zeros(4 * g.n)), params)
    assert np.all(ph.A.values == 1.0) and np.all(ph.T.values == 1.0)
    d = diagnostics(ph)
    assert d.adm_mass == 0.0
    assert np.all(unscaled_residual(ph) == 0.0)


def test_grid_is_stretched(physical, desk_grid):
    eps, ph = physical[-1]
    assert np.allclose(ph.grid_phys.r, desk_grid.r / np.sqrt(eps), rtol=1e-14)


def test_metric_coefficient_bounds(diags):
    for eps, d in diags:
        assert 0 < d.min_A <= d.max_A <= 1


def test_unscaled_residuals_small(diags):
    for eps, d in diags:
        assert np.max(d.unscaled_residual_norms) < 1e-12


def test_adm_mass_scaling_and_prefactor(diags, limit_state, params):
    eps = np.array([e for e, _ in diags])
    adm = np.array([d.adm_mass for _, d in diags])
    assert np.polyfit(np.log(eps), np.log(adm), 1)[0] == pytest.approx(0.5, abs=0.02)
    N = limit_state.grid.weights(2) @ limit_state.phi.values**2
    intercept = np.polyfit(np.sqrt(eps), adm / np.sqrt(eps), 2)[-1]
    assert intercept == pytest.approx(8 * np.pi * params.m * N, rel=1e-4)


def test_adm_plateau_flat(diags):
    assert max(d.adm_spread for _, d in diags) < 0.05


def test_norm_integral_tracks_limit_mass(diags, limit_state):
    N = limit_state.grid.weights(2) @ limit_state.phi.values**2
    eps, d = diags[0]
    assert d.norm_integral / np.sqrt(eps) == pytest.approx(N, rel=1e-3)


def test_sup_t_is_order_eps(diags):
    ratios = [d.sup_t / eps for eps, d in diags]
    assert max(ratios) / min(ratios) < 1.2


def test_extrapolated_tails_vanish(diags):
    for eps, d in diags:
        assert abs(d.T_inf - 1.0) < 1e-6
        assert abs(d.V_inf) < 1e-6


def test_tighter_tolerance_consistent(params, limit_state):
    loose = continue_branch(params, 1e-3, 2, SolverOptions(tol=1e-8), limit=limit_state)
    tight = continue_branch(params, 1e-3, 2, SolverOptions(tol=1e-12), limit=limit_state)
    a = diagnostics(reconstruct(loose.points[-1].state, params))
    b = diagnostics(reconstruct(tight.points[-1].state, params))
    assert a.adm_mass == pytest.approx(b.adm_mass, rel=1e-6)
