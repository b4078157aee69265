"""Sparse tangent engine, damped Newton and the reduced Jacobian."""

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from edmbranch import tangent as tg
from edmbranch.newton import SolverError, newton
from edmbranch.operators import ReducedJacobian


def compound(x, track):
    """A residual touching every rule: products, quotients, sqrt, exp, cumsums."""
    tape = tg.Tape(x, track=track)
    a, b = tape.variables(x, [len(x) // 2] * 2)
    s = tg.cumsum(a * b)
    t = tg.cumsum(a.square() / (1.0 + b.square()), reverse=True)
    M = sp.diags([np.ones(len(a)), 0.5 * np.ones(len(a) - 1)], [0, 1], format="csr")
    r1 = tg.sqrt(1.0 + a.square()) * tg.exp(0.1 * s) - 2.0 * b + (a * t).apply(M)
    r2 = b ** 3 - s / (2.0 + t) + 3.0 * a
    F = tg.concat([r1, r2])
    return F.values, (tape.augmented([r1, r2]) if track else None)


def test_tangent_jacobian_matches_finite_differences():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, 12)
    F0, A = compound(x, True)
    J = ReducedJacobian(A, len(x)).to_dense()
    fd = np.empty_like(J)
    for j in range(len(x)):
        dx = np.zeros_like(x)
        dx[j] = 1e-6
        fd[:, j] = (compound(x + dx, False)[0] - compound(x - dx, False)[0]) / 2e-6
    assert np.max(np.abs(J - fd)) < 1e-7


def test_scalar_indexing_and_constants():
    x = np.array([1.0, 2.0, 3.0])
    tape = tg.Tape(x)
    (v,) = tape.variables(x, [3])
    last = v[2] * v[0]
    assert last.values.shape == (1,)
    assert last.jac.toarray()[0, :3].tolist() == [3.0, 0.0, 1.0]
    assert tape.constant([1.0]).jac is None
    assert np.array_equal(tg.values(x), x)


def test_reduced_jacobian_matvec_and_solve():
    x = np.linspace(0.1, 1.0, 8)
    _, A = compound(x, True)
    J = ReducedJacobian(A, len(x))
    D = J.to_dense(block=3)
    v = np.arange(8.0)
    assert np.allclose(J.matvec(v), D @ v, atol=1e-12)
    assert np.allclose(D @ J.solve(v), v, atol=1e-10)
    assert np.allclose(D.T @ J.solve_transpose(v), v, atol=1e-10)
    assert J.sigma_min() == pytest.approx(np.linalg.svd(D, compute_uv=False).min(), rel=1e-6)
    w = np.linspace(1, 2, 8)
    scaled = np.diag(np.sqrt(w)) @ D @ np.diag(1 / np.sqrt(w))
    assert J.sigma_min(w, w) == pytest.approx(np.linalg.svd(scaled, compute_uv=False).min(),
                                              rel=1e-6)


def test_newton_solves_and_reports_history():
    target = np.linspace(-1, 1, 10)

    def fun(x, track):
        tape = tg.Tape(x, track=track)
        (u,) = tape.variables(x, [10])
        r = u ** 3 + u - (target ** 3 + target)
        return r.values, (tape.augmented([r]) if track else None)

    res = newton(fun, np.full(10, 3.0), tol=1e-12)
    assert np.max(np.abs(res.x - target)) < 1e-11
    assert res.history[-1] < 1e-12 and len(res.history) == res.iterations + 1
    assert newton(fun, target, tol=1e-12).iterations == 0


def test_newton_failure_carries_history():
    def fun(x, track):  # x**2 + 1 = 0 has no real root
        tape = tg.Tape(x, track=track)
        (u,) = tape.variables(x, [1])
        r = u.square() + 1.0
        return r.values, (tape.augmented([r]) if track else None)

    with pytest.raises(SolverError) as info:
        newton(fun, np.array([0.5]), max_iters=5)
    assert len(info.value.history) >= 1


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=30))
def test_cumsum_helpers_agree_with_numpy(vals):
    v = np.array(vals)
    assert np.array_equal(tg.cumsum(v), np.cumsum(v))
    assert np.allclose(tg.cumsum(v, reverse=True), np.cumsum(v[::-1])[::-1])
    tape = tg.Tape(v)
    (t,) = tape.variables(v, [len(v)])
    assert np.array_equal(tg.cumsum(t).values, np.cumsum(v))
