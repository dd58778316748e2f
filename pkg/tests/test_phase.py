import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risota.channel import PhaseVector, complex_normal
from risota.exceptions import ConfigurationError, NumericalError
from risota.phase import (
    LAMBDA_FLOOR, QuadraticForm, build_target, f1, gradient_f1, lambda_bound,
    objective_f, random_phases, sca_optimize, surrogate,
)


def central_differences(fun, x, h=1e-6):
    grad = np.empty_like(x)
    for k in range(x.shape[0]):
        e = np.zeros_like(x)
        e[k] = h
        grad[k] = (fun(x + e) - fun(x - e)) / (2 * h)
    return grad


def grid_minimum(g, s, points=10_000):
    """Exhaustive minimum of |s - g^H e^{j phi}|^2 over a uniform angle grid (N <= 2)."""
    grid = -np.pi + 2 * np.pi * np.arange(points) / points
    c = np.conj(g)
    if g.shape[0] == 1:
        return float(np.min(np.abs(s - c[0] * np.exp(1j * grid)) ** 2))
    best = np.inf
    inner = c[1] * np.exp(1j * grid)
    for chunk in np.array_split(grid, 20):
        r = s - c[0] * np.exp(1j * chunk)
        best = min(best, float(np.min(np.abs(r[:, None] - inner[None, :]) ** 2)))
    return best


def test_build_target_examples():
    h = 3 * 0.05**2 * 2.0 * 0.25 * 4.0**2 / 1.5
    assert build_target(0.05, 2.0, 0.25, 4.0, 1.5, h) == pytest.approx(0.0, abs=1e-15)
    assert build_target(0.0, 2.0, 0.25, 4.0, 1.5, 0.3 - 0.2j) == pytest.approx(-0.3 + 0.2j)
    assert build_target(0.01, 100.0, 0.1, 10.0, 1.0, 0.0) == pytest.approx(0.3, rel=1e-12)
    with pytest.raises(ConfigurationError):
        build_target(0.01, 1.0, 0.1, 1.0, 0.0, 0.0)


def test_objective_f_examples():
    theta = PhaseVector(np.array([0.4, -1.1]))
    assert objective_f(theta, np.zeros(2), 0.5 - 2j) == pytest.approx(abs(0.5 - 2j) ** 2)
    g = np.array([0.3 + 1j, -2.0])
    assert objective_f(theta, g, np.vdot(g, theta.coefficients)) == pytest.approx(0.0, abs=1e-24)
    assert objective_f(PhaseVector([np.pi]), np.ones(1), 1.0) == pytest.approx(4.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 16), st.integers(0, 2**31 - 1))
def test_f1_expansion_identity(n, seed):
    rng = np.random.default_rng(seed)
    g = complex_normal(rng, n)
    s = complex_normal(rng, 1)[0]
    phi = rng.uniform(-np.pi, np.pi, n)
    quad = QuadraticForm.from_channel(g, s)
    assert np.allclose(quad.U, quad.U.conj().T, atol=1e-12)
    full = objective_f(PhaseVector(phi), g, s)
    assert abs(f1(phi, quad) - (full - quad.const_term)) < 1e-12 * max(1.0, full)


def test_gradient_one_dimensional_case():
    quad = QuadraticForm(U=np.array([[1.0 + 0j]]), v=np.array([1.0 + 0j]), const_term=1.0, s=1.0)
    assert gradient_f1(np.array([np.pi / 2]), quad)[0] == pytest.approx(2.0)


def test_gradient_vanishes_at_stationarity():
    rng = np.random.default_rng(3)
    phi = rng.uniform(-np.pi, np.pi, 6)
    U = complex_normal(rng, (6, 6))
    U = U + U.conj().T
    quad = QuadraticForm(U=U, v=U @ np.exp(1j * phi), const_term=0.0, s=0.0)
    np.testing.assert_allclose(gradient_f1(phi, quad), 0.0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 16), st.integers(0, 2**31 - 1))
def test_gradient_matches_finite_differences(n, seed):
    rng = np.random.default_rng(seed)
    quad = QuadraticForm.from_channel(complex_normal(rng, n), complex_normal(rng, 1)[0])
    phi = rng.uniform(-np.pi, np.pi, n)
    fd = central_differences(lambda x: f1(x, quad), phi)
    an = gradient_f1(phi, quad)
    scale = max(1.0, np.max(np.abs(fd)))
    assert np.max(np.abs(an - fd)) / scale < 1e-5


def test_lambda_bound_examples():
    zero = QuadraticForm.from_channel(np.zeros(3), 0.0)
    assert lambda_bound(zero) == LAMBDA_FLOOR
    one = QuadraticForm(U=np.array([[1.0 + 0j]]), v=np.array([1.0 + 0j]), const_term=1.0, s=1.0)
    assert lambda_bound(one) == pytest.approx(6.0)


@pytest.mark.parametrize("seed", range(5))
def test_surrogate_dominates(seed):
    rng = np.random.default_rng(seed)
    n = 8
    quad = QuadraticForm.from_channel(complex_normal(rng, n), 3 * complex_normal(rng, 1)[0])
    lam = lambda_bound(quad)
    anchor = rng.uniform(-np.pi, np.pi, n)
    for _ in range(1000):
        phi = anchor + rng.normal(scale=rng.choice([0.01, 0.3, 3.0]), size=n)
        assert surrogate(phi, anchor, quad, lam) >= f1(phi, quad) - 1e-12


def test_sca_zero_channel_returns_init():
    init = np.array([0.1, -0.5, 2.0])
    theta, state = sca_optimize(np.zeros(3), 1.0 + 1j, init, max_iters=10)
    np.testing.assert_array_equal(theta.angles, init)
    assert state.iteration == 1 and state.converged


def test_sca_scalar_case_matches_grid():
    theta, state = sca_optimize(np.ones(1), 2.0, np.array([1.0]), max_iters=50, tol=1e-12)
    assert theta.angles[0] == pytest.approx(0.0, abs=1e-6)
    f_final = objective_f(theta, np.ones(1), 2.0)
    assert f_final == pytest.approx(1.0, abs=1e-10)
    assert abs(f_final - grid_minimum(np.ones(1), 2.0)) < 1e-3


@pytest.mark.parametrize("seed", range(4))
def test_sca_two_elements_matches_grid(seed):
    rng = np.random.default_rng(100 + seed)
    g = complex_normal(rng, 2)
    s = complex_normal(rng, 1)[0] * 2
    theta, _ = sca_optimize(g, s, max_iters=5000, tol=1e-12)
    assert objective_f(theta, g, s) - grid_minimum(g, s) < 1e-3


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 16), st.integers(0, 2**31 - 1))
def test_sca_trace_monotone_and_unit_modulus(n, seed):
    rng = np.random.default_rng(seed)
    g = complex_normal(rng, n)
    s = 4 * complex_normal(rng, 1)[0]
    theta, state = sca_optimize(g, s, random_phases(rng, n).angles, max_iters=100)
    trace = np.array(state.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12)
    assert np.all(np.abs(np.abs(theta.coefficients) - 1) < 1e-12)


def test_sca_argument_checks():
    with pytest.raises(ConfigurationError):
        sca_optimize(np.ones(2), 1.0, max_iters=0)
    with pytest.raises(ConfigurationError):
        sca_optimize(np.ones(2), 1.0, tol=-1.0)
    with pytest.raises(NumericalError):
        sca_optimize(np.array([np.nan, 1.0]), 1.0)
