import numpy as np
import pytest

from risota.exceptions import ClientSkippedError, DeepFadeError, ShapeError
from risota.learning import model_size, sgd_step
from risota.power import (
    PowerConfig, beta_i, build_signal, check_power, power_criterion, select_local_steps,
)


def one_class_client(rng, n=40, f=5, c=3, label=1):
    return rng.uniform(0, 1, (n, f)), np.full(n, label), model_size(f, c), c


def test_beta_i_examples():
    assert beta_i(1.0, 0.1, 2, 0.5) == pytest.approx(0.1)
    assert beta_i(2.0, 0.5, 4, 1j) == pytest.approx(2.0 * 0.5 / 4 * -1j)
    h = 0.3 - 0.8j
    b = beta_i(7.0, 0.2, 3, h)
    assert (b / 7.0) * h * 3 == pytest.approx(0.2, abs=1e-15)
    with pytest.raises(DeepFadeError):
        beta_i(1.0, 0.1, 1, 1e-16)


def test_build_signal_examples():
    w = np.arange(4.0)
    assert not np.any(build_signal(3 + 1j, w, w))
    e1 = np.eye(4)[0]
    np.testing.assert_array_equal(build_signal(1.0, e1, np.zeros(4)), e1)
    rng = np.random.default_rng(0)
    dw = rng.normal(size=50)
    b = 0.4 - 1.3j
    x = build_signal(b, dw, np.zeros(50))
    assert np.vdot(x, x).real == pytest.approx(abs(b) ** 2 * dw @ dw, rel=1e-12)
    with pytest.raises(ShapeError):
        build_signal(1.0, np.zeros(3), np.zeros(4))


def test_check_power_examples():
    x = np.array([1.0 + 1.0j, 0.0])
    ok, measured = check_power(x, 2.0)
    assert ok and measured == pytest.approx(2.0)
    assert check_power(np.zeros(3), 1.0)[0]
    assert not check_power(np.array([np.sqrt(1.01)]), 1.0)[0]


def test_power_criterion_examples():
    assert power_criterion(0.0, 1e9, 100, 1e3, 1e-9)
    eta, beta, tau, G = 0.1, 2.0, 5, 3.0
    assert power_criterion(eta, beta, tau, G, 3 * eta**2 * beta * tau * G**2)
    # with the channel-inverting scale the left side does not depend on tau
    lhs = [3 * eta**2 * abs(beta_i(4.0, 0.2, tau, 0.5 + 0.5j)) * tau * G**2 for tau in range(1, 8)]
    np.testing.assert_allclose(lhs, lhs[0], rtol=1e-12)
    assert lhs[0] == pytest.approx(3 * eta**2 * 4.0 * 0.2 * G**2 / abs(0.5 + 0.5j))


def test_unconstrained_client_runs_all_steps():
    rng = np.random.default_rng(1)
    X, y, d, c = one_class_client(rng)
    cfg = PowerConfig(power=1e9, beta_t=1.0, eta=0.1, G=1.0, tau_max=6)
    plan, traj = select_local_steps(np.zeros(d), X, y, 0.1, np.random.default_rng(0), cfg,
                                    1.0 + 0j, 0.5, c)
    assert plan.tau == 6 and not plan.clipped and traj.n_steps == 6
    np.testing.assert_array_equal(traj.steps[0], np.zeros(d))


def test_zero_gradients_run_all_steps():
    X = np.zeros((10, 3))
    y = np.zeros(10, dtype=int)
    d = model_size(3, 1)
    cfg = PowerConfig(power=1e-12, beta_t=1e6, eta=0.5, G=1.0, tau_max=4)
    plan, traj = select_local_steps(np.zeros(d), X, y, 0.5, np.random.default_rng(0), cfg,
                                    1e-3, 1.0, 1)
    assert plan.tau == 4 and not plan.clipped and plan.measured_power == 0.0


def test_clipping_lands_exactly_on_budget():
    rng = np.random.default_rng(2)
    X, y, d, c = one_class_client(rng)
    w = np.zeros(d)
    beta_t, alpha, h_hat, eta = 3.0, 0.25, 0.2 - 0.1j, 0.1
    # required power at tau=1, replayed with the same SGD stream
    w1, _ = sgd_step(w, X, y, eta, np.random.default_rng(5), c, 32)
    required = abs(beta_i(beta_t, alpha, 1, h_hat)) ** 2 * np.sum((w1 - w) ** 2)
    cfg = PowerConfig(power=0.99 * required, beta_t=beta_t, eta=eta, G=1.0, tau_max=5)
    plan, traj = select_local_steps(w, X, y, eta, np.random.default_rng(5), cfg, h_hat, alpha, c)
    assert plan.clipped and plan.tau == 1
    assert plan.measured_power == pytest.approx(cfg.power, rel=1e-12)
    assert check_power(build_signal(plan.beta, traj.final, w), cfg.power)[0]
    unclipped = beta_i(beta_t, alpha, 1, h_hat)
    assert np.angle(plan.beta) == pytest.approx(np.angle(unclipped))


def test_greedy_stops_at_last_feasible_step():
    rng = np.random.default_rng(3)
    X, y, d, c = one_class_client(rng)
    w = np.zeros(d)
    beta_t, alpha, h_hat, eta = 1.0, 1.0, 1.0, 0.2
    # replay the trajectory to find the first step whose signal power grows past tau=1
    replay = np.random.default_rng(11)
    cur, powers = w, []
    for k in range(1, 9):
        cur, _ = sgd_step(cur, X, y, eta, replay, c, 32)
        powers.append(np.sum((cur - w) ** 2) / k**2)
    budget = powers[0] * 1.0000001
    expected = next((k for k in range(1, 8) if powers[k] > budget), 8)
    cfg = PowerConfig(power=budget, beta_t=beta_t, eta=eta, G=1.0, tau_max=8)
    plan, traj = select_local_steps(w, X, y, eta, np.random.default_rng(11), cfg, h_hat, alpha, c)
    assert plan.tau == expected and traj.n_steps == expected
    assert plan.measured_power <= budget * (1 + 1e-9)


def test_deep_fade_sends_nothing():
    rng = np.random.default_rng(4)
    X, y, d, c = one_class_client(rng)
    cfg = PowerConfig(power=1.0, beta_t=1.0, eta=0.1, G=1.0, tau_max=3)
    plan, _ = select_local_steps(np.zeros(d), X, y, 0.1, rng, cfg, 1e-16, 0.1, c)
    assert plan.clipped and plan.deep_fade and plan.beta == 0 and plan.measured_power == 0


def test_empty_client_is_skipped():
    cfg = PowerConfig(power=1.0, beta_t=1.0, eta=0.1, G=1.0, tau_max=3)
    with pytest.raises(ClientSkippedError):
        select_local_steps(np.zeros(8), np.zeros((0, 3)), np.zeros(0, dtype=int), 0.1,
                           np.random.default_rng(0), cfg, 1.0, 0.1, 2)
