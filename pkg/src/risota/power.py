"""Client-side dynamic power control and local-step selection."""

from dataclasses import dataclass

import numpy as np

from .exceptions import ClientSkippedError, ConfigurationError, DeepFadeError, ShapeError
from .learning import LocalTrajectory, sgd_step

DEEP_FADE_FLOOR = 1e-15
POWER_SLACK = 1e-9


@dataclass
class PowerConfig:
    power: float
    beta_t: float
    eta: float
    G: float
    tau_max: int

    def __post_init__(self):
        if np.any(np.asarray(self.power) <= 0):
            raise ConfigurationError("transmit power must be positive")
        if self.beta_t <= 0:
            raise ConfigurationError("beta_t must be positive")
        if self.tau_max < 1:
            raise ConfigurationError("tau_max must be >= 1")


@dataclass
class ClientRoundPlan:
    tau: int
    beta: complex
    clipped: bool
    measured_power: float
    deep_fade: bool = False


def beta_i(beta_t, alpha, tau, h_hat):
    """Channel-inverting client scale beta_t * alpha / (tau * h_hat)."""
    if tau < 1:
        raise ConfigurationError("tau must be >= 1")
    if abs(h_hat) < DEEP_FADE_FLOOR:
        raise DeepFadeError(f"|h_hat| = {abs(h_hat):.3e} below floor")
    return beta_t * alpha / (tau * complex(h_hat))


def build_signal(beta, w_final, w_init):
    w_final = np.asarray(w_final)
    w_init = np.asarray(w_init)
    if w_final.shape != w_init.shape:
        raise ShapeError("model dimensions differ")
    return complex(beta) * (w_final - w_init)


def check_power(x, power):
    measured = float(np.vdot(x, x).real)
    return measured <= power * (1 + POWER_SLACK), measured


def power_criterion(eta, beta_mag, tau, G, power):
    return 3.0 * eta**2 * beta_mag * tau * G**2 <= power


def select_local_steps(w, X, y, eta, rng, cfg, h_hat, alpha, n_classes,
                       power=None, batch_size=32):
    """Grow local steps greedily while the transmit signal fits the budget.

    After each SGD step ``k`` the candidate scale for ``tau = k`` is formed and
    the resulting ``||x||^2`` compared with the budget; the last feasible
    ``k`` is kept. If ``tau = 1`` already overshoots, the scale's magnitude is
    shrunk so the signal lands exactly on the budget.
    """
    if X.shape[0] == 0:
        raise ClientSkippedError("client has no local data")
    p = cfg.power if power is None else power
    w = np.asarray(w, dtype=float)
    traj = LocalTrajectory(steps=[w.copy()])

    if abs(h_hat) < DEEP_FADE_FLOOR:
        w_next, grad = sgd_step(w, X, y, eta, rng, n_classes, batch_size)
        traj.steps.append(w_next)
        traj.grad_norms.append(float(np.linalg.norm(grad)))
        return ClientRoundPlan(1, 0j, True, 0.0, deep_fade=True), traj

    current = w
    for k in range(1, cfg.tau_max + 1):
        w_next, grad = sgd_step(current, X, y, eta, rng, n_classes, batch_size)
        beta = beta_i(cfg.beta_t, alpha, k, h_hat)
        needed = abs(beta) ** 2 * float(np.sum((w_next - w) ** 2))
        if needed > p:
            if k > 1:
                break
            scale = np.sqrt(p / needed)
            traj.steps.append(w_next)
            traj.grad_norms.append(float(np.linalg.norm(grad)))
            _, measured = check_power(build_signal(beta * scale, w_next, w), p)
            return ClientRoundPlan(1, beta * scale, True, measured), traj
        traj.steps.append(w_next)
        traj.grad_norms.append(float(np.linalg.norm(grad)))
        current = w_next

    tau = traj.n_steps
    beta = beta_i(cfg.beta_t, alpha, tau, h_hat)
    _, measured = check_power(build_signal(beta, traj.final, w), p)
    return ClientRoundPlan(tau, beta, False, measured), traj
