"""Convergence-bound terms evaluated on realized run logs.

Expectations over channel and CSI randomness are replaced by the realized
per-round values; the result is a diagnostic, not a certificate.
"""

from dataclasses import dataclass, fields

import numpy as np

from .exceptions import IncompleteLogError, SingularBoundError
from .learning import loss_and_gradient, per_sample_gradients, per_sample_gradient_norms

_REQUIRED = ("beta_t", "beta_mag", "power_limit", "alpha", "ratio")


@dataclass
class BoundConstants:
    L: float
    sigma2: float
    G: float
    eta: float = 0.0
    T: int = 1
    F_w0: float = 0.0
    F_star: float = 0.0
    noise_variance: float = 0.0

    @property
    def step_size_ok(self):
        """Whether eta <= 1/L, the step-size condition behind the bound."""
        return self.L <= 0 or self.eta <= 1.0 / self.L


@dataclass
class BoundTerms:
    optimization_error: float
    channel_noise_error: float
    local_update_error: float
    statistical_error: float
    channel_estimation_error: float

    @property
    def total(self):
        return (self.optimization_error + self.channel_noise_error
                + self.local_update_error + self.statistical_error
                + self.channel_estimation_error)

    def as_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["total"] = self.total
        return d


def _inv_sq(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, 1.0 / np.maximum(x, 1e-300) ** 2, np.inf)


def bound_terms(logs, consts):
    """Five-term gradient-norm bound from per-round logs."""
    if not logs:
        raise IncompleteLogError("no round logs")
    for log in logs:
        for name in _REQUIRED:
            value = getattr(log, name, None)
            if value is None or (isinstance(value, list) and not value):
                raise IncompleteLogError(f"round {getattr(log, 'round', '?')}: missing {name}")

    T = len(logs)
    alpha = np.asarray(logs[0].alpha, dtype=float)
    power = np.asarray(logs[0].power_limit, dtype=float)
    m = alpha.shape[0]
    beta_t = np.array([log.beta_t for log in logs], dtype=float)
    beta_mag = np.array([log.beta_mag for log in logs], dtype=float)
    ratio = np.array([log.ratio for log in logs], dtype=complex)

    L, eta, G = consts.L, consts.eta, consts.G
    optimization = 2.0 * (consts.F_w0 - consts.F_star) / (consts.T * eta)
    inv_beta_bar2 = _inv_sq(beta_t).mean()
    channel_noise = L * consts.noise_variance * inv_beta_bar2 / eta if consts.noise_variance else 0.0
    inv_beta_i2 = _inv_sq(beta_mag).mean(axis=0)
    with np.errstate(invalid="ignore"):
        local_update = (2.0 * m * L**2 / (9.0 * eta**2 * G**2)
                        * float(np.sum(alpha**2 * power**2 * inv_beta_i2)))
    # time-average per client first: a constant ratio of 1 then stays exact
    statistical = L * eta * consts.sigma2 * float(np.sum(alpha**2 * np.mean(np.abs(ratio) ** 2, axis=0)))
    estimation = 2.0 * m * G**2 * float(np.sum(alpha**2 * np.mean(np.abs(1.0 - ratio) ** 2, axis=0)))
    return BoundTerms(max(optimization, 0.0), channel_noise, local_update,
                      statistical, estimation)


def estimation_constant(est_var, n_elements, h_ub_min, h_ur_max, h_rb_max):
    """Estimation-error constant sigma^2 (1 + N^2 (a^2 + b^2 + sigma^2)) / h_min^2."""
    if h_ub_min <= 0:
        raise SingularBoundError("minimum direct-link magnitude is zero")
    return (est_var * (1.0 + n_elements**2 * (h_ur_max**2 + h_rb_max**2 + est_var))
            / h_ub_min**2)


def estimation_bounds(C, consts, alpha):
    """Upper bounds on the statistical and channel-estimation terms."""
    alpha = np.asarray(alpha, dtype=float)
    s = float(np.sum(alpha**2))
    m = alpha.shape[0]
    return (consts.L * consts.eta * consts.sigma2 * s * (1.0 + C),
            2.0 * m * consts.G**2 * s * C)


def estimate_smoothness(grad_fn, w, rng, n_pairs=4, power_iters=12, radius=1e-3):
    """Largest ||grad(a) - grad(b)|| / ||a - b|| over probe pairs.

    Each pair's direction is sharpened by a few power iterations on the
    gradient difference so the ratio approaches the top curvature.
    """
    w = np.asarray(w, dtype=float)
    g0 = grad_fn(w)
    best = 0.0
    for _ in range(n_pairs):
        v = rng.standard_normal(w.shape)
        v /= np.linalg.norm(v)
        for _ in range(power_iters):
            diff = grad_fn(w + radius * v) - g0
            ratio = np.linalg.norm(diff) / radius
            best = max(best, ratio)
            nrm = np.linalg.norm(diff)
            if nrm == 0:
                break
            v = diff / nrm
    return best


def estimate_constants(w, X, y, n_classes, rng, safety=2.0, n_pairs=4):
    """Probe L, sigma^2 and G for softmax regression on one dataset."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    grad_fn = lambda v: loss_and_gradient(v, X, y, n_classes)[1]  # noqa: E731
    L = estimate_smoothness(grad_fn, w, rng, n_pairs=n_pairs)
    if X.shape[0] > 1:
        per = per_sample_gradients(w, X, y, n_classes)
        sigma2 = float(np.mean(np.sum((per - per.mean(axis=0)) ** 2, axis=1)))
    else:
        sigma2 = 0.0
    G = float(per_sample_gradient_norms(w, X, y, n_classes).max())
    return BoundConstants(L=safety * L, sigma2=safety * sigma2, G=safety * G)
