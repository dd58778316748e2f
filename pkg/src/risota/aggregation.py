"""Analog uplink superposition and the server-side model update."""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ShapeError


@dataclass
class ReceivedSignal:
    y: np.ndarray
    noise_variance: float


def superpose(signals, channels, sigma_c2, rng, dim=None):
    """y = sum_i h_i x_i + z, with z of variance ``sigma_c2`` per real dimension.

    ``signals`` is a sequence (or ``(m, d)`` array) of complex vectors and
    ``channels`` the matching true effective channels. ``dim`` is needed only
    when there are no signals at all.
    """
    signals = [np.asarray(x, dtype=complex) for x in signals]
    channels = np.asarray(channels, dtype=complex).reshape(-1)
    if len(signals) != channels.shape[0]:
        raise ShapeError("one channel per signal required")
    if signals:
        dim = signals[0].shape[0]
        if any(x.shape != (dim,) for x in signals):
            raise ShapeError("signals must share one dimension")
        y = channels @ np.vstack(signals)
    else:
        if dim is None:
            raise ShapeError("dim required with no signals")
        y = np.zeros(dim, dtype=complex)
    if sigma_c2 < 0:
        raise ConfigurationError("noise variance must be non-negative")
    if sigma_c2 > 0:
        sd = np.sqrt(sigma_c2)
        y = y + sd * (rng.standard_normal(dim) + 1j * rng.standard_normal(dim))
    return ReceivedSignal(y=y, noise_variance=float(sigma_c2))


def server_update(w, received, beta_t):
    """Scale by 1/beta_t and keep the real part; returns ``(w_next, imag_energy)``."""
    if beta_t <= 0:
        raise ConfigurationError("beta_t must be positive")
    y = received.y if isinstance(received, ReceivedSignal) else np.asarray(received)
    scaled = y / beta_t
    return np.asarray(w) + scaled.real, float(np.sum(scaled.imag**2))
