"""Block-fading channels for a single-RIS uplink.

Large-scale gains follow the free-space style models for the direct
user-PS link and for the RIS-assisted link; small-scale fading is i.i.d.
CN(0, 1) per scalar path, redrawn every round.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, InvalidGeometryError, ShapeError

SPEED_OF_LIGHT = 3e8


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class Geometry:
    """Static node placement in meters."""

    ps_position: np.ndarray
    ris_position: np.ndarray
    user_positions: np.ndarray

    def __post_init__(self):
        ps = np.asarray(self.ps_position, dtype=float).reshape(-1)
        ris = np.asarray(self.ris_position, dtype=float).reshape(-1)
        users = np.atleast_2d(np.asarray(self.user_positions, dtype=float))
        if ps.shape != (3,) or ris.shape != (3,) or users.shape[1:] != (3,):
            raise InvalidGeometryError("positions must be 3-vectors")
        if users.shape[0] < 1:
            raise InvalidGeometryError("need at least one user")
        if not (np.all(np.isfinite(ps)) and np.all(np.isfinite(ris))
                and np.all(np.isfinite(users))):
            raise InvalidGeometryError("positions must be finite")
        object.__setattr__(self, "ps_position", ps)
        object.__setattr__(self, "ris_position", ris)
        object.__setattr__(self, "user_positions", users)

    @classmethod
    def uniform_users(cls, rng, n_users, x_range=(-20.0, 0.0),
                      y_range=(-30.0, 30.0), z=0.0,
                      ps_position=(-50.0, 0.0, 10.0),
                      ris_position=(0.0, 0.0, 10.0)):
        """Drop ``n_users`` uniformly in an axis-aligned box of the x-y plane."""
        if n_users < 1:
            raise InvalidGeometryError("need at least one user")
        xs = rng.uniform(x_range[0], x_range[1], size=n_users)
        ys = rng.uniform(y_range[0], y_range[1], size=n_users)
        users = np.column_stack([xs, ys, np.full(n_users, float(z))])
        return cls(np.asarray(ps_position), np.asarray(ris_position), users)

    @property
    def n_users(self):
        return self.user_positions.shape[0]

    @property
    def user_ps_distances(self):
        return np.linalg.norm(self.user_positions - self.ps_position, axis=1)

    @property
    def user_ris_distances(self):
        return np.linalg.norm(self.user_positions - self.ris_position, axis=1)

    @property
    def ris_ps_distance(self):
        return float(np.linalg.norm(self.ris_position - self.ps_position))


@dataclass(frozen=True)
class PathLossConfig:
    """Linear-scale path-loss parameters; use :meth:`from_db` for dBi gains."""

    g_ps: float = float(db_to_linear(5.0))
    g_u: float = 1.0
    g_ris: float = float(db_to_linear(5.0))
    f_c: float = 915e6
    pl_exponent: float = 4.0
    element_size_x: float = None
    element_size_y: float = None

    def __post_init__(self):
        if min(self.g_ps, self.g_u, self.g_ris) <= 0:
            raise ConfigurationError("antenna gains must be positive")
        if self.f_c <= 0:
            raise ConfigurationError("carrier frequency must be positive")
        if self.element_size_x is None:
            object.__setattr__(self, "element_size_x", 3e7 / self.f_c)
        if self.element_size_y is None:
            object.__setattr__(self, "element_size_y", 3e7 / self.f_c)

    @classmethod
    def from_db(cls, g_ps_dbi=5.0, g_u_dbi=0.0, g_ris_dbi=5.0, f_c=915e6,
                pl_exponent=4.0, **kwargs):
        return cls(g_ps=float(db_to_linear(g_ps_dbi)),
                   g_u=float(db_to_linear(g_u_dbi)),
                   g_ris=float(db_to_linear(g_ris_dbi)),
                   f_c=f_c, pl_exponent=pl_exponent, **kwargs)

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.f_c


def _check_distance(d):
    d = np.asarray(d, dtype=float)
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise InvalidGeometryError("distances must be finite and positive")
    return d


def path_loss_direct(distance, cfg):
    """Linear power gain of the user-PS link."""
    d = _check_distance(distance)
    gain = cfg.g_ps * cfg.g_u * (cfg.wavelength / (4 * np.pi * d)) ** cfg.pl_exponent
    return gain if gain.ndim else float(gain)


def path_loss_ris(d_ur, d_rp, n_elements, cfg):
    """Linear power gain of the RIS-assisted link (coherent, N-element)."""
    d_ur = _check_distance(d_ur)
    d_rp = _check_distance(d_rp)
    if n_elements < 1:
        raise ConfigurationError("n_elements must be >= 1")
    gain = (cfg.g_ps * cfg.g_u * cfg.g_ris * n_elements**2
            * cfg.element_size_x * cfg.element_size_y * cfg.wavelength**2
            / (64 * np.pi**3 * d_rp**2 * d_ur**2))
    return gain if gain.ndim else float(gain)


@dataclass(frozen=True)
class LinkGains:
    """Per-path mean powers: direct (m,), user-RIS per element (m,), RIS-PS per element."""

    direct: np.ndarray
    user_ris: np.ndarray
    ris_ps: float


def link_gains(geometry, cfg):
    """Split the RIS path loss into per-element user-RIS and RIS-PS powers.

    The single-element RIS gain K / (d_RP^2 d_UR^2) is factored as
    sqrt(K)/d_UR^2 times sqrt(K)/d_RP^2, so that the product of the two hop
    powers reproduces the per-element cascaded gain and N coherently added
    elements give back the N^2 law.
    """
    direct = np.atleast_1d(path_loss_direct(geometry.user_ps_distances, cfg))
    k = path_loss_ris(1.0, 1.0, 1, cfg)
    user_ris = np.sqrt(k) / _check_distance(geometry.user_ris_distances) ** 2
    ris_ps = np.sqrt(k) / geometry.ris_ps_distance**2
    return LinkGains(direct=direct, user_ris=user_ris, ris_ps=float(ris_ps))


def complex_normal(rng, shape, variance=1.0):
    """Circularly-symmetric complex Gaussian draws with the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass
class ChannelRealization:
    """One round of true channels for m clients and an N-element RIS."""

    h_ub: np.ndarray
    h_ur: np.ndarray
    h_rb: np.ndarray
    round_index: int = 0

    def __post_init__(self):
        self.h_ub = np.atleast_1d(np.asarray(self.h_ub, dtype=complex))
        self.h_ur = np.atleast_2d(np.asarray(self.h_ur, dtype=complex))
        self.h_rb = np.asarray(self.h_rb, dtype=complex).reshape(-1)
        if self.h_ur.shape != (self.h_ub.shape[0], self.h_rb.shape[0]):
            raise ShapeError(
                f"h_ur shape {self.h_ur.shape} inconsistent with "
                f"{self.h_ub.shape[0]} clients and {self.h_rb.shape[0]} elements")

    @property
    def n_clients(self):
        return self.h_ub.shape[0]

    @property
    def n_elements(self):
        return self.h_rb.shape[0]

    def cascaded(self):
        return cascaded_channel(self.h_ur, self.h_rb)

    def effective(self, theta=None):
        """Effective channels of all clients; ``theta=None`` drops the RIS path."""
        if theta is None:
            return self.h_ub.copy()
        return effective_channel(self.h_ub, self.cascaded(), theta)

    def for_client(self, i):
        return ChannelRealization(self.h_ub[i:i + 1], self.h_ur[i:i + 1],
                                  self.h_rb, self.round_index)


@dataclass
class EstimatedChannels(ChannelRealization):
    estimation_variance: float = 0.0


@dataclass(frozen=True)
class PhaseVector:
    """Unit-modulus RIS reflection coefficients exp(j * angles)."""

    angles: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "angles",
                           np.asarray(self.angles, dtype=float).reshape(-1))

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n))

    @property
    def coefficients(self):
        return np.exp(1j * self.angles)

    def __len__(self):
        return self.angles.shape[0]


def sample_channels(rng, direct_gain, user_ris_gain, ris_ps_gain, n_elements,
                    round_index=0):
    """Draw a realization from explicit per-path mean powers."""
    direct_gain = np.atleast_1d(np.asarray(direct_gain, dtype=float))
    user_ris_gain = np.atleast_1d(np.asarray(user_ris_gain, dtype=float))
    m = direct_gain.shape[0]
    h_ub = np.sqrt(direct_gain) * complex_normal(rng, m)
    h_ur = np.sqrt(user_ris_gain)[:, None] * complex_normal(rng, (m, n_elements))
    h_rb = np.sqrt(ris_ps_gain) * complex_normal(rng, n_elements)
    return ChannelRealization(h_ub, h_ur, h_rb, round_index)


def sample_round(rng, geometry, cfg, n_elements, round_index=0):
    """Draw one round of block-fading channels for every user in ``geometry``."""
    gains = link_gains(geometry, cfg)
    return sample_channels(rng, gains.direct, gains.user_ris, gains.ris_ps,
                           n_elements, round_index)


def estimate_csi(true, variance, rng):
    """Add i.i.d. CN(0, variance) estimation error to every scalar path."""
    if variance < 0:
        raise ConfigurationError("estimation variance must be non-negative")
    if variance == 0:
        return EstimatedChannels(true.h_ub.copy(), true.h_ur.copy(),
                                 true.h_rb.copy(), true.round_index, 0.0)
    return EstimatedChannels(
        true.h_ub + complex_normal(rng, true.h_ub.shape, variance),
        true.h_ur + complex_normal(rng, true.h_ur.shape, variance),
        true.h_rb + complex_normal(rng, true.h_rb.shape, variance),
        true.round_index, float(variance))


def cascaded_channel(h_ur, h_rb):
    """g with g^H theta = h_ur^H diag(theta) h_rb; works row-wise on (m, N)."""
    h_ur = np.asarray(h_ur, dtype=complex)
    h_rb = np.asarray(h_rb, dtype=complex)
    if h_ur.shape[-1] != h_rb.shape[-1]:
        raise ShapeError("h_ur and h_rb must have the same number of elements")
    return h_ur * np.conj(h_rb)


def _coefficients(theta):
    if isinstance(theta, PhaseVector):
        return theta.coefficients
    return np.asarray(theta, dtype=complex)


def effective_channel(h_ub, g, theta):
    """h_ub + g^H theta, broadcasting over a leading client axis of ``g``."""
    coeffs = _coefficients(theta)
    g = np.asarray(g, dtype=complex)
    if g.shape[-1] != coeffs.shape[-1]:
        raise ShapeError("cascaded channel and phase vector lengths differ")
    return h_ub + np.conj(g) @ coeffs
