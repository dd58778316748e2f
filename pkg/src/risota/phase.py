"""RIS phase design by successive convex approximation.

The target client's least-squares fit ``|s - g^H theta|^2`` is rewritten in
the phase angles as ``f1(phi) = theta^H U theta - 2 Re{theta^H v}`` with
``U = g g^H`` and ``v = s g``. Each SCA iteration minimizes the quadratic
upper model ``f1(phi_j) + grad^T (phi - phi_j) + lam/2 ||phi - phi_j||^2``,
which reduces to a scaled gradient step.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import PhaseVector
from .exceptions import ConfigurationError, NumericalError, ShapeError

LAMBDA_FLOOR = 1e-12


@dataclass
class QuadraticForm:
    U: np.ndarray
    v: np.ndarray
    const_term: float
    s: complex

    @classmethod
    def from_channel(cls, g, s):
        g = np.asarray(g, dtype=complex).reshape(-1)
        return cls(U=np.outer(g, np.conj(g)), v=s * g,
                   const_term=float(abs(s) ** 2), s=complex(s))

    @property
    def n(self):
        return self.v.shape[0]


@dataclass
class ScaState:
    angles: np.ndarray
    lam: float
    objective_trace: list = field(default_factory=list)
    iteration: int = 0
    converged: bool = False


def build_target(eta, beta_t, alpha, G, power, h_ub):
    """Complex target s = 3 eta^2 beta_t alpha G^2 / P - h_ub."""
    if power <= 0:
        raise ConfigurationError("transmit power must be positive")
    return 3.0 * eta**2 * beta_t * alpha * G**2 / power - complex(h_ub)


def objective_f(theta, g, s):
    coeffs = theta.coefficients if isinstance(theta, PhaseVector) else np.asarray(theta)
    g = np.asarray(g, dtype=complex)
    if g.shape != coeffs.shape:
        raise ShapeError("g and theta lengths differ")
    return float(abs(s - np.vdot(g, coeffs)) ** 2)


def f1(angles, quad):
    theta = np.exp(1j * np.asarray(angles, dtype=float))
    return float(np.real(np.vdot(theta, quad.U @ theta))
                 - 2.0 * np.real(np.vdot(theta, quad.v)))


def gradient_f1(angles, quad):
    """Exact gradient of f1: 2 Im{conj(theta_n) ((U theta)_n - v_n)}."""
    theta = np.exp(1j * np.asarray(angles, dtype=float))
    return 2.0 * np.imag(np.conj(theta) * (quad.U @ theta - quad.v))


def lambda_bound(quad):
    """Gershgorin row-sum bound on the Hessian of f1; guarantees domination."""
    row = np.abs(quad.U).sum(axis=1).max() if quad.n else 0.0
    vmax = np.abs(quad.v).max() if quad.n else 0.0
    return max(2.0 * (2.0 * row + vmax), LAMBDA_FLOOR)


def surrogate(angles, anchor, quad, lam):
    """Quadratic upper model of f1 built at ``anchor``."""
    d = np.asarray(angles, dtype=float) - anchor
    return f1(anchor, quad) + gradient_f1(anchor, quad) @ d + 0.5 * lam * d @ d


def random_phases(rng, n):
    return PhaseVector(rng.uniform(-np.pi, np.pi, size=n))


def sca_optimize(g, s, init_angles=None, max_iters=50, tol=1e-8):
    """Run SCA phase updates for one target client.

    Returns the final :class:`PhaseVector` and the :class:`ScaState` carrying
    the f1 trace (first entry is the initial point).
    """
    if max_iters < 1:
        raise ConfigurationError("max_iters must be >= 1")
    if tol < 0:
        raise ConfigurationError("tol must be non-negative")
    quad = QuadraticForm.from_channel(g, s)
    if init_angles is None:
        init_angles = np.zeros(quad.n)
    phi = np.array(init_angles, dtype=float).reshape(-1)
    if phi.shape[0] != quad.n:
        raise ShapeError("init_angles length differs from g")

    state = ScaState(angles=phi, lam=lambda_bound(quad))
    state.objective_trace.append(f1(phi, quad))
    for j in range(max_iters):
        grad = gradient_f1(phi, quad)
        if not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite SCA gradient")
        step = grad / state.lam
        phi = phi - step
        state.iteration = j + 1
        state.objective_trace.append(f1(phi, quad))
        if np.linalg.norm(step) < tol:
            state.converged = True
            break
    state.angles = phi
    return PhaseVector(phi), state
