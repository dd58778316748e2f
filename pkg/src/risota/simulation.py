"""One communication round of RIS-assisted over-the-air federated training.

The round order is: pick the phase-design target client, draw the block's
channels, design the RIS phases at the server (true cascaded CSI), then let
every client estimate its channel, choose its local steps, train and
transmit; the server finally receives the analog superposition and updates.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import phase
from .aggregation import server_update, superpose
from .channel import (
    PhaseVector, cascaded_channel, effective_channel, estimate_csi, link_gains,
    path_loss_ris, sample_round,
)
from .exceptions import ClientSkippedError, ConfigurationError
from .learning import evaluate, global_objective, per_sample_gradient_norms, sgd_step
from .power import PowerConfig, power_criterion, select_local_steps
from .records import RoundLog
from .rng import stream

ALGORITHMS = ("roar_fed", "no_ris", "static_phase")


@dataclass
class SimulationSetup:
    clients: list
    n_classes: int
    geometry: object
    path_loss: object
    n_elements: int
    algorithm: str
    eta: float
    tau_max: int
    batch_size: int
    power: np.ndarray
    beta_t: float
    G: float
    noise_variance: float
    est_variance: float
    sca_iters: int = 50
    sca_tol: float = 1e-8
    sca_init: str = "zeros"
    seed: int = 0
    eval_X: np.ndarray = None
    eval_y: np.ndarray = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        self.power = np.broadcast_to(np.asarray(self.power, dtype=float),
                                     (len(self.clients),)).copy()

    @property
    def alpha(self):
        return np.array([c.alpha for c in self.clients])

    @property
    def n_clients(self):
        return len(self.clients)


@dataclass
class SimulationState:
    w: np.ndarray
    theta: PhaseVector = None
    prev_tau: np.ndarray = None
    round: int = 0


def mean_channel_gain(geometry, cfg, n_elements, algorithm):
    """Average |h|^2 per user before phase design (random/unaligned phases)."""
    gains = link_gains(geometry, cfg)
    if algorithm == "no_ris":
        return gains.direct
    return gains.direct + n_elements * gains.user_ris * gains.ris_ps


def noise_from_snr(geometry, cfg, snr_db, power, reference_elements=16):
    """Receiver noise variance making the average user hit ``snr_db``.

    The reference gain is the large-scale direct gain plus the unaligned RIS
    gain of ``reference_elements`` elements, averaged over users and before
    small-scale fading. Keeping the reference fixed lets element sweeps share
    one noise floor.
    """
    ref = (link_gains(geometry, cfg).direct
           + path_loss_ris(geometry.user_ris_distances, geometry.ris_ps_distance,
                           reference_elements, cfg) / reference_elements)
    return float(np.mean(power * ref) / 10.0 ** (snr_db / 10.0))


def warmup(w0, clients, eta, n_classes, seed, batch_size):
    """Per-client one-step update norms and the largest per-sample gradient norm."""
    norms, gmax = [], 0.0
    for i, c in enumerate(clients):
        w1, _ = sgd_step(w0, c.X, c.y, eta, stream(seed, "warmup", i), n_classes, batch_size)
        norms.append(float(np.linalg.norm(w1 - w0)))
        gmax = max(gmax, float(per_sample_gradient_norms(w0, c.X, c.y, n_classes).max()))
    return np.array(norms), gmax


def calibrate_beta_t(step_norms, alpha, power, mean_gain, utilization=0.5):
    """Server scale at which the median client at tau=1 uses ``utilization`` of P."""
    step_norms = np.maximum(step_norms, 1e-300)
    per_client = np.sqrt(utilization * power * mean_gain) / (alpha * step_norms)
    return float(np.median(per_client))


def select_target(state, alpha):
    if state.prev_tau is None:
        return int(np.argmax(alpha))
    return int(np.argmax(state.prev_tau))


def initial_state(setup, w0):
    theta = None
    if setup.algorithm == "roar_fed":
        theta = PhaseVector.zeros(setup.n_elements)
    return SimulationState(w=np.asarray(w0, dtype=float).copy(), theta=theta)


def run_round(state, setup):
    """Advance one round; returns the new state and its :class:`RoundLog`."""
    t = state.round
    seed = setup.seed
    m = setup.n_clients
    alpha = setup.alpha
    w = state.w

    target = select_target(state, alpha)
    channels = sample_round(stream(seed, "fading", t), setup.geometry,
                            setup.path_loss, setup.n_elements, round_index=t)

    theta = state.theta
    sca_f1 = (None, None, 0)
    feasible = (None, None)
    design = setup.algorithm == "roar_fed" or (setup.algorithm == "static_phase" and t == 0)
    if design:
        g = cascaded_channel(channels.h_ur[target], channels.h_rb)
        s = phase.build_target(setup.eta, setup.beta_t, alpha[target], setup.G,
                               setup.power[target], channels.h_ub[target])
        init = None
        if setup.algorithm == "static_phase":
            # designed once from a random start, then frozen for all later rounds
            init = phase.random_phases(stream(seed, "static_phase"), setup.n_elements).angles
        elif setup.sca_init == "random":
            init = phase.random_phases(stream(seed, "sca_init", t), setup.n_elements).angles
        theta, sca_state = phase.sca_optimize(g, s, init, setup.sca_iters, setup.sca_tol)
        sca_f1 = (sca_state.objective_trace[0], sca_state.objective_trace[-1],
                  sca_state.iteration)
        h_target = effective_channel(channels.h_ub[target], g, theta)
        wanted = s + channels.h_ub[target]
        feasible = (bool(h_target.real >= wanted.real), bool(abs(h_target) >= abs(wanted)))

    pcfg = PowerConfig(power=setup.power, beta_t=setup.beta_t, eta=setup.eta,
                       G=setup.G, tau_max=setup.tau_max)
    h_true = np.empty(m, dtype=complex)
    h_hat = np.empty(m, dtype=complex)
    signals, taus, ideal = [], np.zeros(m, dtype=int), np.zeros_like(w)
    plans = []
    for i, client in enumerate(setup.clients):
        own = channels.for_client(i)
        est = estimate_csi(own, setup.est_variance, stream(seed, "csi", t, i))
        if theta is None:
            h_true[i], h_hat[i] = own.h_ub[0], est.h_ub[0]
        else:
            h_true[i] = own.effective(theta)[0]
            h_hat[i] = est.effective(theta)[0]
        try:
            plan, traj = select_local_steps(
                w, client.X, client.y, setup.eta, stream(seed, "sgd", t, i), pcfg,
                h_hat[i], alpha[i], setup.n_classes, power=setup.power[i],
                batch_size=setup.batch_size)
        except ClientSkippedError:
            signals.append(np.zeros(w.shape[0], dtype=complex))
            plans.append(None)
            continue
        x = plan.beta * (traj.final - w)
        signals.append(x)
        plans.append(plan)
        taus[i] = plan.tau
        ideal += alpha[i] * (traj.final - w) / plan.tau

    received = superpose(signals, h_true, setup.noise_variance,
                         stream(seed, "noise", t), dim=w.shape[0])
    w_next, imag_energy = server_update(w, received, setup.beta_t)

    accuracy = None
    if setup.eval_X is not None:
        accuracy = evaluate(w_next, setup.eval_X, setup.eval_y, setup.n_classes)
    loss = global_objective(w_next, setup.clients, setup.n_classes)

    beta_mag = [abs(p.beta) if p else 0.0 for p in plans]
    log = RoundLog(
        round=t,
        beta_t=setup.beta_t,
        target=target,
        tau=taus.tolist(),
        beta_mag=beta_mag,
        clipped=[bool(p.clipped) if p else False for p in plans],
        measured_power=[p.measured_power if p else 0.0 for p in plans],
        power_limit=setup.power.tolist(),
        alpha=alpha.tolist(),
        # 1 + e/hh rather than h/hh: exact when the estimate is exact
        ratio=[complex(1 + (h - hh) / hh) if hh != 0 else complex(np.inf)
               for h, hh in zip(h_true, h_hat)],
        h_eff_mag=np.abs(h_true).tolist(),
        power_criterion=[bool(power_criterion(setup.eta, b, max(tau, 1), setup.G, p))
                     for b, tau, p in zip(beta_mag, taus, setup.power)],
        sca_f1_init=sca_f1[0],
        sca_f1_final=sca_f1[1],
        sca_iterations=sca_f1[2],
        target_feasible_re=feasible[0],
        target_feasible_abs=feasible[1],
        accuracy=accuracy,
        loss=loss,
        misalignment=imag_energy,
        alignment_error=float(np.max(np.abs(w_next - w - ideal))),
        h_ub_min=float(np.min(np.abs(channels.h_ub))),
        h_ur_max=float(np.max(np.abs(channels.h_ur))),
        h_rb_max=float(np.max(np.abs(channels.h_rb))),
    )
    new_state = replace(state, w=w_next, theta=theta, prev_tau=taus, round=t + 1)
    return new_state, log
