"""scikit-learn compatible front end for RIS-assisted over-the-air FL."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .bounds import estimate_constants
from .channel import Geometry, PathLossConfig
from .exceptions import ConfigurationError
from .learning import (
    global_objective, logits, partition_by_ids, partition_one_class, unpack, zeros_model,
)
from .rng import resolve_seed, stream
from .simulation import (
    ALGORITHMS, SimulationSetup, calibrate_beta_t, initial_state, mean_channel_gain,
    noise_from_snr, run_round, warmup,
)


class RisFedClassifier(ClassifierMixin, BaseEstimator):
    """Softmax regression trained by RIS-assisted over-the-air federated learning.

    Each of ``n_clients`` simulated devices trains locally on its shard and
    transmits an analog, channel-inverted model update; the parameter server
    receives the superposition through block-fading channels shaped by an
    ``n_elements`` reconfigurable intelligent surface whose phases are
    redesigned every round.

    Parameters
    ----------
    n_clients : int, default=10
        Number of participating devices. Without ``client_ids`` in
        :meth:`fit`, client ``i`` receives all samples of the i-th class.
    n_elements : int, default=16
        RIS size.
    n_rounds : int, default=200
        Communication rounds.
    learning_rate : float, default=0.05
        Constant local SGD step size.
    tau_max : int, default=10
        Cap on the adaptive number of local steps.
    batch_size : int or None, default=32
        Local minibatch size; ``None`` uses the full local dataset.
    snr_db : float, default=20.0
        Average receive SNR before small-scale fading, referenced to the mean
        user gain over the direct path plus an unaligned RIS path of
        ``snr_reference_elements`` elements.
    snr_reference_elements : int, default=16
        RIS size used for the SNR reference, so noise stays fixed across
        sweeps over ``n_elements``.
    noise_variance : float or None, default=None
        Receiver noise variance; overrides ``snr_db`` when given.
    est_var_ratio : float, default=0.1
        Channel estimation error variance as a fraction of the noise variance.
    power : float, default=1.0
        Per-client maximum transmit power.
    beta_t : float or "auto", default="auto"
        Server scaling factor. "auto" calibrates it once so the median client
        at one local step uses ``power_utilization`` of its budget under the
        average (unaligned) channel gain.
    power_utilization : float, default=2.0
        Values above 1 deliberately overdrive the median client, trading
        more clipping for a larger server scale and hence less relative noise.
    gradient_bound : float or "warmup", default="warmup"
        Stochastic gradient bound G; "warmup" takes twice the largest
        per-sample gradient norm at the initial model.
    sca_iters : int, default=50
    sca_tol : float, default=1e-8
    sca_init : {"zeros", "random"}, default="zeros"
    algorithm : {"roar_fed", "no_ris", "static_phase"}, default="roar_fed"
        "no_ris" drops the RIS path; "static_phase" designs the phases once in
        round 0 from a random start and then freezes them.
    geometry : Geometry or None, default=None
        Node placement; ``None`` drops users uniformly in the default box.
    path_loss : PathLossConfig or None, default=None
    samples_per_client : int or None, default=None
        Cap on each client's shard in the one-class partition.
    random_state : int, Generator or None, default=None

    Attributes
    ----------
    classes_ : ndarray
    coef_ : ndarray of shape (n_classes, n_features)
    intercept_ : ndarray of shape (n_classes,)
    round_logs_ : list of RoundLog
    setup_ : SimulationSetup
    bound_constants_ : BoundConstants or None
        Only with ``estimate_bounds=True``.
    """

    def __init__(self, n_clients=10, n_elements=16, n_rounds=200, learning_rate=0.05,
                 tau_max=10, batch_size=32, snr_db=20.0, snr_reference_elements=16,
                 noise_variance=None, est_var_ratio=0.1, power=1.0, beta_t="auto",
                 power_utilization=2.0, gradient_bound="warmup", sca_iters=50,
                 sca_tol=1e-8, sca_init="zeros", algorithm="roar_fed", geometry=None,
                 path_loss=None, samples_per_client=None, estimate_bounds=False,
                 random_state=None):
        self.n_clients = n_clients
        self.n_elements = n_elements
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.tau_max = tau_max
        self.batch_size = batch_size
        self.snr_db = snr_db
        self.snr_reference_elements = snr_reference_elements
        self.noise_variance = noise_variance
        self.est_var_ratio = est_var_ratio
        self.power = power
        self.beta_t = beta_t
        self.power_utilization = power_utilization
        self.gradient_bound = gradient_bound
        self.sca_iters = sca_iters
        self.sca_tol = sca_tol
        self.sca_init = sca_init
        self.algorithm = algorithm
        self.geometry = geometry
        self.path_loss = path_loss
        self.samples_per_client = samples_per_client
        self.estimate_bounds = estimate_bounds
        self.random_state = random_state

    def _validate_params(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}")
        if self.n_clients < 1 or self.n_elements < 1 or self.n_rounds < 1:
            raise ConfigurationError("n_clients, n_elements and n_rounds must be >= 1")
        if self.tau_max < 1:
            raise ConfigurationError("tau_max must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.est_var_ratio < 0:
            raise ConfigurationError("est_var_ratio must be non-negative")
        if self.sca_init not in ("zeros", "random"):
            raise ConfigurationError("sca_init must be 'zeros' or 'random'")

    def _build_setup(self, X, y_enc, client_ids, eval_set):
        seed = resolve_seed(self.random_state)
        n_classes = self.classes_.shape[0]
        if client_ids is None:
            rng = stream(seed, "partition") if self.samples_per_client else None
            clients = partition_one_class(X, y_enc, self.n_clients,
                                          cap=self.samples_per_client, rng=rng)
        else:
            clients = partition_by_ids(X, y_enc, np.asarray(client_ids))
            if len(clients) != self.n_clients:
                raise ConfigurationError(
                    f"client_ids name {len(clients)} clients, expected {self.n_clients}")

        geometry = self.geometry
        if geometry is None:
            geometry = Geometry.uniform_users(stream(seed, "geometry"), len(clients))
        if geometry.n_users != len(clients):
            raise ConfigurationError("geometry user count differs from n_clients")
        path_loss = self.path_loss or PathLossConfig()
        power = np.full(len(clients), float(self.power))

        if self.noise_variance is None:
            sigma_c2 = noise_from_snr(geometry, path_loss, self.snr_db, power,
                                      self.snr_reference_elements)
        else:
            sigma_c2 = float(self.noise_variance)

        w0 = zeros_model(X.shape[1], n_classes)
        step_norms, gmax = warmup(w0, clients, self.learning_rate, n_classes, seed,
                                  self.batch_size)
        G = 2.0 * gmax if self.gradient_bound == "warmup" else float(self.gradient_bound)
        alpha = np.array([c.alpha for c in clients])
        if self.beta_t == "auto":
            gain = mean_channel_gain(geometry, path_loss, self.n_elements, self.algorithm)
            beta_t = calibrate_beta_t(step_norms, alpha, power, gain, self.power_utilization)
        else:
            beta_t = float(self.beta_t)

        eval_X = eval_y = None
        if eval_set is not None:
            eval_X = check_array(eval_set[0])
            eval_y = self._encode(eval_set[1])
        return SimulationSetup(
            clients=clients, n_classes=n_classes, geometry=geometry, path_loss=path_loss,
            n_elements=self.n_elements, algorithm=self.algorithm, eta=self.learning_rate,
            tau_max=self.tau_max, batch_size=self.batch_size, power=power, beta_t=beta_t,
            G=G, noise_variance=sigma_c2, est_variance=self.est_var_ratio * sigma_c2,
            sca_iters=self.sca_iters, sca_tol=self.sca_tol, sca_init=self.sca_init,
            seed=seed, eval_X=eval_X, eval_y=eval_y), w0

    def _encode(self, y):
        idx = np.searchsorted(self.classes_, y)
        idx = np.clip(idx, 0, self.classes_.shape[0] - 1)
        if not np.all(self.classes_[idx] == y):
            raise ConfigurationError("labels outside the classes seen in fit")
        return idx

    def fit(self, X, y, client_ids=None, eval_set=None):
        """Run the federated simulation on ``(X, y)``.

        ``client_ids`` optionally assigns every sample to a client; by default
        the one-class non-i.i.d. partition is used. ``eval_set=(X_val, y_val)``
        is scored after every round into ``round_logs_[t].accuracy``.
        """
        self._validate_params()
        X, y = check_X_y(X, y, dtype=float)
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        self.n_features_in_ = X.shape[1]
        y_enc = self._encode(y)

        setup, w0 = self._build_setup(X, y_enc, client_ids, eval_set)
        state = initial_state(setup, w0)
        logs = []
        for _ in range(self.n_rounds):
            state, log = run_round(state, setup)
            logs.append(log)

        self.setup_ = setup
        self.round_logs_ = logs
        self.w_ = state.w
        self.coef_, self.intercept_ = unpack(state.w, X.shape[1], self.classes_.shape[0])
        self.initial_loss_ = global_objective(w0, setup.clients, setup.n_classes)
        self.bound_constants_ = None
        if self.estimate_bounds:
            self.bound_constants_ = self._probe_constants(w0, setup)
        return self

    def _probe_constants(self, w0, setup):
        probes = [estimate_constants(w0, c.X, c.y, setup.n_classes,
                                     stream(setup.seed, "probe", i))
                  for i, c in enumerate(setup.clients)]
        consts = probes[0]
        consts.L = max(p.L for p in probes)
        consts.sigma2 = max(p.sigma2 for p in probes)
        consts.G = setup.G
        consts.eta = setup.eta
        consts.T = len(self.round_logs_)
        consts.F_w0 = self.initial_loss_
        consts.F_star = min([self.initial_loss_] + [log.loss for log in self.round_logs_])
        consts.noise_variance = setup.noise_variance
        return consts

    def decision_function(self, X):
        check_is_fitted(self, "w_")
        X = check_array(X, dtype=float)
        return logits(self.w_, X, self.classes_.shape[0])

    def predict_proba(self, X):
        z = self.decision_function(X)
        z = z - z.max(axis=1, keepdims=True)
        p = np.exp(z)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X):
        # argmax keeps the lowest class index on ties
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    @property
    def accuracy_history_(self):
        check_is_fitted(self, "round_logs_")
        return np.array([np.nan if log.accuracy is None else log.accuracy
                         for log in self.round_logs_])
