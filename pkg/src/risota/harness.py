"""Config-driven experiment runs: seeds x algorithms x RIS sizes, CSV output.

A run directory receives

- ``metrics.csv``: one row per (seed, algorithm, N, round), fixed columns
- ``rounds.jsonl``: the full round logs, for ``bound`` recomputation
- ``constants.jsonl``: estimated bound constants per grid cell
- ``bounds.csv``: bound terms per grid cell
- ``fig_accuracy_vs_round.csv`` and ``fig_accuracy_vs_N.csv``: plot data
- ``fig_accuracy_vs_round.svg`` when ``svg = true`` (needs matplotlib)
"""

import csv
import dataclasses
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundConstants, estimation_constant, bound_terms
from .channel import Geometry, PathLossConfig
from .data import load_idx, load_mnist_subset, split_per_class, synthesize
from .estimator import RisFedClassifier
from .exceptions import ConfigurationError, IncompleteLogError, OutputError, SingularBoundError
from .records import RoundLog
from .rng import stream
from .simulation import ALGORITHMS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

METRICS_COLUMNS = (
    "round", "seed", "algorithm", "n_elements", "accuracy", "loss", "beta_t", "target",
    "tau_mean", "tau_min", "tau_max", "power_ratio_mean", "power_ratio_max",
    "clipped_fraction", "sca_iterations", "sca_f1_init", "sca_f1_final",
    "misalignment", "alignment_error",
)
BOUND_COLUMNS = (
    "seed", "algorithm", "n_elements", "L", "sigma2", "G", "eta", "T", "F_w0", "F_star",
    "noise_variance", "optimization_error", "channel_noise_error", "local_update_error",
    "statistical_error", "channel_estimation_error", "total", "estimation_constant", "step_size_ok",
)
ROUND_FIG_COLUMNS = ("algorithm", "n_elements", "round", "accuracy_median",
                     "accuracy_min", "accuracy_max")
N_FIG_COLUMNS = ("algorithm", "n_elements", "final_accuracy_median",
                 "rounds_to_target_median", "n_seeds")
TARGET_ACCURACY = 0.6


@dataclass
class ExperimentConfig:
    n_clients: int = 10
    n_elements: int = 16
    n_elements_sweep: list = None
    n_rounds: int = 200
    eta: float = 0.05
    batch_size: int = 32
    tau_max: int = 10
    power: float = 1.0
    snr_db: float = 20.0
    snr_reference_elements: int = 16
    noise_variance: float = None
    est_var_ratio: float = 0.1
    beta_t: object = "auto"
    power_utilization: float = 2.0
    gradient_bound: object = "warmup"
    sca_iters: int = 50
    sca_tol: float = 1e-8
    sca_init: str = "zeros"
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    # data
    dataset: str = "mnist_subset"
    partition: str = "one_class"
    train_images: str = None
    train_labels: str = None
    test_images: str = None
    test_labels: str = None
    samples_per_client: int = 500
    train_per_class: int = 400
    test_per_class: int = None
    synthetic_features: int = 16
    synthetic_per_class: int = 100
    synthetic_separation: float = 1.0
    # geometry and path loss
    ps_position: list = field(default_factory=lambda: [-50.0, 0.0, 10.0])
    ris_position: list = field(default_factory=lambda: [0.0, 0.0, 10.0])
    user_x_range: list = field(default_factory=lambda: [-20.0, 0.0])
    user_y_range: list = field(default_factory=lambda: [-30.0, 30.0])
    user_z: float = 0.0
    ps_gain_dbi: float = 5.0
    user_gain_dbi: float = 0.0
    ris_gain_dbi: float = 5.0
    carrier_hz: float = 915e6
    pathloss_exponent: float = 4.0
    # output
    estimate_bounds: bool = True
    svg: bool = False

    def __post_init__(self):
        if min(self.n_clients, self.n_elements, self.n_rounds) < 1:
            raise ConfigurationError("n_clients, n_elements and n_rounds must be >= 1")
        if self.est_var_ratio < 0:
            raise ConfigurationError("est_var_ratio must be >= 0")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ConfigurationError(f"algorithms must be a non-empty subset of {ALGORITHMS}")
        if not self.seeds:
            raise ConfigurationError("seeds must be non-empty")
        if self.dataset not in ("mnist", "mnist_subset", "synthetic"):
            raise ConfigurationError("dataset must be mnist, mnist_subset or synthetic")
        if self.partition != "one_class":
            raise ConfigurationError("only the one_class partition is supported")
        if self.n_elements_sweep is not None and min(self.n_elements_sweep, default=0) < 1:
            raise ConfigurationError("n_elements_sweep entries must be >= 1")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
        nested = [k for k, v in raw.items() if isinstance(v, dict)]
        if nested:
            raise ConfigurationError(f"config must be flat; tables found: {nested}")
        return cls.from_dict(raw)

    def path_loss(self):
        return PathLossConfig.from_db(self.ps_gain_dbi, self.user_gain_dbi, self.ris_gain_dbi,
                                      self.carrier_hz, self.pathloss_exponent)

    def geometry(self, seed):
        return Geometry.uniform_users(stream(seed, "geometry"), self.n_clients,
                                      tuple(self.user_x_range), tuple(self.user_y_range),
                                      self.user_z, tuple(self.ps_position),
                                      tuple(self.ris_position))

    def grid(self, sweep=False):
        sizes = self.n_elements_sweep if sweep and self.n_elements_sweep else [self.n_elements]
        return [(seed, alg, n) for n in sizes for alg in self.algorithms for seed in self.seeds]


def load_datasets(cfg):
    """Train and test sets as configured."""
    if cfg.dataset == "mnist":
        paths = (cfg.train_images, cfg.train_labels, cfg.test_images, cfg.test_labels)
        if any(p is None for p in paths):
            raise ConfigurationError(
                "dataset = mnist needs train_images, train_labels, test_images, test_labels")
        train = load_idx(cfg.train_images, cfg.train_labels, n_classes=10)
        test = load_idx(cfg.test_images, cfg.test_labels, n_classes=10)
    elif cfg.dataset == "mnist_subset":
        train, test = split_per_class(load_mnist_subset(), cfg.train_per_class)
    else:
        full = synthesize(cfg.n_clients, cfg.synthetic_per_class, cfg.synthetic_features,
                          cfg.synthetic_separation, stream(0, "synthetic"))
        train, test = split_per_class(full, cfg.synthetic_per_class * 4 // 5)
    if cfg.test_per_class is not None:
        test = test.subsample_per_class(cfg.test_per_class)
    return train, test


def make_estimator(cfg, seed, algorithm, n_elements):
    return RisFedClassifier(
        n_clients=cfg.n_clients, n_elements=n_elements, n_rounds=cfg.n_rounds,
        learning_rate=cfg.eta, tau_max=cfg.tau_max, batch_size=cfg.batch_size,
        snr_db=cfg.snr_db, snr_reference_elements=cfg.snr_reference_elements,
        noise_variance=cfg.noise_variance, est_var_ratio=cfg.est_var_ratio, power=cfg.power,
        beta_t=cfg.beta_t, power_utilization=cfg.power_utilization,
        gradient_bound=cfg.gradient_bound, sca_iters=cfg.sca_iters, sca_tol=cfg.sca_tol,
        sca_init=cfg.sca_init, algorithm=algorithm, geometry=cfg.geometry(seed),
        path_loss=cfg.path_loss(), samples_per_client=cfg.samples_per_client,
        estimate_bounds=cfg.estimate_bounds, random_state=seed)


@dataclass
class CellResult:
    seed: int
    algorithm: str
    n_elements: int
    logs: list
    constants: BoundConstants = None
    est_variance: float = 0.0


def run_cell(cfg, train, test, seed, algorithm, n_elements):
    clf = make_estimator(cfg, seed, algorithm, n_elements)
    clf.fit(train.features, train.labels, eval_set=(test.features, test.labels))
    return CellResult(seed, algorithm, n_elements, clf.round_logs_, clf.bound_constants_,
                      clf.setup_.est_variance)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def metrics_row(cell, log):
    tau = np.asarray(log.tau, dtype=float)
    ratio = np.asarray(log.measured_power) / np.asarray(log.power_limit)
    return {
        "round": log.round, "seed": cell.seed, "algorithm": cell.algorithm,
        "n_elements": cell.n_elements, "accuracy": log.accuracy, "loss": log.loss,
        "beta_t": log.beta_t, "target": log.target,
        "tau_mean": tau.mean(), "tau_min": int(tau.min()), "tau_max": int(tau.max()),
        "power_ratio_mean": ratio.mean(), "power_ratio_max": ratio.max(),
        "clipped_fraction": float(np.mean(log.clipped)),
        "sca_iterations": log.sca_iterations, "sca_f1_init": log.sca_f1_init,
        "sca_f1_final": log.sca_f1_final, "misalignment": log.misalignment,
        "alignment_error": log.alignment_error,
    }


def bound_row(cell):
    row = {"seed": cell.seed, "algorithm": cell.algorithm, "n_elements": cell.n_elements}
    c = cell.constants
    if c is None:
        return row
    row.update(dataclasses.asdict(c))
    row.update(bound_terms(cell.logs, c).as_dict())
    try:
        row["estimation_constant"] = estimation_constant(
            cell.est_variance, cell.n_elements, min(log.h_ub_min for log in cell.logs),
            max(log.h_ur_max for log in cell.logs), max(log.h_rb_max for log in cell.logs))
    except SingularBoundError:
        row["estimation_constant"] = None
    row["step_size_ok"] = c.step_size_ok
    return row


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def rounds_to_target(acc, target=TARGET_ACCURACY):
    hit = np.flatnonzero(np.asarray(acc) >= target)
    return int(hit[0]) + 1 if hit.size else None


def figure_rows(cells):
    groups = {}
    for cell in cells:
        acc = [np.nan if log.accuracy is None else log.accuracy for log in cell.logs]
        groups.setdefault((cell.algorithm, cell.n_elements), []).append(acc)
    by_round, by_n = [], []
    for (alg, n), runs in groups.items():
        acc = np.array(runs, dtype=float)
        for t in range(acc.shape[1]):
            by_round.append({"algorithm": alg, "n_elements": n, "round": t,
                             "accuracy_median": np.median(acc[:, t]),
                             "accuracy_min": acc[:, t].min(), "accuracy_max": acc[:, t].max()})
        hits = [rounds_to_target(a) for a in acc]
        # runs that never reach the target count as infinitely slow
        hits = np.array([np.inf if h is None else h for h in hits], dtype=float)
        med = np.median(hits)
        by_n.append({"algorithm": alg, "n_elements": n,
                     "final_accuracy_median": np.median(acc[:, -1]),
                     "rounds_to_target_median": None if np.isinf(med) else med,
                     "n_seeds": acc.shape[0]})
    return by_round, by_n


def write_svg(path, by_round):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise ConfigurationError("svg = true needs the optional 'matplotlib' package") from exc
    fig, ax = plt.subplots(figsize=(6, 4))
    series = {}
    for row in by_round:
        series.setdefault((row["algorithm"], row["n_elements"]), []).append(row["accuracy_median"])
    for (alg, n), acc in series.items():
        ax.plot(np.arange(len(acc)), acc, label=f"{alg} N={n}")
    ax.set_xlabel("round")
    ax.set_ylabel("test accuracy (median over seeds)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def ensure_writable(out_dir):
    """Fail fast, before any compute, if ``out_dir`` cannot take output files."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=out_dir):
            pass
    except OSError as exc:
        raise OutputError(f"output directory {out_dir} is not writable: {exc}") from exc


def run_experiment(cfg, out_dir, sweep=False, threads=1):
    """Run every grid cell and write all outputs; returns the cell results."""
    ensure_writable(out_dir)
    train, test = load_datasets(cfg)
    grid = cfg.grid(sweep)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(lambda g: run_cell(cfg, train, test, *g), grid))
    else:
        cells = [run_cell(cfg, train, test, *g) for g in grid]
    write_outputs(cells, out_dir, svg=cfg.svg)
    return cells


def write_outputs(cells, out_dir, svg=False):
    # single writer, grid order: output bytes never depend on thread timing
    write_csv(os.path.join(out_dir, "metrics.csv"), METRICS_COLUMNS,
              (metrics_row(c, log) for c in cells for log in c.logs))
    with open(os.path.join(out_dir, "rounds.jsonl"), "w", encoding="utf-8") as fh:
        for c in cells:
            for log in c.logs:
                rec = {"seed": c.seed, "algorithm": c.algorithm, "n_elements": c.n_elements}
                rec.update(log.to_dict())
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(os.path.join(out_dir, "constants.jsonl"), "w", encoding="utf-8") as fh:
        for c in cells:
            if c.constants is None:
                continue
            rec = {"seed": c.seed, "algorithm": c.algorithm, "n_elements": c.n_elements,
                   "est_variance": c.est_variance}
            rec.update(dataclasses.asdict(c.constants))
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    write_csv(os.path.join(out_dir, "bounds.csv"), BOUND_COLUMNS, (bound_row(c) for c in cells))
    by_round, by_n = figure_rows(cells)
    write_csv(os.path.join(out_dir, "fig_accuracy_vs_round.csv"), ROUND_FIG_COLUMNS, by_round)
    write_csv(os.path.join(out_dir, "fig_accuracy_vs_N.csv"), N_FIG_COLUMNS, by_n)
    if svg:
        write_svg(os.path.join(out_dir, "fig_accuracy_vs_round.svg"), by_round)


def read_cells(run_dir):
    """Rebuild cell results from ``rounds.jsonl`` and ``constants.jsonl``."""
    rounds = os.path.join(run_dir, "rounds.jsonl")
    try:
        with open(rounds, encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
        consts = {}
        path = os.path.join(run_dir, "constants.jsonl")
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        consts[(rec.pop("seed"), rec.pop("algorithm"), rec.pop("n_elements"))] = rec
    except OSError as exc:
        raise IncompleteLogError(f"cannot read logs in {run_dir}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IncompleteLogError(f"malformed log line in {run_dir}: {exc}") from exc
    cells = {}
    for rec in records:
        key = (rec["seed"], rec["algorithm"], rec["n_elements"])
        if key not in cells:
            cells[key] = CellResult(*key, logs=[])
        cells[key].logs.append(RoundLog.from_dict(rec))
    for key, cell in cells.items():
        if key in consts:
            rec = dict(consts[key])
            cell.est_variance = rec.pop("est_variance", 0.0)
            cell.constants = BoundConstants(**rec)
    return list(cells.values())


def recompute_bounds(run_dir, out_path=None):
    """Re-evaluate bound terms from a finished run directory."""
    cells = read_cells(run_dir)
    if not cells:
        raise IncompleteLogError(f"no round logs in {run_dir}")
    out_path = out_path or os.path.join(run_dir, "bounds.csv")
    write_csv(out_path, BOUND_COLUMNS, (bound_row(c) for c in cells))
    return out_path
