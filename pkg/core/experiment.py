"""
Simulation study runner.

For every setting (hidden layer count, s_W) and run index a data set is drawn
from the generator and four estimators are fitted on the 100 training samples:

    LS   plain least squares on the full architecture
    SLS  least squares plus the layer regularizer
    ILS  least squares on the true condensed architecture (knows S)
    FLS  SLS followed by condensation and a warm least-squares refit

Test mse and the number of active hidden layers are collected and summarized
by median and third quartile over the runs.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
import pandas as pd

from .condense import CondenseMode
from .data import GenConfig, generate
from .errors import ConfigError, DivergenceError, ParameterError
from .files import read_json
from .metrics import aggregate_runs, mse_metric, shat_metric
from .network import Network
from .numkit import RngStream
from .refit import condensed_space, refit, sls_then_refit
from .regularizers import RegWeights
from .training import GlorotUniform, TrainConfig, initialize, sgd_fit

logger = logging.getLogger(__name__)

WORKERS_ENV = "LAYER_SPARSITY_WORKERS"
ABSENT = "—"


class MethodKind(str, Enum):
    LS = "LS"
    SLS = "SLS"
    ILS = "ILS"
    FLS = "FLS"


ALL_METHODS = (MethodKind.LS, MethodKind.SLS, MethodKind.ILS, MethodKind.FLS)

DEFAULT_WIDTH = 5
DEFAULT_INPUT_DIM = 2


@dataclass(frozen=True)
class Setting:
    hidden_layers: int
    s_w: float
    width: int = DEFAULT_WIDTH
    input_dim: int = DEFAULT_INPUT_DIM

    @property
    def label(self):
        """Unique per setting; width and input dimension appear only when not the defaults."""
        label = f"hidden={self.hidden_layers},s_w={self.s_w:g}"
        if self.width != DEFAULT_WIDTH:
            label += f",width={self.width}"
        if self.input_dim != DEFAULT_INPUT_DIM:
            label += f",d={self.input_dim}"
        return label

    def gen_config(self):
        return GenConfig(
            input_dim=self.input_dim, width=self.width, hidden_layers=self.hidden_layers, s_w=self.s_w
        )


STUDY_SETTINGS = (
    Setting(10, 0.1),
    Setting(10, 0.3),
    Setting(10, 0.9),
    Setting(25, 0.1),
    Setting(25, 0.3),
)

# (hidden layers, s_W) -> (epochs, rL)
HYPERPARAMETER_TABLE = {
    (10, 0.1): (200, 0.2),
    (10, 0.3): (200, 0.12),
    (10, 0.9): (300, 0.07),
    (25, 0.1): (400, 0.05),
    (25, 0.3): (500, 0.05),
}
FALLBACK_EPOCHS = 500
FALLBACK_RL = 0.05

DEFAULT_HYPER = {
    "learning_rate": 1e-2,
    "batch_size": 10,
    "tol": 1e-6,
    "mode": CondenseMode.AS_STATED.value,
}

OVERRIDE_KEYS = ("epochs", "learning_rate", "batch_size", "rl", "tol", "mode")


@dataclass(frozen=True)
class Hyperparameters:
    epochs: int
    rl: float
    learning_rate: float = 1e-2
    batch_size: int = 10
    tol: float = 1e-6
    mode: CondenseMode = CondenseMode.AS_STATED
    init: object = field(default_factory=GlorotUniform)

    def __post_init__(self):
        object.__setattr__(self, "mode", CondenseMode(self.mode))
        if self.tol < 0.0:
            raise ParameterError(f"tol must be non-negative, got {self.tol}")

    def train_config(self, seed):
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            seed=seed,
            init=self.init,
        )


def hyperparameters_for(setting, overrides=None, warn=True):
    """Tuned hyperparameters for a setting, updated with overrides."""
    key = (setting.hidden_layers, round(float(setting.s_w), 6))
    if key in HYPERPARAMETER_TABLE:
        epochs, rl = HYPERPARAMETER_TABLE[key]
    else:
        if warn:
            logger.warning(
                "no tuned hyperparameters for %s; using epochs=%d, rl=%g",
                setting.label, FALLBACK_EPOCHS, FALLBACK_RL,
            )
        epochs, rl = FALLBACK_EPOCHS, FALLBACK_RL
    params = dict(DEFAULT_HYPER, epochs=epochs, rl=rl)
    if overrides:
        unknown = set(overrides) - set(OVERRIDE_KEYS)
        if unknown:
            raise ConfigError(f"unknown hyperparameter overrides {sorted(unknown)}")
        params.update(overrides)
    return Hyperparameters(**params)


@dataclass
class RunResult:
    setting: str
    method: MethodKind
    run: int
    mse: float = float("nan")
    shat: int = None
    failed: bool = False
    error: str = None
    network: Network = field(default=None, repr=False, compare=False)

    def to_row(self, setting_order=0):
        row = asdict(self)
        row.pop("network")
        row["method"] = self.method.value
        row["setting_order"] = setting_order
        row["method_order"] = ALL_METHODS.index(self.method)
        return row


@dataclass(frozen=True)
class Aggregate:
    setting: str
    method: str
    runs: int
    failed: int
    mse_median: float
    mse_q3: float
    shat_median: float = None
    shat_q3: float = None


def run_method(kind, model, train, test, hyper, seed, sls_net=None):
    """
    Fit one estimator and score it on the test set.

    LS and SLS share the initial network for a given seed, so SLS with rl = 0
    reproduces LS exactly. FLS reuses sls_net when given.

    Returns:
        RunResult; a diverging fit yields failed=True instead of raising
    """
    kind = MethodKind(kind)
    cfg = hyper.train_config(seed)
    widths = model.network.widths
    activations = model.network.activations
    depth = model.network.depth
    try:
        if kind in (MethodKind.LS, MethodKind.SLS):
            reg = RegWeights.layer_only(depth, hyper.rl) if kind is MethodKind.SLS else None
            start = initialize(widths, activations, cfg.init, cfg.seed)
            net, _ = sgd_fit(start, train, cfg, reg)
            shat = None
        elif kind is MethodKind.ILS:
            space = condensed_space(model.active, widths, activations)
            net = refit(space, train, cfg)
            shat = model.shat
        else:
            _, _, net, _ = sls_then_refit(
                train, widths, cfg, hyper.rl, hyper.tol, mode=hyper.mode, fitted=sls_net, activations=activations
            )
            shat = shat_metric(net, hyper.tol)
    except DivergenceError as e:
        logger.warning("%s diverged: %s", kind.value, e)
        return RunResult("", kind, 0, failed=True, error=str(e))
    return RunResult("", kind, 0, mse=mse_metric(net, test), shat=shat, network=net)


def run_setting_once(setting, run, master_seed, methods=ALL_METHODS, overrides=None):
    """All requested methods on one draw of one setting; results in method order."""
    rng = RngStream(master_seed).child(setting.label).child("run", run)
    model, train, test = generate(setting.gen_config(), rng.child("data"))
    hyper = hyperparameters_for(setting, overrides, warn=False)
    seed = rng.child("train").next_u64()

    methods = {MethodKind(m) for m in methods}
    results = {}
    if MethodKind.LS in methods:
        results[MethodKind.LS] = run_method(MethodKind.LS, model, train, test, hyper, seed)
    if methods & {MethodKind.SLS, MethodKind.FLS}:
        sls = run_method(MethodKind.SLS, model, train, test, hyper, seed)
        results[MethodKind.SLS] = sls
        if MethodKind.FLS in methods:
            if sls.failed:
                # no SLS fit to condense
                results[MethodKind.FLS] = RunResult("", MethodKind.FLS, 0, failed=True, error=sls.error)
            else:
                results[MethodKind.FLS] = run_method(MethodKind.FLS, model, train, test, hyper, seed, sls.network)
    if MethodKind.ILS in methods:
        results[MethodKind.ILS] = run_method(MethodKind.ILS, model, train, test, hyper, seed)

    out = []
    for kind in ALL_METHODS:
        if kind in methods:
            result = results[kind]
            result.setting = setting.label
            result.run = run
            result.network = None
            out.append(result)
    logger.debug("%s run %d: %s", setting.label, run, [(r.method.value, r.mse, r.shat) for r in out])
    return out


def _run_task(args):
    setting, run, master_seed, methods, overrides = args
    return run_setting_once(setting, run, master_seed, methods, overrides)


def default_workers():
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(value)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {value!r}") from None
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {value!r}")
    return workers


def run_experiment(settings, n_runs=30, master_seed=0, methods=ALL_METHODS, overrides=None, workers=None):
    """
    Run every setting n_runs times and aggregate per (setting, method).

    Runs draw from RngStream(master_seed).child(setting label).child("run", r),
    so results do not depend on the order or process in which runs execute.

    Returns:
        list of Aggregate in setting order, then method order
    """
    settings = [s if isinstance(s, Setting) else Setting(**s) for s in settings]
    if not settings:
        raise ParameterError("no settings to run")
    labels = [s.label for s in settings]
    if len(set(labels)) != len(labels):
        raise ParameterError(f"settings must be distinct, got {labels}")
    if n_runs < 1:
        raise ParameterError(f"n_runs must be positive, got {n_runs}")
    methods = tuple(MethodKind(m) for m in methods)
    workers = workers if workers is not None else default_workers()
    for setting in settings:
        hyperparameters_for(setting, overrides)

    tasks = [(s, r, master_seed, methods, overrides) for s in settings for r in range(n_runs)]
    logger.info("running %d settings x %d runs x %d methods with %d worker(s)", len(settings), n_runs, len(methods), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_task, tasks))
    else:
        batches = [_run_task(t) for t in tasks]

    order = {s.label: i for i, s in enumerate(settings)}
    rows = [r.to_row(order[r.setting]) for batch in batches for r in batch]
    failed = sum(r["failed"] for r in rows)
    if failed:
        logger.warning("%d of %d fits diverged and are excluded from the summaries", failed, len(rows))

    summary = aggregate_runs(rows)
    aggregates = []
    for rec in summary.to_dict("records"):
        shat_median = None if np.isnan(rec["shat_median"]) else rec["shat_median"]
        shat_q3 = None if np.isnan(rec["shat_q3"]) else rec["shat_q3"]
        aggregates.append(Aggregate(
            rec["setting"], rec["method"], int(rec["runs"]), int(rec["failed"]),
            rec["mse_median"], rec["mse_q3"], shat_median, shat_q3,
        ))
    return aggregates


def _fmt(value):
    if value is None or not np.isfinite(value):
        return ABSENT
    return f"{value:.6g}"


def table_frame(aggregates):
    return pd.DataFrame([
        {
            "setting": a.setting,
            "method": a.method,
            "mse_median": _fmt(a.mse_median),
            "mse_q3": _fmt(a.mse_q3),
            "shat_median": _fmt(a.shat_median),
            "shat_q3": _fmt(a.shat_q3),
            "failed": str(a.failed),
        }
        for a in aggregates
    ])


def emit_table(aggregates, fmt="csv"):
    """Render aggregates as CSV or an aligned text table; absent shat shows as a dash."""
    if not aggregates:
        raise ParameterError("no aggregates to render")
    frame = table_frame(aggregates)
    if fmt == "csv":
        return frame.to_csv(index=False, lineterminator="\n")
    if fmt == "table":
        return frame.to_string(index=False) + "\n"
    raise ParameterError(f"unknown table format {fmt!r}; use 'csv' or 'table'")


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 0
    n_runs: int = 30
    settings: tuple = STUDY_SETTINGS
    methods: tuple = ALL_METHODS
    overrides: dict = field(default_factory=dict)


CONFIG_KEYS = ("master_seed", "n_runs", "settings", "methods", "overrides")
SETTING_KEYS = ("hidden_layers", "s_w", "width")


def _require_int(value, where):
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _require_number(value, where):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def experiment_config_from_dict(doc, source="<config>"):
    """Merge a config document over the defaults, rejecting unknown or ill-typed keys."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be an object")
    unknown = set(doc) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    params = {"master_seed": 0, "n_runs": 30, "settings": None, "methods": None, "overrides": {}}
    params.update(doc)

    master_seed = _require_int(params["master_seed"], f"{source}: master_seed")
    n_runs = _require_int(params["n_runs"], f"{source}: n_runs")
    if n_runs < 1:
        raise ConfigError(f"{source}: n_runs must be positive, got {n_runs}")

    settings = STUDY_SETTINGS
    if params["settings"] is not None:
        if not isinstance(params["settings"], list) or not params["settings"]:
            raise ConfigError(f"{source}: settings must be a nonempty list")
        parsed = []
        for i, entry in enumerate(params["settings"]):
            where = f"{source}: settings[{i}]"
            if not isinstance(entry, dict):
                raise ConfigError(f"{where} must be an object")
            extra = set(entry) - set(SETTING_KEYS)
            if extra:
                raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
            if "hidden_layers" not in entry or "s_w" not in entry:
                raise ConfigError(f"{where}: needs hidden_layers and s_w")
            parsed.append(Setting(
                hidden_layers=_require_int(entry["hidden_layers"], f"{where}.hidden_layers"),
                s_w=_require_number(entry["s_w"], f"{where}.s_w"),
                width=_require_int(entry.get("width", 5), f"{where}.width"),
            ))
        labels = [s.label for s in parsed]
        repeated = sorted({label for label in labels if labels.count(label) > 1})
        if repeated:
            raise ConfigError(f"{source}: settings repeated: {repeated}")
        settings = tuple(parsed)

    methods = ALL_METHODS
    if params["methods"] is not None:
        try:
            methods = tuple(MethodKind(m) for m in params["methods"])
        except (ValueError, TypeError) as e:
            raise ConfigError(f"{source}: methods: {e}") from e

    overrides = params["overrides"]
    if not isinstance(overrides, dict):
        raise ConfigError(f"{source}: overrides must be an object")
    extra = set(overrides) - set(OVERRIDE_KEYS)
    if extra:
        raise ConfigError(f"{source}: unknown override keys {sorted(extra)}")
    for key in ("epochs", "batch_size"):
        if key in overrides:
            _require_int(overrides[key], f"{source}: overrides.{key}")
    for key in ("learning_rate", "rl", "tol"):
        if key in overrides:
            _require_number(overrides[key], f"{source}: overrides.{key}")
    if "mode" in overrides:
        try:
            CondenseMode(overrides["mode"])
        except ValueError as e:
            raise ConfigError(f"{source}: overrides.mode: {e}") from e

    return ExperimentConfig(master_seed, n_runs, settings, methods, dict(overrides))


def load_experiment_config(path):
    return experiment_config_from_dict(read_json(path), source=str(path))
