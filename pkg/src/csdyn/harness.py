"""Experiment orchestration: simulate, predict, compare, and write reports."""

import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .effective_process import DEFAULT_SAMPLES, gfa_predict
from .errors import ConfigError
from .gfa_core import INTERPRETATIONS
from .iterative import ALGORITHMS, AMP, IST, ITA, run
from .model import SignalPrior, make_instance, n_measurements
from .shrinkage import MSEZ, SCHEDULE_MODES, ThresholdSchedule
from .state_evolution import se_run
from .svg import line_chart

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = ("t", "mse_sim_mean", "mse_sim_stderr", "msez_sim_mean", "mse_gfa", "mse_gfa_stderr",
               "msez_gfa", "mse_se", "lam_hat")

SUCCESS = "success"
OSCILLATION = "oscillation"
DIVERGENCE = "divergence"
INDETERMINATE = "indeterminate"

# named scenarios: (rho, delta, lambda, c)
SCENARIOS = {
    "a": (0.1, 0.5, 3.0, 3.0),
    "b": (0.1, 0.8, 3.0, 1.0),
    "c": (0.1, 0.8, 0.5, 1.0),
}


@dataclass
class ExperimentConfig:
    rho: float = 0.1
    delta: float = 0.5
    lam: float = 3.0
    c: float = 1.0
    sigma_omega: float = 0.0
    N: int = 2000
    T: int = 8
    algorithm: str = IST
    trials: int = 20
    mc_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    schedule_mode: str = MSEZ
    lambda_interpretation: str = "A"
    shard_count: int = 1

    def __post_init__(self):
        self.algorithm = str(self.algorithm).upper()
        self.validate()

    @property
    def M(self):
        return n_measurements(self.N, self.delta)

    @property
    def effective_delta(self):
        return self.M / self.N

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(0 <= self.rho <= 1, f"rho must lie in [0, 1], got {self.rho}")
        need(self.delta > 0, f"delta must be > 0, got {self.delta}")
        need(self.lam > 0, f"lambda must be > 0, got {self.lam}")
        need(self.c >= 1, f"c must be >= 1, got {self.c}")
        need(self.sigma_omega >= 0, f"sigma_omega must be >= 0, got {self.sigma_omega}")
        for name in ("N", "T", "trials", "mc_samples", "shard_count"):
            value = getattr(self, name)
            need(isinstance(value, (int, np.integer)) and value >= 1, f"{name} must be a positive integer, got {value!r}")
        need(isinstance(self.seed, (int, np.integer)) and self.seed >= 0, f"seed must be a non-negative integer")
        need(self.algorithm in ALGORITHMS, f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        need(self.algorithm != ITA or self.c == 1, "ITA is IST with c = 1")
        need(self.schedule_mode in SCHEDULE_MODES, f"schedule_mode must be one of {SCHEDULE_MODES}")
        need(self.lambda_interpretation in INTERPRETATIONS,
             f"lambda_interpretation must be one of {INTERPRETATIONS}")
        return self

    def to_dict(self):
        doc = asdict(self)
        doc.update(M=self.M, effective_delta=self.effective_delta, M_rounding=self.M - self.N * self.delta)
        return doc

    @classmethod
    def from_dict(cls, doc):
        names = {f.name for f in fields(cls)}
        aliases = {"lambda": "lam", "n": "N", "t": "T"}
        kwargs = {}
        for key, value in doc.items():
            key = aliases.get(key, key)
            if key in names:
                kwargs[key] = value
            elif key not in ("M", "effective_delta", "M_rounding"):
                raise ConfigError(f"unknown config field {key!r}")
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def classify_regime(mse_series, diverged=False):
    """Label an MSE trajectory as success, oscillation, divergence or indeterminate.

    Divergence: the run was flagged or the last value exceeds 10x the first.
    Oscillation: the first difference changes sign at least twice.
    Success: the last value is below a tenth of the first.
    """
    s = np.asarray([v for v in mse_series if v is not None and np.isfinite(v)], dtype=float)
    if s.size < 4 and not diverged:
        raise ValueError(f"need at least 4 finite values to classify, got {s.size}")
    if diverged or (s.size and s[-1] > 10 * s[0]):
        return DIVERGENCE
    sign = np.sign(np.diff(s))
    sign = sign[sign != 0]
    if np.count_nonzero(sign[1:] != sign[:-1]) >= 2:
        return OSCILLATION
    if s[-1] < 0.1 * s[0]:
        return SUCCESS
    return INDETERMINATE


def _simulate_trial(config, trial):
    prior = SignalPrior(config.rho)
    inst = make_instance(config.N, config.delta, prior, config.sigma_omega, config.seed, trial)
    sched = ThresholdSchedule.initial(config.lam, config.c, config.rho, config.schedule_mode)
    return run(config.algorithm, inst, config.T, sched)


def simulate(config):
    """Run ``config.trials`` independent instances; results are ordered by trial index."""
    if config.shard_count > 1 and config.trials > 1:
        with ThreadPoolExecutor(max_workers=min(config.shard_count, config.trials)) as pool:
            return list(pool.map(lambda k: _simulate_trial(config, k), range(config.trials)))
    return [_simulate_trial(config, k) for k in range(config.trials)]


def _mean_stderr(values):
    a = np.asarray(values, dtype=float)
    a = a[np.isfinite(a)]
    if a.size == 0:
        return float("nan"), float("nan")
    mean = float(np.add.reduce(a) / a.size)
    if a.size == 1:
        return mean, float("nan")
    return mean, float(np.std(a, ddof=1) / math.sqrt(a.size))


def aggregate(trajectories):
    """Per-stage trial means and standard errors, truncated to the shortest trajectory."""
    n = min(len(tr) for tr in trajectories)
    rows = []
    for t in range(n):
        mse, mse_se = _mean_stderr([tr.mse[t] for tr in trajectories])
        mz, mz_se = _mean_stderr([tr.msez[t] for tr in trajectories])
        lh, _ = _mean_stderr([tr.lam_hat[t] for tr in trajectories])
        rows.append(dict(t=t, mse_sim_mean=mse, mse_sim_stderr=mse_se, msez_sim_mean=mz, msez_sim_stderr=mz_se,
                         lam_hat=lh))
    return rows


def predict_gfa(config):
    return gfa_predict(SignalPrior(config.rho), config.delta, config.sigma_omega**2, config.lam, config.c,
                       config.T, config.mc_samples, config.seed, interpretation=config.lambda_interpretation,
                       schedule_mode=config.schedule_mode, shard_count=config.shard_count)


def predict_se(config):
    return se_run(SignalPrior(config.rho), config.delta, config.sigma_omega**2, config.lam, config.c, config.T,
                  schedule_mode=config.schedule_mode)


@dataclass
class ComparisonReport:
    config: ExperimentConfig
    rows: list
    regime: str
    diverged: bool = False
    diagnostics: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)

    def series(self, column):
        return [r.get(column) for r in self.rows]

    def to_dict(self):
        return dict(
            csv_schema_version=CSV_SCHEMA_VERSION,
            config=self.config.to_dict(),
            regime=self.regime,
            diverged=self.diverged,
            rows=self.rows,
            diagnostics=self.diagnostics,
            runtime=self.runtime,
            versions=dict(csdyn=__version__, numpy=np.__version__, python=platform.python_version()),
        )


def run_experiment(config):
    """Simulate, predict (GFA for IST/ITA, SE for AMP) and align per-stage results."""
    config.validate()
    started = time.perf_counter()
    trajectories = simulate(config)
    sim_rows = aggregate(trajectories)
    sim_done = time.perf_counter()

    gfa = predict_gfa(config) if config.algorithm in (IST, ITA) else None
    se = predict_se(config) if config.algorithm == AMP else None
    done = time.perf_counter()

    n = len(sim_rows)
    if gfa is not None:
        n = min(n, len(gfa))
    nan = float("nan")
    rows = []
    for t in range(n):
        row = dict(sim_rows[t])
        if gfa is not None:
            row.update(mse_gfa=gfa.sigma_sq[t], mse_gfa_stderr=gfa.sigma_sq_stderr[t], msez_gfa=gfa.msez[t],
                       msez_gfa_stderr=gfa.msez_stderr[t], lam_hat_gfa=gfa.lam_hat[t])
        else:
            row.update(mse_gfa=nan, mse_gfa_stderr=nan, msez_gfa=nan, msez_gfa_stderr=nan, lam_hat_gfa=nan)
        row["mse_se"] = se.sigma_sq[t] if se is not None else None
        rows.append(row)

    sim_diverged = any(tr.diverged for tr in trajectories)
    diverged = sim_diverged or bool(gfa is not None and gfa.diverged)
    trial_regimes = []
    for tr in trajectories:
        try:
            trial_regimes.append(classify_regime(tr.mse, tr.diverged))
        except ValueError:
            trial_regimes.append(INDETERMINATE)
    mean_series = [r["mse_sim_mean"] for r in rows]
    try:
        regime = classify_regime(mean_series, sim_diverged)
    except ValueError:
        regime = INDETERMINATE
    diagnostics = dict(
        trial_regimes=trial_regimes,
        trials_diverged=sum(tr.diverged for tr in trajectories),
        trial_lengths=[len(tr) for tr in trajectories],
        lambda_interpretation=config.lambda_interpretation,
    )
    if gfa is not None:
        try:
            gfa_regime = classify_regime(gfa.sigma_sq, gfa.diverged)
        except ValueError:
            gfa_regime = INDETERMINATE
        diagnostics.update(gfa_regime=gfa_regime, gfa_diverged=gfa.diverged, gfa_k_hat=gfa.k_hat,
                           gfa_events=gfa.diagnostics.get("events", []),
                           gfa_min_eig_ratio=gfa.diagnostics.get("min_eig_ratio", []))
    runtime = dict(simulation_s=sim_done - started, theory_s=done - sim_done, total_s=done - started)
    return ComparisonReport(config=config, rows=rows, regime=regime, diverged=diverged, diagnostics=diagnostics,
                            runtime=runtime)


# -- output -------------------------------------------------------------------

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    return repr(value) if math.isfinite(value) else ""


def report_csv(rows, columns=CSV_COLUMNS):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(col)) for col in columns])
    return buf.getvalue()


def read_report_csv(path):
    """Parse a report CSV back into row dicts (empty cells become ``None``)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            row = {}
            for key, text in rec.items():
                if text == "":
                    row[key] = None
                elif key == "t":
                    row[key] = int(text)
                else:
                    row[key] = float(text)
            rows.append(row)
    return rows


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _clean(obj):
    """Replace non-finite floats with None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return None
    return obj


def dumps_json(doc):
    return json.dumps(_clean(doc), indent=2, sort_keys=True, default=_json_default) + "\n"


def chart_for_rows(rows, *, title="", log_y=False):
    t = [r["t"] for r in rows]
    series = [
        dict(name="GFA MSE", x=t, y=[r.get("mse_gfa") for r in rows], marker="square", color="#1f4e9c"),
        dict(name="GFA MSEZ", x=t, y=[r.get("msez_gfa") for r in rows], marker="triangle", color="#1f4e9c",
             dashed=True),
        dict(name="sim MSE", x=t, y=[r.get("mse_sim_mean") for r in rows], marker="circle", color="#c0392b"),
        dict(name="sim MSEZ", x=t, y=[r.get("msez_sim_mean") for r in rows], marker="inverted_triangle",
             color="#c0392b", dashed=True),
    ]
    if any(r.get("mse_se") is not None for r in rows):
        series.append(dict(name="SE MSE", x=t, y=[r.get("mse_se") for r in rows], marker="square",
                           color="#27ae60", filled=True))
    return line_chart(series, title=title, ylabel="MSE / MSEZ", log_y=log_y)


def _title(config):
    return (f"{config.algorithm}  rho={config.rho:g} delta={config.delta:g} "
            f"lambda={config.lam:g} c={config.c:g}  N={config.N}")


def emit_report(report, out_dir, *, stem="report", log_y=None):
    """Write ``<stem>.csv``, ``<stem>.json`` and ``<stem>.svg`` into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if log_y is None:
        log_y = report.regime == DIVERGENCE
    paths = dict(csv=out / f"{stem}.csv", json=out / f"{stem}.json", svg=out / f"{stem}.svg")
    payloads = dict(
        csv=report_csv(report.rows),
        json=dumps_json(report.to_dict()),
        svg=chart_for_rows(report.rows, title=_title(report.config), log_y=log_y),
    )
    for key, path in paths.items():
        try:
            path.write_text(payloads[key])
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
    return paths
