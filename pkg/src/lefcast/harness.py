"""Monte Carlo experiment runner with per-run traces and aggregated bands.

Each run owns two independent random streams (environment, forecaster coins)
derived deterministically from (base_seed, run_index), so runs are
reproducible bit-for-bit, embarrassingly parallel, and aggregation does not
depend on completion order.  The harness scores the forecaster against the
true label on every round through the environment's scoring channel, even
when no query was made.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .environments import GapEnv, GapEnvConfig, ScriptedEnv, ThresholdEnv, ThresholdEnvConfig
from .forecaster import SamplingStrategy, init_state, step

__all__ = [
    "ExperimentConfig",
    "RunTrace",
    "Band",
    "MetricsSeries",
    "auto_eta",
    "run_once",
    "run_experiment",
    "loglog_slope",
    "label_complexity_bound",
    "ci_halfwidth",
]

# fixed CSV row order
METRIC_ORDER = [
    "loss",
    "regret_best",
    "regret_opt",
    "opt_loss",
    "labels",
    "norm_regret",
    "q",
    "lambda_min",
]

Z95 = 1.959963984540054  # two-sided 95% normal quantile


def auto_eta(num_experts, horizon):
    """Learning rate sqrt(8 ln(N) / n) minimizing the regret bound."""
    return math.sqrt(8.0 * math.log(num_experts) / horizon)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an environment family, a strategy, and run bookkeeping.

    ``eta`` may be the string "auto" (the bound-minimizing rate above) or an
    explicit positive float; elimination strategies always run at eta = inf.
    ``horizon`` may be omitted for scripted environments, where it defaults
    to the script length.
    """

    environment: ThresholdEnvConfig | GapEnvConfig | ScriptedEnv
    strategy: SamplingStrategy
    runs: int
    horizon: int | None = None
    eta: float | str = "auto"
    base_seed: int = 0
    record_stride: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be positive")
        if self.horizon is None and not isinstance(self.environment, ScriptedEnv):
            raise ValueError("horizon is required for non-scripted environments")
        n = self.resolved_horizon()
        if n < 1:
            raise ValueError("horizon must be positive")
        if isinstance(self.environment, ScriptedEnv) and n > self.environment.horizon:
            raise ValueError("horizon exceeds the scripted environment length")
        self.resolved_eta()  # validate eagerly

    @property
    def env_kind(self) -> str:
        if isinstance(self.environment, ThresholdEnvConfig):
            return "threshold"
        if isinstance(self.environment, GapEnvConfig):
            return "gap"
        return "scripted"

    def num_experts(self) -> int:
        return self.environment.num_experts

    def resolved_horizon(self) -> int:
        if self.horizon is not None:
            return self.horizon
        return self.environment.horizon

    def resolved_eta(self) -> float:
        if self.strategy.eliminates:
            return math.inf
        if self.eta == "auto":
            return auto_eta(self.num_experts(), self.resolved_horizon())
        eta = float(self.eta)
        if not eta > 0.0:
            raise ValueError("eta must be positive")
        return eta

    def metadata(self) -> dict:
        env = self.environment
        if isinstance(env, ThresholdEnvConfig):
            env_meta = {
                "kind": "threshold",
                "tau0": env.tau0,
                "kappa": env.kappa,
                "num_experts": env.num_experts,
            }
        elif isinstance(env, GapEnvConfig):
            env_meta = {
                "kind": "gap",
                "delta": env.delta,
                "base_error": env.base_error,
                "num_experts": env.num_experts,
                "best_index": env.best_index,
                "warmup": env.warmup,
            }
        else:
            env_meta = {
                "kind": "scripted",
                "horizon": env.horizon,
                "num_experts": env.num_experts,
            }
        return {
            "environment": env_meta,
            "strategy": self.strategy.kind.value,
            "strategy_tol": self.strategy.tol,
            "runs": self.runs,
            "horizon": self.resolved_horizon(),
            "eta": self.eta if self.eta == "auto" else float(self.eta),
            "resolved_eta": self.resolved_eta(),
            "base_seed": self.base_seed,
            "record_stride": self.record_stride,
        }


@dataclass
class RunTrace:
    """Metrics of a single run, sampled at the recorded rounds."""

    t: np.ndarray
    loss: np.ndarray
    regret_best: np.ndarray
    labels: np.ndarray
    q: np.ndarray
    lambda_min: np.ndarray
    regret_opt: np.ndarray | None = None
    opt_loss: np.ndarray | None = None


def _build_env(config: ExperimentConfig, rng):
    n = config.resolved_horizon()
    env = config.environment
    if isinstance(env, ThresholdEnvConfig):
        return ThresholdEnv(env, n, rng)
    if isinstance(env, GapEnvConfig):
        return GapEnv(env, n, rng)
    return env.replay()


def _record_times(horizon, stride):
    ts = list(range(stride, horizon + 1, stride))
    if not ts or ts[-1] != horizon:
        ts.append(horizon)
    return np.array(ts, dtype=np.int64)


def run_once(config: ExperimentConfig, run_index: int) -> RunTrace:
    """One independent realization, deterministically seeded by run_index."""
    seed_seq = np.random.SeedSequence((config.base_seed, run_index))
    env_ss, fc_ss = seed_seq.spawn(2)
    env = _build_env(config, np.random.default_rng(env_ss))
    rng = np.random.default_rng(fc_ss)

    n = config.resolved_horizon()
    num = config.num_experts()
    state = init_state(num, config.resolved_eta(), config.strategy)
    i_star = env.best_expert_index()
    is_threshold = config.env_kind == "threshold"

    rec_ts = _record_times(n, config.record_stride)
    n_rec = len(rec_ts)
    out = {
        name: np.zeros(n_rec)
        for name in ("loss", "regret_best", "labels", "q", "lambda_min")
    }
    if is_threshold:
        out["regret_opt"] = np.zeros(n_rec)
        out["opt_loss"] = np.zeros(n_rec)

    cum_loss = 0
    cum_opt_loss = 0
    cum_queries = 0
    cum_expert_losses = np.zeros(num, dtype=np.int64)
    lam = np.zeros(num)
    rec_i = 0

    for t in range(1, n + 1):
        rnd = env.next_round()
        state, rec = step(state, rnd.advice, rnd.reveal, rng)
        y = rnd.true_label
        rec.forecaster_loss = int(rec.y_hat != y)
        cum_loss += rec.forecaster_loss
        losses = (rnd.advice != y).astype(np.int64)
        cum_expert_losses += losses
        if rec.queried:
            cum_queries += 1
            lam += (losses - losses[i_star]) / rec.q
        if is_threshold:
            cum_opt_loss += int(rnd.optimal_prediction != y)
        if t == rec_ts[rec_i]:
            out["loss"][rec_i] = cum_loss
            out["regret_best"][rec_i] = cum_loss - cum_expert_losses.min()
            out["labels"][rec_i] = cum_queries
            out["q"][rec_i] = rec.q
            if num > 1:
                others = np.delete(lam, i_star)
                out["lambda_min"][rec_i] = others.min()
            else:
                out["lambda_min"][rec_i] = math.nan
            if is_threshold:
                out["regret_opt"][rec_i] = cum_loss - cum_opt_loss
                out["opt_loss"][rec_i] = cum_opt_loss
            rec_i += 1

    return RunTrace(
        t=rec_ts,
        loss=out["loss"],
        regret_best=out["regret_best"],
        labels=out["labels"],
        q=out["q"],
        lambda_min=out["lambda_min"],
        regret_opt=out.get("regret_opt"),
        opt_loss=out.get("opt_loss"),
    )


@dataclass
class Band:
    mean: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray

    @property
    def halfwidth(self):
        return self.mean - self.ci_lo


def ci_halfwidth(values, axis=0):
    """Normal-approximation 95% halfwidth of the mean; zero for a single run."""
    values = np.asarray(values)
    runs = values.shape[axis]
    if runs < 2:
        return np.zeros(values.mean(axis=axis).shape)
    return Z95 * values.std(axis=axis, ddof=1) / math.sqrt(runs)


def _band(matrix):
    mean = matrix.mean(axis=0)
    hw = ci_halfwidth(matrix, axis=0)
    return Band(mean, mean - hw, mean + hw)


@dataclass
class MetricsSeries:
    """Cross-run aggregation: mean and pointwise 95% CI per recorded round."""

    t: np.ndarray
    runs: int
    eta: float
    bands: dict[str, Band]
    degenerate_ci: bool = False
    traces: list[RunTrace] | None = field(default=None, repr=False)

    def band(self, name) -> Band:
        return self.bands[name]

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,metric,mean,ci_lo,ci_hi,runs\n")
            for name in METRIC_ORDER:
                if name not in self.bands:
                    continue
                b = self.bands[name]
                for i, t in enumerate(self.t):
                    fh.write(
                        f"{int(t)},{name},{float(b.mean[i])!r},{float(b.ci_lo[i])!r},"
                        f"{float(b.ci_hi[i])!r},{self.runs}\n"
                    )

    @staticmethod
    def from_csv(path) -> "MetricsSeries":
        per_metric: dict[str, list[tuple[int, float, float, float]]] = {}
        runs = 0
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "t,metric,mean,ci_lo,ci_hi,runs":
                raise ValueError(f"unexpected results header: {header}")
            for line in fh:
                t_s, name, mean_s, lo_s, hi_s, runs_s = line.strip().split(",")
                per_metric.setdefault(name, []).append(
                    (int(t_s), float(mean_s), float(lo_s), float(hi_s))
                )
                runs = int(runs_s)
        bands = {}
        t = None
        for name, rows in per_metric.items():
            rows.sort(key=lambda r: r[0])
            arr = np.array(rows)
            if t is None:
                t = arr[:, 0].astype(np.int64)
            bands[name] = Band(arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 3].copy())
        return MetricsSeries(t=t, runs=runs, eta=math.nan, bands=bands, degenerate_ci=runs == 1)


def run_experiment(config: ExperimentConfig, n_jobs=1, keep_traces=False) -> MetricsSeries:
    """Execute all runs (optionally in parallel) and aggregate."""
    if n_jobs == 1:
        traces = [run_once(config, i) for i in range(config.runs)]
    else:
        traces = Parallel(n_jobs=n_jobs)(
            delayed(run_once)(config, i) for i in range(config.runs)
        )

    t = traces[0].t
    tf = t.astype(float)
    bands = {}
    for name in ("loss", "regret_best", "labels", "q", "lambda_min"):
        bands[name] = _band(np.stack([getattr(tr, name) for tr in traces]))
    if traces[0].regret_opt is not None:
        bands["regret_opt"] = _band(np.stack([tr.regret_opt for tr in traces]))
        bands["opt_loss"] = _band(np.stack([tr.opt_loss for tr in traces]))
        norm_source = np.stack([tr.regret_opt for tr in traces])
    else:
        norm_source = np.stack([tr.regret_best for tr in traces])
    bands["norm_regret"] = _band(norm_source / tf)

    return MetricsSeries(
        t=t,
        runs=config.runs,
        eta=config.resolved_eta(),
        bands=bands,
        degenerate_ci=config.runs == 1,
        traces=traces if keep_traces else None,
    )


def loglog_slope(series: MetricsSeries, x_field="t", fit_window=0.5):
    """OLS slope of ln(normalized regret) against ln(x) on the tail window.

    ``x_field`` selects rounds ("t") or the mean label count ("labels").
    The window is the trailing ``fit_window`` fraction of recorded points.
    """
    if x_field == "t":
        x = series.t.astype(float)
    elif x_field == "labels":
        x = series.bands["labels"].mean
    else:
        raise ValueError("x_field must be 't' or 'labels'")
    y = series.bands["norm_regret"].mean
    start = int(math.floor(len(y) * (1.0 - fit_window)))
    xs, ys = x[start:], y[start:]
    if len(ys) < 10:
        raise ValueError("need at least 10 recorded points in the fit window")
    if (xs <= 0).any() or (ys <= 0).any():
        raise ValueError("log-log fit requires positive values in the window")
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


def label_complexity_bound(n, num_experts, eta, delta):
    """Expected-query upper bound 50/(eta delta^2) ln(N ln(n)/eta) + 3 eta n + 1."""
    if n < 4:
        raise ValueError("bound requires n >= 4")
    if not (eta > 0.0 and delta > 0.0 and num_experts >= 1):
        raise ValueError("parameters must be positive")
    lead = 50.0 / (eta * delta**2)
    if lead == 0.0:  # delta = inf collapses the search term
        return 3.0 * eta * n + 1.0
    return lead * math.log(num_experts * math.log(n) / eta) + 3.0 * eta * n + 1.0
