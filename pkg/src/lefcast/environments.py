"""Label and advice generators: scripted, threshold-noise, and fixed-gap.

Every environment hands out expert advice eagerly but reveals the true label
only on demand, through ``Round.reveal()``.  The harness scores the
forecaster on every round through the separate ``Round.true_label`` channel,
which exists because the protocol charges the forecaster whether or not it
queried; the forecaster itself must only ever touch ``reveal``.

Environments are one-shot: build a fresh instance (or ``replay()`` a
scripted one) per run.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = [
    "Round",
    "ThresholdEnvConfig",
    "ThresholdEnv",
    "GapEnvConfig",
    "GapEnv",
    "ScriptedEnv",
    "threshold_round",
    "noise_curve",
    "optimal_risk",
    "threshold_risk",
    "gap_round",
    "enumerate_adversarial",
]

MAX_ENUM_EXPERTS = 4
MAX_ENUM_HORIZON = 6


@dataclass(slots=True)
class Round:
    """One round's advice plus a deferred label handle.

    ``x`` and ``optimal_prediction`` are populated by the threshold
    environment only.
    """

    t: int
    advice: np.ndarray
    _label: int
    revealed: bool = False
    x: float | None = None
    optimal_prediction: int | None = None

    def reveal(self) -> int:
        """Forecaster-facing label access; idempotent, flagged."""
        self.revealed = True
        return self._label

    @property
    def true_label(self) -> int:
        """Harness-facing scoring channel; does not count as a reveal."""
        return self._label


def noise_curve(x, tau0, kappa):
    """P(Y=1 | X=x) for the threshold model: 1/2 + sign(x-tau0)|x-tau0|^(kappa-1)/2."""
    u = np.asarray(x, dtype=float) - tau0
    z = 0.5 + 0.5 * np.sign(u) * np.abs(u) ** (kappa - 1.0)
    return float(z) if z.ndim == 0 else z


@dataclass(frozen=True)
class ThresholdEnvConfig:
    """Threshold stochastic model: X ~ U[0,1], Y ~ Ber(noise_curve(X)).

    Experts are the threshold rules 1{X >= (i-1)/(N-1)}.  N must be odd so
    the optimal rule 1{X >= tau0} is itself an expert when tau0 sits on the
    grid (it always does for tau0 = 1/2).
    """

    tau0: float = 0.5
    kappa: float = 2.0
    num_experts: int = 225
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.tau0 <= 1.0:
            raise ValueError("tau0 must lie in [0, 1]")
        if not self.kappa > 1.0:
            raise ValueError("kappa must exceed 1")
        if self.num_experts < 1 or self.num_experts % 2 == 0:
            raise ValueError("num_experts must be a positive odd integer")


def threshold_round(config: ThresholdEnvConfig, rng):
    """Draw one round: (advice, label, x, optimal_prediction)."""
    x = rng.random()
    label = int(rng.random() < noise_curve(x, config.tau0, config.kappa))
    advice = (x >= _expert_thresholds(config.num_experts)).astype(np.int8)
    return advice, label, x, int(x >= config.tau0)


def _expert_thresholds(num_experts):
    return np.linspace(0.0, 1.0, num_experts)


def threshold_risk(theta, tau0, kappa):
    """Per-round error probability of the threshold rule 1{X >= theta}."""

    def antideriv(x):
        return 0.5 * x + abs(x - tau0) ** kappa / (2.0 * kappa)

    # integral of noise_curve over [0, theta] plus of (1 - curve) over [theta, 1]
    return (
        2.0 * antideriv(theta) - antideriv(0.0) - antideriv(1.0) + 1.0 - theta
    )


def optimal_risk(config: ThresholdEnvConfig):
    """Per-round error probability of the optimal rule 1{X >= tau0}.

    Closed form 1/2 - 1/(kappa * 2^kappa) at tau0 = 1/2; numeric quadrature
    of min(zeta, 1 - zeta) otherwise.
    """
    if config.tau0 == 0.5:
        return 0.5 - 1.0 / (config.kappa * 2.0**config.kappa)
    value, _ = integrate.quad(
        lambda x: min(
            noise_curve(x, config.tau0, config.kappa),
            1.0 - noise_curve(x, config.tau0, config.kappa),
        ),
        0.0,
        1.0,
        points=[config.tau0],
    )
    return value


class ThresholdEnv:
    """Pregenerates the whole horizon; advice rows are computed on demand."""

    def __init__(self, config: ThresholdEnvConfig, horizon: int, rng=None):
        if horizon < 1:
            raise ValueError("horizon must be positive")
        if rng is None:
            rng = np.random.default_rng(config.seed)
        self.config = config
        self.horizon = horizon
        self.num_experts = config.num_experts
        self._thresholds = _expert_thresholds(config.num_experts)
        self.x = rng.random(horizon)
        self.labels = (
            rng.random(horizon) < noise_curve(self.x, config.tau0, config.kappa)
        ).astype(np.int8)
        self._cursor = 0

    def next_round(self) -> Round:
        t = self._cursor
        if t >= self.horizon:
            raise IndexError("environment horizon exhausted")
        self._cursor += 1
        x = self.x[t]
        return Round(
            t=t + 1,
            advice=(x >= self._thresholds).astype(np.int8),
            _label=int(self.labels[t]),
            x=float(x),
            optimal_prediction=int(x >= self.config.tau0),
        )

    def best_expert_index(self) -> int:
        """Expert with the smallest per-round risk (closest threshold to tau0)."""
        risks = [
            threshold_risk(th, self.config.tau0, self.config.kappa)
            for th in self._thresholds
        ]
        return int(np.argmin(risks))


@dataclass(frozen=True)
class GapEnvConfig:
    """Fixed per-round expected-loss gap between one best expert and the rest.

    Labels are fair coins; expert i disagrees with the label independently
    with probability base_error (the best expert) or base_error + delta, so
    E[loss_i - loss_best] = delta exactly every round.  During the optional
    ``warmup`` rounds every expert, the best one included, errs at rate
    base_error + delta (the best expert only emerges afterwards).
    """

    delta: float
    base_error: float
    num_experts: int
    best_index: int = 0
    seed: int = 0
    warmup: int = 0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.0 < self.base_error < 1.0:
            raise ValueError("base_error must lie in (0, 1)")
        if self.base_error + self.delta >= 1.0:
            raise ValueError("base_error + delta must stay below 1")
        if self.num_experts < 1:
            raise ValueError("need at least one expert")
        if not 0 <= self.best_index < self.num_experts:
            raise ValueError("best_index out of range")
        if self.warmup < 0:
            raise ValueError("warmup must be nonnegative")


def gap_round(config: GapEnvConfig, t: int, rng):
    """Draw round t (1-based): (advice, label)."""
    label = int(rng.random() < 0.5)
    eps = np.full(config.num_experts, config.base_error + config.delta)
    if t > config.warmup:
        eps[config.best_index] = config.base_error
    flips = rng.random(config.num_experts) < eps
    advice = (label ^ flips).astype(np.int8)
    return advice, label


class GapEnv:
    def __init__(self, config: GapEnvConfig, horizon: int, rng=None):
        if horizon < 1:
            raise ValueError("horizon must be positive")
        if rng is None:
            rng = np.random.default_rng(config.seed)
        self.config = config
        self.horizon = horizon
        self.num_experts = config.num_experts
        labels = (rng.random(horizon) < 0.5).astype(np.int8)
        eps = np.full((horizon, config.num_experts), config.base_error + config.delta)
        eps[config.warmup :, config.best_index] = config.base_error
        flips = rng.random((horizon, config.num_experts)) < eps
        self.labels = labels
        self.advice = (labels[:, None] ^ flips).astype(np.int8)
        self._cursor = 0

    def next_round(self) -> Round:
        t = self._cursor
        if t >= self.horizon:
            raise IndexError("environment horizon exhausted")
        self._cursor += 1
        return Round(t=t + 1, advice=self.advice[t], _label=int(self.labels[t]))

    def best_expert_index(self) -> int:
        return self.config.best_index


class ScriptedEnv:
    """A fixed (advice matrix, label vector) pair, possibly adversarial."""

    def __init__(self, advice, labels):
        advice = np.asarray(advice, dtype=np.int8)
        labels = np.asarray(labels, dtype=np.int8)
        if advice.ndim != 2 or labels.ndim != 1 or advice.shape[0] != labels.shape[0]:
            raise ValueError("advice must be (n, N) with labels of length n")
        if not (np.isin(advice, (0, 1)).all() and np.isin(labels, (0, 1)).all()):
            raise ValueError("advice and labels must be bits")
        self.advice = advice
        self.labels = labels
        self.horizon, self.num_experts = advice.shape
        self._cursor = 0

    def next_round(self) -> Round:
        t = self._cursor
        if t >= self.horizon:
            raise IndexError("environment horizon exhausted")
        self._cursor += 1
        return Round(t=t + 1, advice=self.advice[t], _label=int(self.labels[t]))

    def replay(self) -> "ScriptedEnv":
        """Fresh cursor over the same data (arrays are shared)."""
        fresh = ScriptedEnv.__new__(ScriptedEnv)
        fresh.advice = self.advice
        fresh.labels = self.labels
        fresh.horizon, fresh.num_experts = self.advice.shape
        fresh._cursor = 0
        return fresh

    def expert_losses(self) -> np.ndarray:
        """Total loss per expert over the whole script."""
        return (self.advice != self.labels[:, None]).sum(axis=0)

    def best_expert_index(self) -> int:
        return int(np.argmin(self.expert_losses()))

    def has_perfect_expert(self) -> bool:
        return bool((self.expert_losses() == 0).any())

    def to_text(self) -> str:
        """Plain text form: first line ``n N``, then ``label advice_bits`` rows."""
        lines = [f"{self.horizon} {self.num_experts}"]
        for t in range(self.horizon):
            bits = "".join(str(int(b)) for b in self.advice[t])
            lines.append(f"{int(self.labels[t])} {bits}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ScriptedEnv":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty scripted environment")
        n, num_experts = (int(v) for v in lines[0].split())
        if len(lines) != n + 1:
            raise ValueError(f"expected {n} rounds, found {len(lines) - 1}")
        labels = np.empty(n, dtype=np.int8)
        advice = np.empty((n, num_experts), dtype=np.int8)
        for t, line in enumerate(lines[1:]):
            label_str, bits = line.split()
            if len(bits) != num_experts:
                raise ValueError(f"round {t + 1}: expected {num_experts} advice bits")
            labels[t] = int(label_str)
            advice[t] = [int(b) for b in bits]
        return cls(advice, labels)

    @classmethod
    def from_file(cls, path) -> "ScriptedEnv":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def enumerate_adversarial(num_experts, horizon, require_perfect_expert=False):
    """Yield every scripted environment of the given shape.

    There are 2^(horizon * (num_experts + 1)) raw (advice, labels)
    combinations; with the filter on, only those where some expert matches
    every label survive.  Bounded to num_experts <= 4 and horizon <= 6.
    """
    if num_experts < 1 or num_experts > MAX_ENUM_EXPERTS:
        raise ValueError(f"num_experts must lie in [1, {MAX_ENUM_EXPERTS}]")
    if horizon < 1 or horizon > MAX_ENUM_HORIZON:
        raise ValueError(f"horizon must lie in [1, {MAX_ENUM_HORIZON}]")
    rows = list(itertools.product((0, 1), repeat=num_experts))
    for labels in itertools.product((0, 1), repeat=horizon):
        for advice in itertools.product(rows, repeat=horizon):
            env = ScriptedEnv(np.array(advice, dtype=np.int8), np.array(labels, dtype=np.int8))
            if require_perfect_expert and not env.has_perfect_expert():
                continue
            yield env
