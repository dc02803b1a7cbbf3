"""Exponentially weighted forecasters with selective label sampling.

One round of the protocol: experts announce bit predictions, the forecaster
computes the weighted fraction A of experts voting 1, predicts
yhat ~ Ber(p(A)), and queries the true label with probability q(A).  Only
queried rounds update the weights, through the importance-weighted
multiplicative update exp(-eta * loss / q).  Weights are kept as natural
logs: with q as small as eta/3 the raw multipliers underflow within a few
hundred rounds.

The hard-elimination regime (eta = infinity, used when a perfect expert is
assumed) is represented by a surviving-set mask instead of -inf log-weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .qstar import DEFAULT_TOL, q_star, q_star_upper

__all__ = [
    "StrategyKind",
    "SamplingStrategy",
    "ForecasterState",
    "RoundRecord",
    "init_state",
    "weighted_agreement",
    "prediction_probability",
    "query_probability",
    "step",
]

_LOG2 = math.log(2.0)
_LOG4 = math.log(4.0)


class StrategyKind(Enum):
    FULL_INFORMATION = "full"
    FOLLOW_MAJORITY = "majority"
    BOOSTED_MAJORITY = "boosted"
    QSTAR_EXACT = "qstar-exact"
    QSTAR_UPPER = "qstar-upper"


_ELIMINATION_KINDS = frozenset(
    {StrategyKind.FOLLOW_MAJORITY, StrategyKind.BOOSTED_MAJORITY}
)


@dataclass(frozen=True)
class SamplingStrategy:
    """Which (p_t, q_t) rule is in force.

    ``tol`` is only consulted by the exact-q* strategy, where it sets the
    solver accuracy.
    """

    kind: StrategyKind
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not isinstance(self.kind, StrategyKind):
            raise TypeError(f"kind must be a StrategyKind, got {self.kind!r}")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")

    @property
    def eliminates(self) -> bool:
        """True for the hard-elimination (eta = inf) strategies."""
        return self.kind in _ELIMINATION_KINDS

    @classmethod
    def from_name(cls, name: str, tol: float = DEFAULT_TOL) -> "SamplingStrategy":
        return cls(StrategyKind(name), tol)


FULL_INFORMATION = SamplingStrategy(StrategyKind.FULL_INFORMATION)
FOLLOW_MAJORITY = SamplingStrategy(StrategyKind.FOLLOW_MAJORITY)
BOOSTED_MAJORITY = SamplingStrategy(StrategyKind.BOOSTED_MAJORITY)
QSTAR_EXACT = SamplingStrategy(StrategyKind.QSTAR_EXACT)
QSTAR_UPPER = SamplingStrategy(StrategyKind.QSTAR_UPPER)


@dataclass
class ForecasterState:
    """Complete memory of the forecaster between rounds.

    ``log_weights`` are unnormalized natural logs.  ``alive`` is the
    surviving-expert mask, present only in elimination mode.
    """

    log_weights: np.ndarray
    eta: float
    strategy: SamplingStrategy
    round_index: int = 0
    alive: np.ndarray | None = None

    @property
    def num_experts(self) -> int:
        return self.log_weights.shape[0]


@dataclass(slots=True)
class RoundRecord:
    """Per-round trace of one protocol step.

    ``expert_losses`` is populated only on queried rounds (the forecaster
    never sees the label otherwise).  ``forecaster_loss`` is filled in by
    the caller through the scoring channel: the protocol charges the
    forecaster every round, even unqueried ones, but the stepper itself has
    no access to the unrevealed label.
    """

    t: int
    agreement: float
    p: float
    q: float
    y_hat: int
    queried: int
    forecaster_loss: int | None = None
    expert_losses: np.ndarray | None = None


def init_state(num_experts, eta, strategy) -> ForecasterState:
    """Uniformly initialized forecaster state (all log-weights -ln N)."""
    if num_experts < 1:
        raise ValueError("need at least one expert")
    if math.isinf(eta):
        if not strategy.eliminates:
            raise ValueError(
                f"eta = inf requires an elimination strategy, got {strategy.kind.value}"
            )
    else:
        if strategy.eliminates:
            raise ValueError(
                f"{strategy.kind.value} is an elimination strategy and requires eta = inf"
            )
        if not eta > 0.0:
            raise ValueError("eta must be positive")
    log_weights = np.full(num_experts, -math.log(num_experts), dtype=float)
    alive = np.ones(num_experts, dtype=bool) if strategy.eliminates else None
    return ForecasterState(log_weights, float(eta), strategy, 0, alive)


def weighted_agreement(state: ForecasterState, advice) -> float:
    """Weight-fraction of experts predicting 1, evaluated stably in log space."""
    advice = np.asarray(advice)
    if advice.shape != (state.num_experts,):
        raise ValueError(
            f"advice has length {advice.shape}, expected ({state.num_experts},)"
        )
    if state.alive is not None:
        n_alive = int(state.alive.sum())
        return float((advice.astype(bool) & state.alive).sum()) / n_alive
    shifted = state.log_weights - state.log_weights.max()
    w = np.exp(shifted)
    a = float(w @ (advice != 0)) / float(w.sum())
    # the ratio can stray an ulp outside [0, 1]
    return min(max(a, 0.0), 1.0)


def prediction_probability(strategy: SamplingStrategy, agreement: float) -> float:
    """Probability of predicting 1 given the weighted agreement."""
    a = agreement
    if not 0.0 <= a <= 1.0:
        raise ValueError("agreement must lie in [0, 1]")
    kind = strategy.kind
    if kind is StrategyKind.FOLLOW_MAJORITY:
        return 1.0 if a >= 0.5 else 0.0
    if kind is StrategyKind.BOOSTED_MAJORITY:
        if a <= 0.25:
            return 0.0
        if a <= 0.5:
            return 1.0 + math.log(a) / _LOG4
        if a <= 0.75:
            return -math.log(1.0 - a) / _LOG4
        return 1.0
    return a


def query_probability(strategy: SamplingStrategy, agreement: float, eta: float) -> float:
    """Probability of querying the label given the weighted agreement."""
    a = agreement
    if not 0.0 <= a <= 1.0:
        raise ValueError("agreement must lie in [0, 1]")
    kind = strategy.kind
    if kind is StrategyKind.FULL_INFORMATION:
        return 1.0
    if kind is StrategyKind.FOLLOW_MAJORITY:
        if a == 0.0 or a == 1.0:
            return 0.0
        return -1.0 / (math.log(min(a, 1.0 - a)) / _LOG2)
    if kind is StrategyKind.BOOSTED_MAJORITY:
        if a == 0.0 or a == 1.0:
            return 0.0
        if a < 0.25:
            return -1.0 / (math.log(a) / _LOG4)
        if a <= 0.75:
            return 1.0
        return -1.0 / (math.log(1.0 - a) / _LOG4)
    if kind is StrategyKind.QSTAR_UPPER:
        return q_star_upper(a, eta)
    return _q_star_cached(a, eta, strategy.tol)


_QSTAR_CACHE: dict[tuple[float, float, float], float] = {}


def _q_star_cached(a, eta, tol):
    # A is rounded so cache keys coalesce; the induced q perturbation is
    # O(1e-11), far below every tolerance consumed downstream
    key = (round(a, 12), eta, tol)
    q = _QSTAR_CACHE.get(key)
    if q is None:
        q = q_star(key[0], eta, tol)
        _QSTAR_CACHE[key] = q
    return q


def importance_weighted_update(log_weights, expert_losses, eta, q):
    """Apply the multiplicative update -eta * loss / q in log space (in place)."""
    log_weights -= (eta / q) * expert_losses
    return log_weights


def step(state: ForecasterState, advice, label_oracle, rng):
    """Run one protocol round; returns (new state, round record).

    ``label_oracle`` is a zero-argument callable revealing the true label; it
    is invoked exactly once, and only when the query coin lands 1.  Exactly
    two uniform variates are consumed per round (prediction coin then query
    coin, the latter drawn and discarded when q = 0) so that seeded traces
    align across strategies sharing a random stream.
    """
    advice = np.asarray(advice)
    a = weighted_agreement(state, advice)
    p = prediction_probability(state.strategy, a)
    q = query_probability(state.strategy, a, state.eta)

    y_hat = 1 if rng.random() < p else 0
    u_query = rng.random()
    queried = 0 if q == 0.0 else int(u_query < q)

    record = RoundRecord(
        t=state.round_index + 1,
        agreement=a,
        p=p,
        q=q,
        y_hat=y_hat,
        queried=queried,
    )

    if not queried:
        new_state = replace(state, round_index=state.round_index + 1)
        return new_state, record

    label = int(label_oracle())
    expert_losses = (advice != label).astype(np.int8)
    record.expert_losses = expert_losses

    if state.alive is not None:
        alive = state.alive & (expert_losses == 0)
        if not alive.any():
            raise RuntimeError(
                "every surviving expert erred: elimination strategies assume "
                "a perfect expert exists"
            )
        new_state = replace(
            state, alive=alive, round_index=state.round_index + 1
        )
    else:
        log_weights = importance_weighted_update(
            state.log_weights.copy(), expert_losses, state.eta, q
        )
        new_state = replace(
            state, log_weights=log_weights, round_index=state.round_index + 1
        )
    return new_state, record
