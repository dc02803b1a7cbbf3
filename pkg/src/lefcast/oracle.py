"""Exact expected-loss computation on small scripted instances.

Ground truth for the worst-case guarantees comes from integrating out every
bit of algorithm randomness:

* elimination strategies: the forecaster's entire state is the surviving
  expert set, so a dynamic program over (round, mask) is exact;
* finite-eta strategies: the prediction coin never enters the state, so its
  loss is integrated analytically (p(1-y) + (1-p)y) and only query-decision
  paths branch, giving at most 2^n weight trajectories.

`exact_majority` / `exact_general` are readable single-instance references.
The `sweep_*` engines run the same computations vectorized over every
scripted environment of a given shape, quotiented by the symmetries the
forecaster provably has (expert relabeling always; global bit flip only for
strategies with p = A, because the majority tie-break at A = 1/2 is not
flip-symmetric).  The references exist to cross-check the engines.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .environments import ScriptedEnv
from .forecaster import (
    SamplingStrategy,
    StrategyKind,
    prediction_probability,
    query_probability,
)
from .qstar import q_star

__all__ = [
    "ExactResult",
    "SweepReport",
    "exact_majority",
    "exact_general",
    "sweep_majority",
    "sweep_general",
    "majority_bound",
    "general_bound",
]

MAX_MAJORITY_EXPERTS = 16
MAX_MAJORITY_HORIZON = 12
MAX_GENERAL_EXPERTS = 4
MAX_GENERAL_HORIZON = 10

_GENERAL_KINDS = frozenset(
    {StrategyKind.FULL_INFORMATION, StrategyKind.QSTAR_EXACT, StrategyKind.QSTAR_UPPER}
)


@dataclass(frozen=True)
class ExactResult:
    """Exact expectations for one scripted environment."""

    expected_loss: float
    expected_regret: float
    expected_queries: float
    best_expert_loss: int


def majority_bound(num_experts, strategy) -> float:
    """Worst-case expected-loss bound for the elimination strategies."""
    if strategy.kind is StrategyKind.FOLLOW_MAJORITY:
        return math.log2(num_experts)
    if strategy.kind is StrategyKind.BOOSTED_MAJORITY:
        return math.log(num_experts) / math.log(4.0)
    raise ValueError(f"not an elimination strategy: {strategy.kind.value}")


def general_bound(num_experts, horizon, eta) -> float:
    """Expected-regret bound ln(N)/eta + n*eta/8."""
    return math.log(num_experts) / eta + horizon * eta / 8.0


def exact_majority(env: ScriptedEnv, strategy: SamplingStrategy) -> ExactResult:
    """Exact expectations for an elimination forecaster on a scripted env.

    Requires a perfect expert (otherwise the surviving set can empty out,
    which the elimination semantics do not define).
    """
    if not strategy.eliminates:
        raise ValueError("exact_majority requires an elimination strategy")
    n, num = env.horizon, env.num_experts
    if num > MAX_MAJORITY_EXPERTS or n > MAX_MAJORITY_HORIZON:
        raise ValueError("instance too large for the mask dynamic program")
    if not env.has_perfect_expert():
        raise ValueError("environment has no perfect expert")

    full = (1 << num) - 1
    rows = [int(sum(int(env.advice[t, i]) << i for i in range(num))) for t in range(n)]
    labels = [int(y) for y in env.labels]
    eta = math.inf
    cache: dict[tuple[int, int], tuple[float, float]] = {}

    def rec(t, mask):
        if t == n:
            return 0.0, 0.0
        key = (t, mask)
        hit = cache.get(key)
        if hit is not None:
            return hit
        r, y = rows[t], labels[t]
        a = (r & mask).bit_count() / mask.bit_count()
        p = prediction_probability(strategy, a)
        q = query_probability(strategy, a, eta)
        loss = p + y - 2.0 * p * y
        if q == 0.0:
            loss_rest, queries = rec(t + 1, mask)
            out = (loss + loss_rest, queries)
        else:
            survivors = mask & (r if y else ~r & full)
            if survivors == mask:
                # nobody eliminated: both branches coincide
                loss_rest, queries = rec(t + 1, mask)
                out = (loss + loss_rest, q + queries)
            elif q == 1.0:
                loss_rest, queries = rec(t + 1, survivors)
                out = (loss + loss_rest, 1.0 + queries)
            else:
                l1, q1 = rec(t + 1, survivors)
                l0, q0 = rec(t + 1, mask)
                out = (loss + q * l1 + (1.0 - q) * l0, q + q * q1 + (1.0 - q) * q0)
        cache[key] = out
        return out

    expected_loss, expected_queries = rec(0, full)
    best = int(env.expert_losses().min())
    return ExactResult(expected_loss, expected_loss - best, expected_queries, best)


def exact_general(env: ScriptedEnv, eta, strategy: SamplingStrategy) -> ExactResult:
    """Exact expectations for a finite-eta forecaster (p = A) on a scripted env."""
    if strategy.kind not in _GENERAL_KINDS:
        raise ValueError(f"exact_general does not support {strategy.kind.value}")
    if not eta > 0.0 or math.isinf(eta):
        raise ValueError("eta must be positive and finite")
    n, num = env.horizon, env.num_experts
    if num > MAX_GENERAL_EXPERTS or n > MAX_GENERAL_HORIZON:
        raise ValueError("instance too large for the query-path enumeration")

    advice = env.advice
    labels = env.labels

    def rec(t, lw):
        if t == n:
            return 0.0, 0.0
        f = advice[t]
        y = int(labels[t])
        m = max(lw)
        w = [math.exp(v - m) for v in lw]
        a = sum(wi for wi, fi in zip(w, f) if fi) / sum(w)
        loss = a + y - 2.0 * a * y
        q = query_probability(strategy, a, eta)
        if q == 0.0:
            loss_rest, queries = rec(t + 1, lw)
            return loss + loss_rest, queries
        err = [int(fi != y) for fi in f]
        if all(err) or not any(err):
            # uniform multiplier: relative weights unchanged, branches coincide
            loss_rest, queries = rec(t + 1, lw)
            return loss + loss_rest, q + queries
        shifted = [v - eta * e / q for v, e in zip(lw, err)]
        top = max(shifted)
        lw_query = tuple(v - top for v in shifted)
        l1, q1 = rec(t + 1, lw_query)
        if q == 1.0:
            return loss + l1, 1.0 + q1
        l0, q0 = rec(t + 1, lw)
        return loss + q * l1 + (1.0 - q) * l0, q + q * q1 + (1.0 - q) * q0

    expected_loss, expected_queries = rec(0, (0.0,) * num)
    best = int(env.expert_losses().min())
    return ExactResult(expected_loss, expected_loss - best, expected_queries, best)


# ---------------------------------------------------------------------------
# exhaustive sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepReport:
    """Worst case located by an exhaustive sweep over scripted environments."""

    strategy: SamplingStrategy
    num_experts: int
    horizon: int
    eta: float | None
    bound: float
    num_envs: int
    worst_value: float
    worst_env: ScriptedEnv
    tolerance: float = 1e-9

    @property
    def margin(self) -> float:
        return self.bound - self.worst_value

    @property
    def passed(self) -> bool:
        return self.worst_value <= self.bound + self.tolerance


def _sorted_column_combos(num_values, num_experts):
    """All multisets of expert columns: one representative per relabeling orbit."""
    combos = np.fromiter(
        itertools.chain.from_iterable(
            itertools.combinations_with_replacement(range(num_values), num_experts)
        ),
        dtype=np.int64,
    )
    return combos.reshape(-1, num_experts)


def _cross_with_labels(combos, num_values):
    cols = np.repeat(combos, num_values, axis=0)
    labs = np.tile(np.arange(num_values, dtype=np.int64), combos.shape[0])
    return cols, labs


def _encode(cols, labs, num_values):
    key = labs.copy()
    for i in range(cols.shape[1]):
        key = key * num_values + cols[:, i]
    return key


def _decode_env(cols_row, lab_word, horizon) -> ScriptedEnv:
    num = len(cols_row)
    advice = np.empty((horizon, num), dtype=np.int8)
    labels = np.empty(horizon, dtype=np.int8)
    for t in range(horizon):
        labels[t] = (int(lab_word) >> t) & 1
        for i in range(num):
            advice[t, i] = (int(cols_row[i]) >> t) & 1
    return ScriptedEnv(advice, labels)


def _popcount_table(size):
    return np.array([v.bit_count() for v in range(size)], dtype=np.int64)


def sweep_majority(
    num_experts, horizon, strategy: SamplingStrategy, batch_size=1 << 16
) -> SweepReport:
    """Max exact E[loss] over every perfect-expert scripted env of this shape.

    Environments are enumerated up to expert relabeling, which the
    elimination forecaster is invariant to.
    """
    if not strategy.eliminates:
        raise ValueError("sweep_majority requires an elimination strategy")
    n, num = horizon, num_experts
    num_values = 1 << n
    cols, labs = _cross_with_labels(_sorted_column_combos(num_values, num), num_values)
    perfect = (cols == labs[:, None]).any(axis=1)
    cols, labs = cols[perfect], labs[perfect]

    size = 1 << num
    full = size - 1
    pc = _popcount_table(size)
    masks = np.arange(size)
    # per (advice row, mask): agreement, then p/q through the strategy maps
    a_tab = np.empty((size, size))
    for r in range(size):
        with np.errstate(invalid="ignore"):
            a_tab[r] = pc[r & masks] / np.maximum(pc[masks], 1)
    a_tab[:, 0] = 0.5  # empty mask is unreachable; keep the tables finite
    p_tab = np.empty_like(a_tab)
    q_tab = np.empty_like(a_tab)
    for r in range(size):
        for mask in range(size):
            p_tab[r, mask] = prediction_probability(strategy, a_tab[r, mask])
            q_tab[r, mask] = query_probability(strategy, a_tab[r, mask], math.inf)
    surv_tab = np.empty((size, size, 2), dtype=np.int64)
    for r in range(size):
        surv_tab[r, :, 0] = masks & (~r & full)
        surv_tab[r, :, 1] = masks & r

    worst_value = -math.inf
    worst_idx = -1
    total = len(labs)
    for start in range(0, total, batch_size):
        c = cols[start : start + batch_size]
        lab = labs[start : start + batch_size]
        value = np.zeros((len(lab), size))
        for t in reversed(range(n)):
            row = np.zeros(len(lab), dtype=np.int64)
            for i in range(num):
                row |= ((c[:, i] >> t) & 1) << i
            y = ((lab >> t) & 1).astype(np.int64)
            ri = row[:, None]
            loss = p_tab[ri, masks] + (y[:, None]) * (1.0 - 2.0 * p_tab[ri, masks])
            q = q_tab[ri, masks]
            surv = surv_tab[ri, masks, y[:, None]]
            value = loss + q * np.take_along_axis(value, surv, axis=1) + (1.0 - q) * value
        batch_loss = value[:, full]
        j = int(np.argmax(batch_loss))
        if batch_loss[j] > worst_value:
            worst_value = float(batch_loss[j])
            worst_idx = start + j

    worst_env = _decode_env(cols[worst_idx], labs[worst_idx], n)
    return SweepReport(
        strategy=strategy,
        num_experts=num,
        horizon=n,
        eta=None,
        bound=majority_bound(num, strategy),
        num_envs=total,
        worst_value=worst_value,
        worst_env=worst_env,
    )


class _VectorQ:
    """Vectorized q(A) evaluation for the finite-eta strategies."""

    def __init__(self, strategy, eta):
        self.kind = strategy.kind
        self.eta = eta
        self.tol = strategy.tol
        self._memo: dict[float, float] = {}

    def __call__(self, a):
        if self.kind is StrategyKind.FULL_INFORMATION:
            return np.ones_like(a)
        if self.kind is StrategyKind.QSTAR_UPPER:
            return np.minimum(4.0 * a * (1.0 - a) + self.eta / 3.0, 1.0)
        rounded = np.round(a, 12)
        uniq, inverse = np.unique(rounded, return_inverse=True)
        out = np.empty(uniq.shape)
        for j, x in enumerate(uniq):
            x = float(min(max(x, 0.0), 1.0))
            val = self._memo.get(x)
            if val is None:
                val = q_star(x, self.eta, self.tol)
                self._memo[x] = val
            out[j] = val
        return out[inverse]


def sweep_general(
    num_experts, horizon, eta, strategy: SamplingStrategy, batch_size=1 << 17
) -> SweepReport:
    """Max exact E[regret] over every scripted env of this shape (no filter).

    Environments are enumerated up to expert relabeling and a global bit
    flip (advice and labels complemented), both of which leave the p = A
    forecaster's expected regret unchanged.
    """
    if strategy.kind not in _GENERAL_KINDS:
        raise ValueError(f"sweep_general does not support {strategy.kind.value}")
    if num_experts > MAX_GENERAL_EXPERTS or horizon > MAX_GENERAL_HORIZON:
        raise ValueError("instance too large for the query-path enumeration")
    n, num = horizon, num_experts
    num_values = 1 << n
    mask_all = num_values - 1
    cols, labs = _cross_with_labels(_sorted_column_combos(num_values, num), num_values)
    flipped_cols = np.sort(~cols & mask_all, axis=1)
    flipped_labs = ~labs & mask_all
    keep = _encode(cols, labs, num_values) <= _encode(flipped_cols, flipped_labs, num_values)
    cols, labs = cols[keep], labs[keep]
    total = len(labs)

    pc = _popcount_table(num_values)
    qfun = _VectorQ(strategy, eta)

    worst_value = -math.inf
    worst_idx = -1
    for start in range(0, total, batch_size):
        c = cols[start : start + batch_size]
        lab = labs[start : start + batch_size]
        batch = len(lab)
        fbits = [((c >> t) & 1).astype(float) for t in range(n)]
        ybits = [((lab >> t) & 1).astype(float) for t in range(n)]
        expected_loss = np.zeros(batch)

        def rec(t, lw, prob):
            nonlocal expected_loss
            if t == n:
                return
            f, y = fbits[t], ybits[t]
            w = np.exp(lw - lw.max(axis=1, keepdims=True))
            a = (w * f).sum(axis=1) / w.sum(axis=1)
            np.clip(a, 0.0, 1.0, out=a)
            expected_loss += prob * (a + y * (1.0 - 2.0 * a))
            q = qfun(a)
            q_safe = np.where(q > 0.0, q, 1.0)
            lw_query = lw - (eta / q_safe)[:, None] * (f != y[:, None])
            lw_query -= lw_query.max(axis=1, keepdims=True)
            prob_query = prob * q
            if prob_query.any():
                rec(t + 1, lw_query, prob_query)
            prob_skip = prob * (1.0 - q)
            if prob_skip.any():
                rec(t + 1, lw, prob_skip)

        rec(0, np.zeros((batch, num)), np.ones(batch))
        best = pc[c[:, 0] ^ lab]
        for i in range(1, num):
            best = np.minimum(best, pc[c[:, i] ^ lab])
        regret = expected_loss - best
        j = int(np.argmax(regret))
        if regret[j] > worst_value:
            worst_value = float(regret[j])
            worst_idx = start + j

    worst_env = _decode_env(cols[worst_idx], labs[worst_idx], n)
    return SweepReport(
        strategy=strategy,
        num_experts=num,
        horizon=n,
        eta=eta,
        bound=general_bound(num, n, eta),
        num_envs=total,
        worst_value=worst_value,
        worst_env=worst_env,
    )
