"""Exhaustively verify the worst-case guarantees on small instances.

For every scripted sequence of a given shape the exact dynamic programs
compute E[loss] and E[regret] with all algorithm randomness integrated out.
The elimination forecasters must stay within log2(N) (follow-the-majority)
and log4(N) (boosted majority); the finite-eta forecasters within
ln(N)/eta + n*eta/8 for any query rule at least q*.

Equivalent CLI:  lefcast verify --suite all --max-n 4
"""

from lefcast import (
    BOOSTED_MAJORITY,
    FOLLOW_MAJORITY,
    QSTAR_EXACT,
    QSTAR_UPPER,
    exact_majority,
    sweep_general,
    sweep_majority,
)

print("elimination strategies, every perfect-expert sequence:")
for strategy, name in ((FOLLOW_MAJORITY, "follow-majority"), (BOOSTED_MAJORITY, "boosted")):
    for num, horizon in ((2, 3), (3, 3), (4, 4)):
        rep = sweep_majority(num, horizon, strategy)
        print(
            f"  {name:16s} N={num} n={horizon}: {rep.num_envs:6d} envs, "
            f"worst E[L] = {rep.worst_value:.6f} <= {rep.bound:.6f} "
            f"(margin {rep.margin:.2e})"
        )

print("\nthe tight case: near-equal splits with the minority always right")
worst = sweep_majority(4, 2, FOLLOW_MAJORITY).worst_env
print(worst.to_text())
res = exact_majority(worst, FOLLOW_MAJORITY)
print(f"E[L] = {res.expected_loss} = log2(4); E[queries] = {res.expected_queries}")

print("finite-eta strategies, every sequence (no perfect expert needed):")
for num, horizon, eta in ((2, 4, 0.5), (3, 3, 1.0)):
    for strategy, name in ((QSTAR_EXACT, "q*-exact"), (QSTAR_UPPER, "q*-upper")):
        rep = sweep_general(num, horizon, eta, strategy)
        print(
            f"  {name:9s} N={num} n={horizon} eta={eta}: {rep.num_envs:6d} envs, "
            f"worst E[R] = {rep.worst_value:.6f} <= {rep.bound:.6f}"
        )
