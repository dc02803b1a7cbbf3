"""Tabulate the optimal query probability q*(x, eta) across agreement values.

The solver inverts the two-constraint implicit definition; the closed-form
bound min(4x(1-x) + eta/3, 1) should dominate it everywhere, and for small
learning rates the curve approaches the parabola 4x(1-x).  From eta = 8 the
regret guarantee is vacuous and q* collapses to zero.

Equivalent CLI:  lefcast qstar --etas 0.5,1,2,4 --grid 513 --out qstar.csv
"""

import numpy as np

from lefcast import q_star, q_star_upper
from lefcast.qstar import q_star_curve, write_curve_csv

ETAS = [0.5, 1.0, 2.0, 4.0]
GRID = 129

rows = q_star_curve(ETAS, GRID)
write_curve_csv(rows, "qstar_curves.csv")
print(f"wrote {len(rows)} rows to qstar_curves.csv")

xs = np.linspace(0, 1, GRID)
for eta in ETAS:
    vals = [q for x, e, q in rows if e == eta]
    peak = xs[int(np.argmax(vals))]
    print(f"eta={eta}: max q* = {max(vals):.4f} at x = {peak:.3f}, "
          f"q*(0.1) = {q_star(0.1, eta):.4f} vs bound {q_star_upper(0.1, eta):.4f}")

print("\nsmall-eta limit: q*(x, 1e-4) vs 4x(1-x)")
for x in (0.1, 0.25, 0.5):
    print(f"  x={x}: {q_star(x, 1e-4):.5f} vs {4 * x * (1 - x):.5f}")

print("\nvacuous regime: q*(x, 9) =", {x: q_star(x, 9.0) for x in (0.0, 0.3, 0.5)})

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.2))
    for eta in ETAS:
        ax.plot(xs, [q for x, e, q in rows if e == eta], label=f"eta = {eta}")
    ax.plot(xs, 4 * xs * (1 - xs), "k:", label="4x(1-x)")
    ax.set_xlabel("weighted agreement x")
    ax.set_ylabel("q*(x, eta)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig("qstar_curves.png", dpi=120)
    print("\nplot saved to qstar_curves.png")
except ImportError:
    pass
