"""Optimal label-sampling probability for the exponentially weighted forecaster.

The smallest query probability that keeps the full-information regret
guarantee intact is defined implicitly as

    q*(x, eta) = inf{ q in (0,1] :  x   + (q/eta) * ln(1-x + x*exp(-eta/q)) <= eta/8
                                and 1-x + (q/eta) * ln(x + (1-x)*exp(-eta/q)) <= eta/8 }

where x is the weighted fraction of experts voting 1.  There is no closed
form; this module solves the implicit definition numerically and provides
the cheap closed-form upper bound min(4x(1-x) + eta/3, 1) that dominates it.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "constraint_values",
    "q_star",
    "q_star_upper",
    "q_star_curve",
    "write_curve_csv",
]

DEFAULT_TOL = 1e-10
CURVE_TOL = 1e-8

_COARSE_GRID = 64
_VERIFY_GRID = 256
_FALLBACK_GRID = 100_000


def constraint_values(x, eta, q):
    """Left-hand sides of both feasibility constraints, as a pair.

    Both values are compared against ``eta / 8`` by callers.  ``q`` may be a
    scalar or an ndarray in (0, 1]; the return values match its shape.

    The ln terms are evaluated as logaddexp(ln(1-x), ln(x) - eta/q) so that
    exp(-eta/q) underflow degrades gracefully (for x < 1 the term tends to
    ln(1-x)) and the x in {0, 1} identities come out exactly zero.
    """
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0.0) or np.any(q > 1.0):
        raise ValueError("q must lie in (0, 1]")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if not eta > 0.0:
        raise ValueError("eta must be positive")

    log_x = math.log(x) if x > 0.0 else -math.inf
    log_1mx = math.log1p(-x) if x < 1.0 else -math.inf
    a = eta / q
    c1 = x + (q / eta) * np.logaddexp(log_1mx, log_x - a)
    c2 = (1.0 - x) + (q / eta) * np.logaddexp(log_x, log_1mx - a)
    if c1.ndim == 0:
        return float(c1), float(c2)
    return c1, c2


def _feasible(x, eta, q):
    c1, c2 = constraint_values(x, eta, q)
    thresh = eta / 8.0
    return (np.asarray(c1) <= thresh) & (np.asarray(c2) <= thresh)


def q_star(x, eta, tol=DEFAULT_TOL):
    """Smallest query probability satisfying both constraints, to accuracy tol.

    Values of x in {0, 1} and eta >= 8 give exactly 0 (the constraints hold
    for every q there).  Otherwise the feasibility predicate is probed on a
    64-point log grid down to ``tol``; if any grid point is infeasible, the
    interval between the last infeasible point and its feasible successor is
    bisected.  The feasible set is not known a priori to be an up-set in q,
    so the bisection result is verified on a 256-point grid of [result, 1];
    a failed verification falls back to an exhaustive 1e5-point scan.  The
    returned value is therefore the smallest point with a verified feasible
    tail, which is exactly the quantity the regret guarantee consumes.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if not eta > 0.0:
        raise ValueError("eta must be positive")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    if x == 0.0 or x == 1.0 or eta >= 8.0:
        return 0.0

    grid = np.geomspace(tol, 1.0, _COARSE_GRID)
    feas = _feasible(x, eta, grid)
    if feas.all():
        # feasible down to q = tol: the infimum is below resolution
        return 0.0
    if not feas[-1]:
        # q = 1 is always feasible mathematically; reaching here means the
        # margin at q = 1 is below float noise, so 1 is the honest answer
        return 1.0

    last_bad = int(np.nonzero(~feas)[0][-1])
    lo, hi = float(grid[last_bad]), float(grid[last_bad + 1])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bool(_feasible(x, eta, mid)):
            hi = mid
        else:
            lo = mid

    if _feasible(x, eta, np.linspace(hi, 1.0, _VERIFY_GRID)).all():
        return hi

    # verification failed: scan exhaustively and return the up-set edge
    scan = np.geomspace(tol, 1.0, _FALLBACK_GRID)
    feas = _feasible(x, eta, scan)
    if feas.all():
        return 0.0
    if not feas[-1]:
        return 1.0
    return float(scan[int(np.nonzero(~feas)[0][-1]) + 1])


def q_star_upper(x, eta):
    """Closed-form upper bound min(4x(1-x) + eta/3, 1) on q_star."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if eta < 0.0:
        raise ValueError("eta must be nonnegative")
    return min(4.0 * x * (1.0 - x) + eta / 3.0, 1.0)


def q_star_curve(etas, grid_points, tol=CURVE_TOL):
    """Evaluate q_star on a uniform x-grid for each eta.

    Returns a list of (x, eta, q_star) tuples sorted by (eta, x), ready for
    CSV serialization or plotting.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    xs = np.linspace(0.0, 1.0, int(grid_points))
    rows = []
    for eta in sorted(float(e) for e in etas):
        for x in xs:
            rows.append((float(x), eta, q_star(float(x), eta, tol)))
    return rows


def write_curve_csv(rows, path):
    """Serialize q_star_curve rows with header ``x,eta,q_star``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,eta,q_star\n")
        for x, eta, q in rows:
            fh.write(f"{x!r},{eta!r},{q!r}\n")
