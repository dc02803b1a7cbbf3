"""Command-line interface: experiments, q* tables, verification sweeps.

Exit codes: 0 success, 1 a verified bound was violated, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import __version__
from .environments import (
    GapEnvConfig,
    ScriptedEnv,
    ThresholdEnvConfig,
    enumerate_adversarial,
)
from .forecaster import SamplingStrategy
from .harness import ExperimentConfig, label_complexity_bound, run_experiment
from .oracle import general_bound, sweep_general, sweep_majority
from .qstar import CURVE_TOL, q_star_curve, write_curve_csv

STRATEGY_CHOICES = ["full", "majority", "boosted", "qstar-exact", "qstar-upper"]


def _eta_flag(value):
    if value == "auto":
        return value
    try:
        eta = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"eta must be 'auto' or a number, got {value!r}")
    return eta


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="lefcast",
        description="Label-efficient forecasting with expert advice: "
        "simulations, optimal query probabilities, exact verification.",
    )
    parser.add_argument("--version", action="version", version=f"lefcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    # simulate flags default to None so that explicitly-given flags can be
    # told apart from settings coming out of --config; _SIM_DEFAULTS fills
    # whatever neither source provided
    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    sim.add_argument("--config", help="JSON settings file; explicit flags override it")
    sim.add_argument("--env", choices=["threshold", "gap", "scripted"])
    sim.add_argument("--kappa", type=float, help="threshold env noise exponent")
    sim.add_argument("--tau0", type=float, help="threshold env boundary (default 0.5)")
    sim.add_argument("--delta", type=float, help="gap env expected-loss gap")
    sim.add_argument("--base-error", type=float, help="gap env best-expert error rate (default 0.1)")
    sim.add_argument("--best-index", type=int, help="gap env best expert index (default 0)")
    sim.add_argument("--warmup", type=int, help="gap env rounds before the best expert emerges")
    sim.add_argument("--file", help="scripted env text file")
    sim.add_argument("--n", type=int, help="horizon")
    sim.add_argument("--experts", type=int, help="number of experts")
    sim.add_argument("--eta", type=_eta_flag, help="learning rate or 'auto' (default auto)")
    sim.add_argument("--strategy", choices=STRATEGY_CHOICES)
    sim.add_argument("--qstar-tol", type=float, help="solver tolerance for qstar-exact")
    sim.add_argument("--runs", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--stride", type=int, help="record metrics every k rounds")
    sim.add_argument("--threads", type=int, help="parallel workers (-1 = all cores)")
    sim.add_argument("--out", help="results CSV path; metadata goes to <out>.meta.json")

    qst = sub.add_parser("qstar", help="tabulate the optimal query probability")
    qst.add_argument("--etas", required=True, help="comma-separated learning rates")
    qst.add_argument("--grid", type=int, required=True, help="number of x grid points")
    qst.add_argument("--tol", type=float, default=CURVE_TOL)
    qst.add_argument("--out", required=True)

    ver = sub.add_parser("verify", help="exhaustive exact bound checks on small instances")
    ver.add_argument("--suite", required=True, choices=["perfect", "boosted", "general", "all"])
    ver.add_argument("--max-n", type=int, default=None)
    ver.add_argument("--max-experts", type=int, default=None)
    ver.add_argument("--etas", default="0.25,0.5,1,2", help="learning rates for the general suite")

    enu = sub.add_parser("enumerate", help="list scripted adversarial environments")
    enu.add_argument("--experts", type=int, required=True)
    enu.add_argument("--n", type=int, required=True)
    enu.add_argument("--perfect", action="store_true", help="keep only perfect-expert sequences")
    enu.add_argument("--out", help="output file (default stdout)")
    return parser


_SIM_DEFAULTS = {
    "env": None,
    "kappa": None,
    "tau0": 0.5,
    "delta": None,
    "base_error": 0.1,
    "best_index": 0,
    "warmup": 0,
    "file": None,
    "n": None,
    "experts": None,
    "eta": "auto",
    "strategy": "qstar-upper",
    "qstar_tol": 1e-10,
    "runs": 500,
    "seed": 0,
    "stride": 1,
    "threads": -1,
    "out": None,
}


def _merge_simulate_settings(args, parser):
    """Resolve each setting as: explicit flag, else config file, else default."""
    from_file = {}
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"could not read --config: {exc}")
        if not isinstance(from_file, dict):
            parser.error("--config must hold a JSON object")
        unknown = set(from_file) - set(_SIM_DEFAULTS)
        if unknown:
            parser.error(f"unknown keys in --config: {sorted(unknown)}")
        if "eta" in from_file and from_file["eta"] != "auto":
            from_file["eta"] = float(from_file["eta"])
    for name, default in _SIM_DEFAULTS.items():
        if getattr(args, name) is None:
            setattr(args, name, from_file.get(name, default))
    if args.env is None:
        parser.error("--env is required (flag or config file)")
    if args.out is None:
        parser.error("--out is required (flag or config file)")


def _simulate(args, parser) -> int:
    _merge_simulate_settings(args, parser)
    forbid = {
        "threshold": [("--delta", args.delta), ("--file", args.file)],
        "gap": [("--kappa", args.kappa), ("--file", args.file)],
        "scripted": [("--kappa", args.kappa), ("--delta", args.delta), ("--experts", args.experts)],
    }
    for flag, value in forbid[args.env]:
        if value is not None:
            parser.error(f"{flag} is not valid with --env {args.env}")

    try:
        if args.env == "threshold":
            if args.n is None or args.experts is None or args.kappa is None:
                parser.error("--env threshold requires --n, --experts and --kappa")
            environment = ThresholdEnvConfig(
                tau0=args.tau0, kappa=args.kappa, num_experts=args.experts
            )
            horizon = args.n
        elif args.env == "gap":
            if args.n is None or args.experts is None or args.delta is None:
                parser.error("--env gap requires --n, --experts and --delta")
            environment = GapEnvConfig(
                delta=args.delta,
                base_error=args.base_error,
                num_experts=args.experts,
                best_index=args.best_index,
                warmup=args.warmup,
            )
            horizon = args.n
        else:
            if args.file is None:
                parser.error("--env scripted requires --file")
            environment = ScriptedEnv.from_file(args.file)
            horizon = args.n  # may be None: defaults to script length
    except ValueError as exc:
        parser.error(str(exc))

    try:
        strategy = SamplingStrategy.from_name(args.strategy, args.qstar_tol)
        config = ExperimentConfig(
            environment=environment,
            strategy=strategy,
            runs=args.runs,
            horizon=horizon,
            eta=args.eta,
            base_seed=args.seed,
            record_stride=args.stride,
        )
    except ValueError as exc:
        parser.error(str(exc))

    started = time.time()
    series = run_experiment(config, n_jobs=args.threads)
    elapsed = time.time() - started
    series.to_csv(args.out)

    meta = config.metadata()
    meta["version"] = __version__
    meta["wall_clock_seconds"] = elapsed
    if args.env == "scripted":
        meta["environment"]["path"] = args.file
    if args.config is not None:
        meta["config_file"] = args.config
    with open(args.out + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    n = config.resolved_horizon()
    eta = config.resolved_eta()
    final_regret = series.band("regret_best").mean[-1]
    final_labels = series.band("labels").mean[-1]
    summary = (
        f"n={n} experts={config.num_experts()} strategy={args.strategy} runs={args.runs} "
        f"mean_regret_best={final_regret:.6g} mean_labels={final_labels:.6g}"
    )
    if "regret_opt" in series.bands:
        summary += f" mean_regret_opt={series.band('regret_opt').mean[-1]:.6g}"
    if not strategy.eliminates:
        summary += f" regret_bound={general_bound(config.num_experts(), n, eta):.6g}"
    if args.env == "gap":
        summary += (
            f" label_bound={label_complexity_bound(n, config.num_experts(), eta, args.delta):.6g}"
        )
    if series.degenerate_ci:
        summary += " (single run: CI widths are zero)"
    print(summary)
    return 0


def _qstar(args, parser) -> int:
    try:
        etas = [float(v) for v in args.etas.split(",") if v.strip()]
    except ValueError:
        parser.error(f"could not parse --etas {args.etas!r}")
    if not etas or any(eta <= 0 for eta in etas):
        parser.error("all etas must be positive")
    if args.grid < 2:
        parser.error("--grid must be at least 2")
    rows = q_star_curve(etas, args.grid, args.tol)
    write_curve_csv(rows, args.out)
    print(f"wrote {len(rows)} rows for {len(etas)} eta values to {args.out}")
    return 0


def _report(report, label):
    status = "pass" if report.passed else "FAIL"
    print(
        f"[{status}] {label}: envs={report.num_envs} worst={report.worst_value:.9f} "
        f"bound={report.bound:.9f} margin={report.margin:.3e}"
    )
    if not report.passed:
        print("worst-case environment:")
        print(report.worst_env.to_text(), end="")
    return report.passed


def _print_tightest(label, report):
    print(
        f"{label}: tightest margin {report.margin:.3e} at N={report.num_experts} "
        f"n={report.horizon}" + (f" eta={report.eta}" if report.eta is not None else "")
    )
    print("worst-case environment:")
    print(report.worst_env.to_text(), end="")


def _verify(args, parser) -> int:
    failures = 0
    suites = ["perfect", "boosted", "general"] if args.suite == "all" else [args.suite]

    if "perfect" in suites or "boosted" in suites:
        max_n = args.max_n or 5
        max_experts = args.max_experts or 4
        if max_n > 6 or max_experts > 4:
            parser.error("elimination sweeps support --max-n <= 6 and --max-experts <= 4")
        for suite in ("perfect", "boosted"):
            if suite not in suites:
                continue
            strategy = SamplingStrategy.from_name(
                "majority" if suite == "perfect" else "boosted"
            )
            worst_overall = None
            for num in range(2, max_experts + 1):
                for n in range(1, max_n + 1):
                    report = sweep_majority(num, n, strategy)
                    ok = _report(report, f"suite={suite} N={num} n={n}")
                    failures += 0 if ok else 1
                    if worst_overall is None or report.margin < worst_overall.margin:
                        worst_overall = report
            _print_tightest(f"suite={suite}", worst_overall)

    if "general" in suites:
        max_n = args.max_n or 6
        max_experts = args.max_experts or 3
        if max_n > 10 or max_experts > 4:
            parser.error("general sweeps support --max-n <= 10 and --max-experts <= 4")
        try:
            etas = [float(v) for v in args.etas.split(",") if v.strip()]
        except ValueError:
            parser.error(f"could not parse --etas {args.etas!r}")
        worst_overall = None
        for name in ("qstar-exact", "qstar-upper"):
            strategy = SamplingStrategy.from_name(name)
            for num in range(2, max_experts + 1):
                for n in range(1, max_n + 1):
                    for eta in etas:
                        report = sweep_general(num, n, eta, strategy)
                        ok = _report(
                            report, f"suite=general strategy={name} N={num} n={n} eta={eta}"
                        )
                        failures += 0 if ok else 1
                        if worst_overall is None or report.margin < worst_overall.margin:
                            worst_overall = report
        _print_tightest("suite=general", worst_overall)

    if failures:
        print(f"{failures} bound violation(s) found", file=sys.stderr)
        return 1
    print("all bounds verified")
    return 0


def _enumerate(args, parser) -> int:
    try:
        envs = enumerate_adversarial(args.experts, args.n, args.perfect)
        chunks = [env.to_text() for env in envs]
    except ValueError as exc:
        parser.error(str(exc))
    text = "\n".join(chunks)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"count={len(chunks)}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        return _simulate(args, parser)
    if args.command == "qstar":
        return _qstar(args, parser)
    if args.command == "verify":
        return _verify(args, parser)
    return _enumerate(args, parser)


if __name__ == "__main__":
    sys.exit(main())
