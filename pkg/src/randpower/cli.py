"""Command-line entry point.

Subcommands: design, power-sim, power-theory, power-asymptotic, toy-r2, se,
grid, charts. CSV goes to stdout or --out. An optional flat key=value
--config file supplies flag defaults; explicit flags override it. Exit
codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from randpower.seeding import derive_seed

__all__ = ["main", "build_parser"]


def _config_defaults(path: str) -> dict:
    """Parse a flat key=value config file ('#' comments and blanks allowed).
    Keys use flag spelling with '-' or '_' interchangeably."""
    defaults = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, val = line.split("=", 1)
            defaults[key.strip().replace("-", "_")] = val.strip()
    return defaults


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randpower",
        description="Restricted randomization designs and randomization-test power.",
    )
    parser.add_argument("--config", help="flat key=value file supplying flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, default=0, help="root seed (default 0)")

    p = sub.add_parser("design", help="generate a DesignSet and emit it as CSV")
    p.add_argument("--strategy", required=True,
                   choices=["bcrd", "rerandomization", "matching", "greedy_pair_switch", "best"])
    p.add_argument("--n", type=int, required=True, help="sample size (even)")
    p.add_argument("--R", type=int, required=True, help="number of mirrored pairs")
    p.add_argument("--threshold", type=float,
                   help="rerandomization |B_x| threshold (default: calibrated)")
    p.add_argument("--cache-dir", help="calibration cache directory")
    add_common(p)

    p = sub.add_parser("power-sim", help="empirical power for one simulation cell")
    p.add_argument("--design", required=True,
                   choices=["bcrd", "rerandomization", "matching", "greedy_pair_switch", "best"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--beta", type=float, default=0.25)
    p.add_argument("--beta-x", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--n-designs", type=int, default=20)
    p.add_argument("--n-z", type=int, default=200)
    p.add_argument("--threshold", type=float)
    p.add_argument("--cache-dir")
    add_common(p)

    p = sub.add_parser("power-theory", help="finite-R power (Monte Carlo integral)")
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--mc", type=int, default=1_000_000, help="Monte Carlo samples")
    add_common(p)

    p = sub.add_parser("power-asymptotic", help="asymptotic (R -> infinity) power")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    add_common(p)

    p = sub.add_parser("toy-r2", help="R=2, alpha=1/4 toy-case power")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    add_common(p)

    p = sub.add_parser("se", help="power standard-error decomposition")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--R", type=int, default=1000)
    add_common(p)

    p = sub.add_parser("grid", help="run the full simulation grid")
    p.add_argument("--preset", choices=["desk", "paper"], default="desk")
    p.add_argument("--threads", type=int, default=0,
                   help="worker processes (0 = all cores; env RANDPOWER_THREADS)")
    p.add_argument("--cache-dir", default=".randpower_cache")
    add_common(p)

    p = sub.add_parser("charts", help="render SVG charts from a results CSV")
    p.add_argument("--results", required=True, help="results CSV from `grid`")
    p.add_argument("--out-dir", required=True)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _one_row_csv(columns, row) -> str:
    from randpower.sim import _fmt

    return (
        ",".join(columns) + "\n" + ",".join(_fmt(row.get(c, "")) for c in columns) + "\n"
    )


def _resolve_threads(value: int) -> int:
    if value and value > 0:
        return value
    env = os.environ.get("RANDPOWER_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _make_design(strategy, n, R, seed, threshold, cache_dir):
    from randpower.alloc import normal_quantile_covariate
    from randpower import designs as d
    from randpower.sim import calibrated_threshold

    x = normal_quantile_covariate(n)
    if strategy == "bcrd":
        return d.sample_bcrd(n, R, seed)
    if strategy == "rerandomization":
        a = threshold if threshold is not None else calibrated_threshold(n, seed, cache_dir)
        return d.sample_rerandomization(x, a, R, seed)
    if strategy == "matching":
        return d.sample_matching(x, R, seed)
    if strategy == "greedy_pair_switch":
        return d.greedy_pair_switch(x, R, seed)
    return d.best_design(x, R)


def _cmd_design(args) -> int:
    import io

    from randpower.designs import design_to_csv

    design = _make_design(args.strategy, args.n, args.R, args.seed,
                          args.threshold, args.cache_dir)
    buf = io.StringIO()
    design_to_csv(design, buf)
    _emit(buf.getvalue(), args.out)
    return 0


def _cmd_power_sim(args) -> int:
    from randpower.alloc import normal_quantile_covariate
    from randpower.randtest import ExperimentScenario, power_metric
    from randpower.sim import EMPIRICAL_COLUMNS

    x = normal_quantile_covariate(args.n)
    scenario = ExperimentScenario(
        n=args.n, beta=args.beta, beta_x=args.beta_x, sigma_z=1.0,
        alpha=args.alpha, x=x,
    )
    n_designs = 1 if args.design == "best" else args.n_designs

    def factory(seed):
        return _make_design(args.design, args.n, args.R, seed,
                            args.threshold, args.cache_dir)

    result = power_metric(factory, scenario, n_designs, args.n_z, args.seed)
    row = {
        "design": args.design, "n": args.n, "R": args.R, "beta": args.beta,
        "beta_x": args.beta_x, "alpha": args.alpha, "power": result.power,
        "se": result.se, "n_designs": result.n_designs, "n_z": result.n_z,
        "mean_abs_r": result.mean_abs_r, "mean_abs_Bx": result.mean_abs_Bx,
        "seed": args.seed, "panel": f"beta_x={args.beta_x:g}_n={args.n}",
    }
    _emit(_one_row_csv(EMPIRICAL_COLUMNS, row), args.out)
    return 0


def _cmd_power_theory(args) -> int:
    from randpower.theory import QuadratureSpec, TheoryParams, finite_power_with_se
    from randpower.sim import THEORY_COLUMNS

    params = TheoryParams(gamma=args.gamma, rho=args.rho, R=args.R, alpha=args.alpha)
    quad = QuadratureSpec(mc_samples=args.mc, seed=args.seed)
    power, se = finite_power_with_se(params, quad)
    row = {"mode": "finite", "R": args.R, "rho": args.rho, "gamma": args.gamma,
           "alpha": args.alpha, "power": power, "se": se,
           "mc_samples": args.mc, "seed": args.seed}
    _emit(_one_row_csv(THEORY_COLUMNS, row), args.out)
    return 0


def _cmd_power_asymptotic(args) -> int:
    from randpower.theory import QuadratureSpec, TheoryParams, asymptotic_power
    from randpower.sim import THEORY_COLUMNS

    params = TheoryParams(gamma=args.gamma, rho=args.rho, R=1, alpha=args.alpha)
    power = asymptotic_power(params, QuadratureSpec())
    row = {"mode": "asymptotic", "R": "", "rho": args.rho, "gamma": args.gamma,
           "alpha": args.alpha, "power": power, "se": 0.0,
           "mc_samples": 0, "seed": args.seed}
    _emit(_one_row_csv(THEORY_COLUMNS, row), args.out)
    return 0


def _cmd_toy_r2(args) -> int:
    from randpower.theory import toy_power_r2
    from randpower.sim import THEORY_COLUMNS

    power = toy_power_r2(args.rho, args.gamma)
    row = {"mode": "toy_r2", "R": 2, "rho": args.rho, "gamma": args.gamma,
           "alpha": 0.25, "power": power, "se": 0.0, "mc_samples": 0,
           "seed": args.seed}
    _emit(_one_row_csv(THEORY_COLUMNS, row), args.out)
    return 0


def _cmd_se(args) -> int:
    from randpower.theory import QuadratureSpec, TheoryParams, power_se
    from randpower.sim import THEORY_COLUMNS

    params = TheoryParams(gamma=args.gamma, rho=args.rho, R=args.R, alpha=args.alpha)
    decomp = power_se(params, QuadratureSpec())
    row = {"mode": "se", "R": args.R, "rho": args.rho, "gamma": args.gamma,
           "alpha": args.alpha, "power": decomp.se_finite(args.R),
           "se": decomp.se_limit, "mc_samples": 0, "seed": args.seed}
    _emit(_one_row_csv(THEORY_COLUMNS, row), args.out)
    return 0


def _cmd_grid(args) -> int:
    import io

    from randpower.sim import EMPIRICAL_COLUMNS, desk_grid, paper_grid, run_grid, write_csv

    spec = paper_grid(args.seed) if args.preset == "paper" else desk_grid(args.seed)
    rows = run_grid(spec, cache_dir=args.cache_dir, threads=_resolve_threads(args.threads))
    buf = io.StringIO()
    write_csv(rows, buf, EMPIRICAL_COLUMNS)
    _emit(buf.getvalue(), args.out)
    return 0


def _cmd_charts(args) -> int:
    from randpower.charts import emit_charts
    from randpower.sim import read_csv

    paths = emit_charts(read_csv(args.results), args.out_dir)
    sys.stdout.write("\n".join(paths) + "\n")
    return 0


_COMMANDS = {
    "design": _cmd_design,
    "power-sim": _cmd_power_sim,
    "power-theory": _cmd_power_theory,
    "power-asymptotic": _cmd_power_asymptotic,
    "toy-r2": _cmd_toy_r2,
    "se": _cmd_se,
    "grid": _cmd_grid,
    "charts": _cmd_charts,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # pre-scan for --config so its values become defaults that flags override
    if "--config" in argv:
        idx = argv.index("--config")
        try:
            path = argv[idx + 1]
        except IndexError:
            parser.error("--config needs a path")
        try:
            defaults = _config_defaults(path)
        except (OSError, ValueError) as exc:
            print(f"error: bad config: {exc}", file=sys.stderr)
            return 2
        for action in parser._subparsers._group_actions[0].choices.values():
            known = {a.dest for a in action._actions}
            action.set_defaults(**{k: v for k, v in defaults.items() if k in known})
            # a flag satisfied by the config no longer has to appear on argv
            for a in action._actions:
                if a.required and a.dest in defaults:
                    a.required = False
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    # re-coerce config-supplied string defaults through each flag's type
    for key, val in vars(args).items():
        if isinstance(val, str) and key in ("n", "R", "threads", "n_designs", "n_z",
                                            "mc", "seed"):
            setattr(args, key, int(val))
        elif isinstance(val, str) and key in ("beta", "beta_x", "alpha", "rho",
                                              "gamma", "threshold"):
            setattr(args, key, float(val))
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
