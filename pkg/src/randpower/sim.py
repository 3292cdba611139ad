"""Experiment grid runner: empirical power over (design, n, R, beta, beta_x)
cells, the theory grid (finite-R power with its asymptotic reference), and
deterministic CSV output.

Reproducibility: every stochastic stream is keyed by derive_seed(root_seed,
coordinates...), so identical GridSpecs produce identical CSV bytes and
changing one cell coordinate re-keys no other cell's stream. Designs are
generated once per (strategy, n, R, rep) and shared across (beta, beta_x)
cells; allocations do not depend on the response model.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from randpower.alloc import allocation_stats, normal_quantile_covariate
from randpower.designs import (
    best_design,
    calibrate_threshold,
    greedy_pair_switch,
    sample_bcrd,
    sample_matching,
    sample_rerandomization,
)
from randpower.randtest import (
    ExperimentScenario,
    aggregate_power,
    power_over_designs,
)
from randpower.seeding import derive_seed

__all__ = [
    "GridSpec",
    "paper_grid",
    "desk_grid",
    "EMPIRICAL_COLUMNS",
    "THEORY_COLUMNS",
    "run_grid",
    "run_theory_grid",
    "write_csv",
    "read_csv",
    "calibrated_threshold",
]

EMPIRICAL_COLUMNS = [
    "design",
    "n",
    "R",
    "beta",
    "beta_x",
    "alpha",
    "power",
    "se",
    "n_designs",
    "n_z",
    "mean_abs_r",
    "mean_abs_Bx",
    "seed",
    "panel",
]

THEORY_COLUMNS = ["mode", "R", "rho", "gamma", "alpha", "power", "se", "mc_samples", "seed"]

CALIBRATION_DRAWS = 1_000_000
CALIBRATION_QUANTILE = 0.001


@dataclass(frozen=True)
class GridSpec:
    """Simulation grid; defaults are the full protocol (n in {26,50,100,200},
    R in {10,...,3160}, beta in {0, 0.25}, beta_x in {0, 1}, 50 design reps,
    500 z reps, alpha = 0.05)."""

    n_values: tuple[int, ...] = (26, 50, 100, 200)
    R_values: tuple[int, ...] = (10, 30, 100, 320, 1000, 3160)
    beta_values: tuple[float, ...] = (0.0, 0.25)
    beta_x_values: tuple[float, ...] = (0.0, 1.0)
    designs: tuple[str, ...] = (
        "bcrd",
        "rerandomization",
        "matching",
        "greedy_pair_switch",
        "best",
    )
    n_design_reps: int = 50
    n_z_reps: int = 500
    alpha: float = 0.05
    root_seed: int = 0


def paper_grid(root_seed: int = 0) -> GridSpec:
    """The full simulation protocol (hours of compute)."""
    return GridSpec(root_seed=root_seed)


def desk_grid(root_seed: int = 0) -> GridSpec:
    """Desk-scale trim: n in {26, 50} with 20 x 200 replicates. Preserves
    every qualitative comparison of the full grid at a fraction of the cost."""
    return GridSpec(
        n_values=(26, 50),
        n_design_reps=20,
        n_z_reps=200,
        root_seed=root_seed,
    )


def calibrated_threshold(
    n: int, seed: int, cache_dir: str | None = None
) -> float:
    """Rerandomization threshold for sample size n: the 0.1% |B_x| quantile
    over 10^6 BCRD draws, cached to disk keyed by (n, seed)."""
    cache_path = None
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        cache_path = os.path.join(cache_dir, f"rerand_threshold_n{n}_seed{seed}.json")
        if os.path.exists(cache_path):
            with open(cache_path) as fh:
                return json.load(fh)["a"]
    x = normal_quantile_covariate(n)
    thr = calibrate_threshold(
        x, CALIBRATION_DRAWS, CALIBRATION_QUANTILE, seed=derive_seed(seed, "calibration", n)
    )
    if cache_path is not None:
        with open(cache_path, "w") as fh:
            json.dump(
                {
                    "n": n,
                    "seed": seed,
                    "a": thr.a,
                    "draws": thr.calibration_draws,
                    "quantile": thr.calibration_quantile,
                },
                fh,
            )
    return thr.a


def _make_designs(strategy, n, R, x, threshold, n_reps, root_seed):
    """n_reps DesignSets for one (strategy, n, R); the best design is
    deterministic and gets a single rep."""
    if strategy == "best":
        return [best_design(x, R)]
    designs = []
    for rep in range(n_reps):
        seed = derive_seed(root_seed, strategy, n, R, "design", rep)
        if strategy == "bcrd":
            designs.append(sample_bcrd(n, R, seed))
        elif strategy == "rerandomization":
            designs.append(sample_rerandomization(x, threshold, R, seed))
        elif strategy == "matching":
            designs.append(sample_matching(x, R, seed))
        elif strategy == "greedy_pair_switch":
            designs.append(greedy_pair_switch(x, R, seed))
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
    return designs


def _run_block(args):
    """All (beta, beta_x) cells for one (strategy, n, R) block. Top-level
    function so process pools can pickle it."""
    strategy, n, R, spec = args
    x = normal_quantile_covariate(n)
    threshold = None
    if strategy == "rerandomization":
        threshold = calibrated_threshold(n, spec.root_seed, cache_dir=spec_cache_dir.get())
    designs = _make_designs(
        strategy, n, R, x, threshold, spec.n_design_reps, spec.root_seed
    )
    stats = [allocation_stats(D.unmirrored(), x) for D in designs]
    mean_abs_r = float(np.mean([s["mean_abs_r"] for s in stats]))
    mean_abs_bx = float(np.mean([s["mean_abs_Bx"] for s in stats]))
    rows = []
    for beta in spec.beta_values:
        for beta_x in spec.beta_x_values:
            scenario = ExperimentScenario(
                n=n, beta=beta, beta_x=beta_x, sigma_z=1.0, alpha=spec.alpha, x=x
            )
            cell_seed = derive_seed(spec.root_seed, strategy, n, R, beta, beta_x)
            z_seeds = [derive_seed(cell_seed, "z", rep) for rep in range(len(designs))]
            powers = power_over_designs(designs, scenario, spec.n_z_reps, z_seeds)
            power, se = aggregate_power(powers)
            rows.append(
                {
                    "design": strategy,
                    "n": n,
                    "R": R,
                    "beta": beta,
                    "beta_x": beta_x,
                    "alpha": spec.alpha,
                    "power": power,
                    "se": se,
                    "n_designs": len(designs),
                    "n_z": spec.n_z_reps,
                    "mean_abs_r": mean_abs_r,
                    "mean_abs_Bx": mean_abs_bx,
                    "seed": cell_seed,
                    "panel": f"beta_x={beta_x:g}_n={n}",
                }
            )
    return rows


class _CacheDir:
    """Process-safe holder for the calibration cache path."""

    def __init__(self):
        self._path = None

    def set(self, path):
        self._path = path

    def get(self):
        return self._path


spec_cache_dir = _CacheDir()


def run_grid(
    spec: GridSpec,
    cache_dir: str | None = None,
    threads: int = 1,
    on_error: str = "record",
) -> list[dict]:
    """One PowerResult row per (design, n, R, beta, beta_x) cell.

    The best design is restricted to n <= 26 and runs a single deterministic
    rep. Per-cell failures are recorded (power/se = nan) and the run
    continues unless on_error='raise'. Rows come back in a fixed sort order
    regardless of thread count.
    """
    spec_cache_dir.set(cache_dir)
    blocks = []
    for strategy in spec.designs:
        for n in spec.n_values:
            if strategy == "best" and n > 26:
                continue
            for R in spec.R_values:
                blocks.append((strategy, n, R, spec))
    all_rows = []
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=threads, initializer=spec_cache_dir.set, initargs=(cache_dir,)
        ) as pool:
            results = pool.map(_run_block_guarded, blocks)
            for rows in results:
                all_rows.extend(rows)
    else:
        for block in blocks:
            all_rows.extend(
                _run_block_guarded(block) if on_error == "record" else _run_block(block)
            )
    all_rows.sort(key=lambda r: (r["design"], r["n"], r["R"], r["beta"], r["beta_x"]))
    return all_rows


def _run_block_guarded(args):
    try:
        return _run_block(args)
    except Exception as exc:  # noqa: BLE001 - cell failures must not kill the run
        strategy, n, R, spec = args
        rows = []
        for beta in spec.beta_values:
            for beta_x in spec.beta_x_values:
                rows.append(
                    {
                        "design": strategy,
                        "n": n,
                        "R": R,
                        "beta": beta,
                        "beta_x": beta_x,
                        "alpha": spec.alpha,
                        "power": float("nan"),
                        "se": float("nan"),
                        "n_designs": 0,
                        "n_z": spec.n_z_reps,
                        "mean_abs_r": float("nan"),
                        "mean_abs_Bx": float("nan"),
                        "seed": derive_seed(spec.root_seed, strategy, n, R, beta, beta_x),
                        "panel": f"beta_x={beta_x:g}_n={n}",
                        "error": repr(exc),
                    }
                )
        return rows


def run_theory_grid(
    R_values=(10, 30, 100, 320, 1000, 3160),
    rho_values=(0.0, 0.1, 0.2, 0.3),
    n_values=(26, 50, 100, 200),
    alpha: float = 0.05,
    mc_samples: int = 1_000_000,
    beta: float = 0.25,
    seed: int = 0,
) -> list[dict]:
    """Finite-R power per (n, rho, R) cell with gamma = sqrt(n)*beta, plus
    one asymptotic reference row per (n, rho)."""
    from randpower.theory import (
        QuadratureSpec,
        TheoryParams,
        asymptotic_power,
        finite_power_with_se,
    )

    rows = []
    for n in n_values:
        gamma = math.sqrt(n) * beta
        for rho in rho_values:
            base = TheoryParams(gamma=gamma, rho=rho, R=1, alpha=alpha)
            quad = QuadratureSpec(mc_samples=mc_samples)
            limit = asymptotic_power(base, quad)
            rows.append(
                {
                    "mode": "asymptotic",
                    "R": "",
                    "rho": rho,
                    "gamma": gamma,
                    "alpha": alpha,
                    "power": limit,
                    "se": 0.0,
                    "mc_samples": 0,
                    "seed": "",
                    "n": n,
                }
            )
            for R in R_values:
                params = replace(base, R=R)
                cell_seed = derive_seed(seed, "theory", n, rho, R)
                quad = QuadratureSpec(mc_samples=mc_samples, seed=cell_seed)
                power, se = finite_power_with_se(params, quad)
                rows.append(
                    {
                        "mode": "finite",
                        "R": R,
                        "rho": rho,
                        "gamma": gamma,
                        "alpha": alpha,
                        "power": power,
                        "se": se,
                        "mc_samples": mc_samples,
                        "seed": cell_seed,
                        "n": n,
                    }
                )
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(rows: list[dict], path_or_file, columns: list[str] | None = None) -> None:
    """UTF-8, LF line endings, 17-significant-digit reals."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    if hasattr(path_or_file, "write"):
        _write_rows(rows, path_or_file, columns)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="\n") as fh:
            _write_rows(rows, fh, columns)


def _write_rows(rows, fh, columns):
    fh.write(",".join(columns) + "\n")
    for row in rows:
        fh.write(",".join(_fmt(row.get(col, "")) for col in columns) + "\n")


def read_csv(path) -> list[dict]:
    """Read back a results CSV, coercing numeric fields."""
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        rows = []
        for row in _csv.DictReader(fh):
            out = {}
            for key, val in row.items():
                if val is None or val == "":
                    out[key] = val
                    continue
                try:
                    out[key] = int(val)
                except ValueError:
                    try:
                        out[key] = float(val)
                    except ValueError:
                        out[key] = val
            rows.append(out)
        return rows
