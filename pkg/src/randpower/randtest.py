"""Response model, differences-in-means estimator, randomization-test
decision rule, and empirical power over a DesignSet.

The decision rule is the count rule: with 2R allocations in the design and
level alpha, the run estimate rejects the null iff at most q = floor(2*alpha*R) - 1
of the other 2R - 1 null estimates are >= it (ties count against rejection).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from randpower.alloc import allocation_stats, validate_covariate
from randpower.designs import DesignSet
from randpower.seeding import derive_seed

__all__ = [
    "ExperimentScenario",
    "PowerResult",
    "generate_response",
    "estimate_effect",
    "estimate_matrix",
    "randomization_reject",
    "empirical_power",
    "power_over_designs",
    "aggregate_power",
    "power_metric",
]


@dataclass(frozen=True)
class ExperimentScenario:
    """Response model y = beta*w + beta_x*x + z and the test level."""

    n: int
    beta: float
    beta_x: float
    sigma_z: float
    alpha: float
    x: np.ndarray

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must be in (0, 0.5)")
        if self.sigma_z <= 0:
            raise ValueError("sigma_z must be positive")
        x = validate_covariate(self.x)
        if x.shape[0] != self.n:
            raise ValueError("covariate length must equal n")
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class PowerResult:
    """Aggregated empirical power with its standard error and diagnostics."""

    power: float
    se: float
    n_designs: int
    n_z: int
    mean_abs_r: float
    mean_abs_Bx: float


def generate_response(w_run, scenario: ExperimentScenario, z) -> np.ndarray:
    """y = beta*w + beta_x*x + z."""
    w = np.asarray(w_run, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if w.shape != z.shape or w.shape != scenario.x.shape:
        raise ValueError("w, x and z lengths must agree")
    return scenario.beta * w + scenario.beta_x * scenario.x + z


def estimate_effect(w, y) -> float:
    """Differences-in-means estimator w.y/n = (mean(y_T) - mean(y_C))/2."""
    w = np.asarray(w, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if w.shape != y.shape:
        raise ValueError("length mismatch")
    return float(w @ y) / w.shape[0]


def estimate_matrix(design: DesignSet, scenario: ExperimentScenario, z) -> np.ndarray:
    """The 2R x 2R matrix with m_ij = w_j . y_i / n, where row i's response
    is generated with run allocation w_i. Layout follows the design's
    mirror-pair ordering."""
    W = design.allocations.astype(np.float64)
    n = design.n
    z = np.asarray(z, dtype=np.float64)
    c = W @ (scenario.beta_x * scenario.x + z) / n  # column term, run-independent
    G = W @ W.T / n  # r_ij
    return scenario.beta * G + c[None, :]


def randomization_reject(row, i: int, alpha: float) -> bool:
    """Count rule: reject iff #{j != i : row_j >= row_i} <= floor(2*alpha*R) - 1.

    Ties count as beating row_i (conservative). With floor(2*alpha*R) < 1 the
    test can never reject.
    """
    row = np.asarray(row, dtype=np.float64)
    two_r = row.shape[0]
    q = math.floor(alpha * two_r) - 1  # alpha * 2R
    if q < 0:
        return False
    beaten_by = int((row >= row[i]).sum()) - 1  # self always ties
    return beaten_by <= q


def empirical_power(
    design: DesignSet, scenario: ExperimentScenario, z, gram: np.ndarray | None = None
) -> float:
    """Proportion of the 2R run allocations whose estimate rejects the null
    against the design's own null distribution, for one fixed z.

    `gram` optionally carries a precomputed W @ W.T (float) to amortize the
    dominant cost across repeated z draws on the same design.
    """
    W = design.allocations.astype(np.float64)
    n = design.n
    two_r = 2 * design.R
    q = math.floor(2 * scenario.alpha * design.R) - 1
    if q < 0:
        return 0.0
    z = np.asarray(z, dtype=np.float64)
    c = W @ (scenario.beta_x * scenario.x + z) / n
    beta = scenario.beta
    if beta == 0.0:
        # m_ij = c_j for every run i: count ties/beats by rank
        sc = np.sort(c)
        beaten = two_r - np.searchsorted(sc, c, side="left") - 1
    else:
        if gram is None:
            gram = W @ W.T
        # row_j >= row_i  <=>  c_j - c_i >= beta * (1 - r_ij)
        thresh = beta * (1.0 - gram / n)
        beaten = ((c[None, :] - c[:, None]) >= thresh).sum(axis=1) - 1
    return float((beaten <= q).mean())


def power_over_designs(
    designs: list[DesignSet],
    scenario: ExperimentScenario,
    n_z: int,
    z_seeds: list[int],
) -> np.ndarray:
    """Empirical power for every (design, z draw) cell; z ~ N(0, sigma_z^2)^n
    with an independent stream per design. Returns an (n_designs, n_z) array."""
    if len(z_seeds) != len(designs):
        raise ValueError("need one z seed per design")
    powers = np.empty((len(designs), n_z))
    for d, (design, zs) in enumerate(zip(designs, z_seeds)):
        gram = None
        if scenario.beta != 0.0:
            Wf = design.allocations.astype(np.float64)
            gram = Wf @ Wf.T
        rng = np.random.default_rng(zs)
        for k in range(n_z):
            z = rng.normal(0.0, scenario.sigma_z, scenario.n)
            powers[d, k] = empirical_power(design, scenario, z, gram=gram)
    return powers


def aggregate_power(powers: np.ndarray) -> tuple[float, float]:
    """Mean power and its standard error via the law of total variance:
    between-design variance of the design means plus mean within-design
    variance of the z replicates."""
    n_designs, n_z = powers.shape
    mean = float(powers.mean())
    design_means = powers.mean(axis=1)
    var_between = float(design_means.var(ddof=1)) if n_designs > 1 else 0.0
    var_within = float(powers.var(axis=1, ddof=1).mean()) if n_z > 1 else 0.0
    se = math.sqrt(var_between / n_designs + var_within / (n_designs * n_z))
    return mean, se


def power_metric(
    design_factory,
    scenario: ExperimentScenario,
    n_designs: int,
    n_z: int,
    seed: int,
) -> PowerResult:
    """Power metric: mean empirical power over n_designs independent
    DesignSets x n_z independent z draws, with the law-of-total-variance SE.

    `design_factory(seed)` must return a DesignSet; per-design seeds are
    derived from `seed` by the documented counter scheme.
    """
    if n_designs < 1 or n_z < 1:
        raise ValueError("n_designs and n_z must be >= 1")
    designs = [design_factory(derive_seed(seed, "design", d)) for d in range(n_designs)]
    z_seeds = [derive_seed(seed, "z", d) for d in range(n_designs)]
    powers = power_over_designs(designs, scenario, n_z, z_seeds)
    mean, se = aggregate_power(powers)
    stats = [allocation_stats(D.unmirrored(), scenario.x) for D in designs]
    return PowerResult(
        power=mean,
        se=se,
        n_designs=n_designs,
        n_z=n_z,
        mean_abs_r=float(np.mean([s["mean_abs_r"] for s in stats])),
        mean_abs_Bx=float(np.mean([s["mean_abs_Bx"] for s in stats])),
    )
