"""Allocation vectors, their algebra (mirrors, correlations, imbalances),
and covariate construction.

An allocation assigns each of n subjects (n even) to treatment (+1) or
control (-1) with forced balance: exactly n/2 of each. Allocations are
plain numpy int8 arrays; this module validates and operates on them.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

__all__ = [
    "make_allocation",
    "mirror",
    "correlation",
    "imbalance",
    "normal_quantile_covariate",
    "validate_covariate",
    "allocation_stats",
]

ATOL = 1e-12


def make_allocation(entries) -> np.ndarray:
    """Validate a sequence of +/-1 entries as a balanced allocation vector."""
    w = np.asarray(entries)
    if w.ndim != 1:
        raise ValueError("allocation must be one-dimensional")
    n = w.shape[0]
    if n == 0 or n % 2 != 0:
        raise ValueError(f"allocation length must be positive and even, got {n}")
    if not np.all(np.isin(w, (-1, 1))):
        raise ValueError("allocation entries must be +1 or -1")
    w = w.astype(np.int8)
    if int(w.sum()) != 0:
        raise ValueError(f"allocation is unbalanced: sum = {int(w.sum())}, expected 0")
    return w


def mirror(w: np.ndarray) -> np.ndarray:
    """Entrywise negation; an involution, and correlation(w, mirror(w)) = -1."""
    return -np.asarray(w)


def correlation(w_i, w_j) -> float:
    """Pairwise allocation correlation w_i . w_j / n, in [-1, 1].

    Equals 2f - 1 where f is the fraction of subjects on which the two
    allocations agree.
    """
    w_i = np.asarray(w_i)
    w_j = np.asarray(w_j)
    if w_i.shape != w_j.shape:
        raise ValueError(f"length mismatch: {w_i.shape} vs {w_j.shape}")
    return float(w_i.astype(np.int64) @ w_j.astype(np.int64)) / w_i.shape[0]


def imbalance(w, v) -> float:
    """Imbalance of allocation w against an n-vector v: w . v / n.

    Antisymmetric under mirroring: imbalance(-w, v) = -imbalance(w, v).
    """
    w = np.asarray(w, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if w.shape != v.shape:
        raise ValueError(f"length mismatch: {w.shape} vs {v.shape}")
    return float(w @ v) / w.shape[0]


def normal_quantile_covariate(n: int) -> np.ndarray:
    """Standard-normal quantile covariate: x_i = Phi^-1(i/(n+1)), standardized.

    Centered to mean 0 and scaled to unit sample standard deviation
    (denominator n-1). Symmetric about zero and strictly increasing.
    """
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be even and >= 2, got {n}")
    x = stats.norm.ppf(np.arange(1, n + 1) / (n + 1))
    x = x - x.mean()
    x = x / x.std(ddof=1)
    return x


def validate_covariate(x: np.ndarray, atol: float = ATOL) -> np.ndarray:
    """Check a covariate vector is centered and scaled (sd with ddof=1)."""
    x = np.asarray(x, dtype=np.float64)
    if abs(x.mean()) > atol:
        raise ValueError(f"covariate mean {x.mean()} not 0 within {atol}")
    if abs(x.std(ddof=1) - 1.0) > atol:
        raise ValueError(f"covariate sd {x.std(ddof=1)} not 1 within {atol}")
    return x


def allocation_stats(allocations, x) -> dict:
    """Summary statistics over the R unmirrored allocations of a design.

    `allocations` is an R x n matrix of unmirrored allocation vectors (a
    DesignSet's .unmirrored()). Mirrors are excluded: they contribute
    deterministic r = -1 self-mirror pairs and identical |w_i.w_j|^2 terms
    that would only rescale the bound statistic.

    Returns a dict with:
      mean_abs_r, sd_r : over all unordered pairs i < j
      mean_abs_Bx      : mean |w.x/n| over the R allocations
      datta_lhs        : (1/(R(R-1))) * sum_{i != j} |w_i.w_j|^2
      datta_rhs        : n(R-n)/(R-1), a universal lower bound (vacuous
                         when R <= n but still evaluated)
    """
    W = np.asarray(allocations)
    if W.ndim != 2:
        raise ValueError("allocations must be an R x n matrix")
    R, n = W.shape
    if R < 2:
        raise ValueError(f"need R >= 2 unmirrored allocations, got {R}")
    x = np.asarray(x, dtype=np.float64)
    Wf = W.astype(np.float64)
    dots = Wf @ Wf.T  # entries are exact integers (|dot| <= n < 2**53)
    iu = np.triu_indices(R, k=1)
    r = dots[iu] / n
    bx = Wf @ x / n
    off_sq = dots[iu] ** 2
    # sum over ordered pairs i != j is twice the sum over unordered pairs
    datta_lhs = 2.0 * off_sq.sum() / (R * (R - 1))
    datta_rhs = n * (R - n) / (R - 1)
    return {
        "mean_abs_r": float(np.abs(r).mean()),
        "sd_r": float(r.std(ddof=0)),
        "mean_abs_Bx": float(np.abs(bx).mean()),
        "datta_lhs": float(datta_lhs),
        "datta_rhs": float(datta_rhs),
    }
