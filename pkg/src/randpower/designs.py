"""Design generation: sets of 2R mirror-paired allocations under five
strategies (BCRD, rerandomization, matching, greedy pair switching, and
exhaustive "best"), plus threshold calibration and CSV serialization.

Every DesignSet stores its allocations as a 2R x n int8 matrix ordered
(w_1, -w_1, w_2, -w_2, ...). The R unmirrored allocations are distinct and
no allocation equals another's mirror.
"""

from __future__ import annotations

import csv
import heapq
import io
import itertools
import math
from dataclasses import dataclass

import numpy as np

from randpower.alloc import imbalance

__all__ = [
    "DesignSet",
    "RerandThreshold",
    "sample_bcrd",
    "calibrate_threshold",
    "sample_rerandomization",
    "sample_matching",
    "greedy_pair_switch",
    "best_design",
    "design_to_csv",
    "design_from_csv",
]

STRATEGIES = ("bcrd", "rerandomization", "matching", "greedy_pair_switch", "best")

# Duplicate-rejection budget: a sampler may draw at most this multiple of R
# candidates while hunting for distinct allocations.
MAX_ATTEMPT_FACTOR = 100


@dataclass(frozen=True)
class DesignSet:
    """2R allocations organized as R mirrored pairs, with provenance."""

    strategy: str
    allocations: np.ndarray  # 2R x n, int8, entry 2k+1 = -entry 2k
    seed: int
    threshold: float | None = None

    def __post_init__(self):
        W = np.asarray(self.allocations, dtype=np.int8)
        object.__setattr__(self, "allocations", W)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if W.ndim != 2 or W.shape[0] == 0 or W.shape[0] % 2 != 0:
            raise ValueError("allocations must be a nonempty 2R x n matrix")
        if np.any(W[1::2] != -W[::2]):
            raise ValueError("odd rows must mirror the preceding even rows")
        if np.any(np.abs(W.astype(np.int64).sum(axis=1)) != 0):
            raise ValueError("all allocations must be balanced")
        keys = {_canonical_key(w) for w in W[::2]}
        if len(keys) != W.shape[0] // 2:
            raise ValueError("unmirrored allocations must be distinct up to mirroring")

    @property
    def R(self) -> int:
        return self.allocations.shape[0] // 2

    @property
    def n(self) -> int:
        return self.allocations.shape[1]

    def unmirrored(self) -> np.ndarray:
        """The R representative allocations (every other row)."""
        return self.allocations[::2]


@dataclass(frozen=True)
class RerandThreshold:
    """Calibrated rerandomization acceptance threshold, in B_x = w.x/n units."""

    a: float
    calibration_draws: int
    calibration_quantile: float

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("threshold must be nonnegative")


def _canonical_key(w: np.ndarray) -> bytes:
    """Mirror-invariant identity: flip so the first entry is +1."""
    return (w if w[0] > 0 else -w).tobytes()


def _interleave_mirrors(W: np.ndarray) -> np.ndarray:
    out = np.empty((2 * W.shape[0], W.shape[1]), dtype=np.int8)
    out[::2] = W
    out[1::2] = -W
    return out


def _random_balanced(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    """`size` iid uniform draws from the forced-balance set, as int8 rows."""
    order = rng.random((size, n)).argsort(axis=1)
    W = np.full((size, n), -1, dtype=np.int8)
    np.put_along_axis(W, order[:, : n // 2], 1, axis=1)
    return W


def _collect_distinct(candidate_chunks, R: int, max_draws: int, what: str):
    """Pull rows from an iterator of candidate matrices until R distinct
    (up to mirroring) allocations are found, or the draw budget runs out."""
    seen = set()
    kept = []
    drawn = 0
    for chunk in candidate_chunks:
        for w in chunk:
            drawn += 1
            key = _canonical_key(w)
            if key in seen:
                continue
            seen.add(key)
            kept.append(w.copy())
            if len(kept) == R:
                return np.array(kept, dtype=np.int8)
        if drawn >= max_draws:
            break
    raise RuntimeError(
        f"{what}: found only {len(kept)} of {R} distinct allocations "
        f"after {drawn} draws"
    )


def sample_bcrd(n: int, R: int, seed: int) -> DesignSet:
    """Balanced complete randomization: R distinct unmirrored allocations
    drawn uniformly (rejection on duplicates and mirror-duplicates)."""
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be even and >= 2, got {n}")
    capacity = math.comb(n, n // 2) // 2  # unmirrored pairs
    if R > capacity:
        raise ValueError(f"R={R} exceeds the {capacity} unmirrored allocations at n={n}")
    rng = np.random.default_rng(seed)
    chunk = max(256, 2 * R)

    def chunks():
        while True:
            yield _random_balanced(rng, n, chunk)

    W = _collect_distinct(chunks(), R, MAX_ATTEMPT_FACTOR * R + chunk, "sample_bcrd")
    return DesignSet("bcrd", _interleave_mirrors(W), seed)


def calibrate_threshold(
    x,
    calibration_draws: int = 1_000_000,
    calibration_quantile: float = 0.001,
    seed: int = 0,
) -> RerandThreshold:
    """Empirical |B_x| quantile over BCRD draws, used as the rerandomization
    acceptance threshold (e.g. quantile 0.001 keeps the 0.1% best)."""
    x = np.asarray(x, dtype=np.float64)
    if np.ptp(x) == 0:
        raise ValueError("degenerate covariate: all values equal")
    if calibration_draws < 1000:
        raise ValueError("calibration needs at least 1000 draws")
    if not 0 < calibration_quantile <= 1:
        raise ValueError("calibration quantile must be in (0, 1]")
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    abs_bx = np.empty(calibration_draws)
    done = 0
    while done < calibration_draws:
        m = min(200_000, calibration_draws - done)
        W = _random_balanced(rng, n, m)
        abs_bx[done : done + m] = np.abs(W.astype(np.float64) @ x) / n
        done += m
    a = float(np.quantile(abs_bx, calibration_quantile))
    return RerandThreshold(a, calibration_draws, calibration_quantile)


def sample_rerandomization(
    x, a: float, R: int, seed: int, max_draws: int | None = None
) -> DesignSet:
    """Acceptance sampling from BCRD keeping allocations with |B_x| <= a.

    The threshold `a` is in B_x = w.x/n units so it is comparable across n.
    Aborts with a diagnostic if the acceptance region is too small to yield
    R distinct allocations within the draw budget (default 10000 * R).
    """
    if a < 0:
        raise ValueError("threshold must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if max_draws is None:
        max_draws = 10_000 * R
    rng = np.random.default_rng(seed)
    chunk = max(4096, 4 * R)

    def chunks():
        raw = 0
        while raw < max_draws:  # budget counts rejected draws too
            W = _random_balanced(rng, n, chunk)
            raw += len(W)
            bx = np.abs(W.astype(np.float64) @ x) / n
            yield W[bx <= a]

    W = _collect_distinct(chunks(), R, max_draws, "sample_rerandomization")
    return DesignSet("rerandomization", _interleave_mirrors(W), seed, threshold=float(a))


def sample_matching(x, R: int, seed: int) -> DesignSet:
    """A priori pairwise matching: subjects paired by adjacency in sorted x
    (ranks (1,2), (3,4), ...); each allocation assigns +/-1 independently per
    pair with the two members of a pair always on opposite arms."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n % 2 != 0:
        raise ValueError("n must be even")
    capacity = 2 ** (n // 2 - 1)  # unmirrored
    if R > capacity:
        raise ValueError(f"R={R} exceeds the {capacity} unmirrored matched allocations")
    pairs = np.argsort(x, kind="stable").reshape(-1, 2)
    rng = np.random.default_rng(seed)
    chunk = max(256, 2 * R)

    def chunks():
        while True:
            signs = rng.choice(np.array([-1, 1], dtype=np.int8), size=(chunk, n // 2))
            W = np.empty((chunk, n), dtype=np.int8)
            W[:, pairs[:, 0]] = signs
            W[:, pairs[:, 1]] = -signs
            yield W

    W = _collect_distinct(chunks(), R, MAX_ATTEMPT_FACTOR * R + chunk, "sample_matching")
    return DesignSet("matching", _interleave_mirrors(W), seed)


def _greedy_descend(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Best-improvement pair switching: repeatedly swap the (treated,
    control) index pair that maximally reduces |w.x| until no swap helps.
    Deterministic given the start."""
    w = w.astype(np.int8).copy()
    dot = float(w.astype(np.float64) @ x)
    while True:
        treated = np.flatnonzero(w == 1)
        control = np.flatnonzero(w == -1)
        # swapping treated i with control j changes w.x by 2(x_j - x_i)
        new = dot + 2.0 * (x[control][None, :] - x[treated][:, None])
        k = np.abs(new).argmin()
        i, j = divmod(k, control.shape[0])
        if abs(new[i, j]) >= abs(dot) - 1e-15:
            return w
        w[treated[i]] = -1
        w[control[j]] = 1
        dot = new[i, j]


def greedy_pair_switch(x, R: int, seed: int) -> DesignSet:
    """Local-search design: each allocation starts at a BCRD draw and
    descends to a local optimum of |B_x| by best-improvement pair switching.
    Duplicates (up to mirroring) are rejected."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n % 2 != 0:
        raise ValueError("n must be even")
    if np.ptp(x) == 0:
        raise ValueError("degenerate covariate: all values equal")
    rng = np.random.default_rng(seed)

    def chunks():
        while True:
            starts = _random_balanced(rng, n, max(16, R // 4))
            yield np.array([_greedy_descend(w, x) for w in starts], dtype=np.int8)

    W = _collect_distinct(chunks(), R, MAX_ATTEMPT_FACTOR * R, "greedy_pair_switch")
    return DesignSet("greedy_pair_switch", _interleave_mirrors(W), seed)


def best_design(x, R: int) -> DesignSet:
    """Deterministic exhaustive design: the R unmirrored allocations with the
    smallest |B_x| over all of the forced-balance set, ties broken by
    lexicographic order of entries (-1 < +1). Mirrors are appended pairwise;
    |B_x| is mirror-invariant so this matches sorting all 2R.

    Enumeration fixes subject 0 to treatment, which walks exactly one
    representative per mirror pair: C(n-1, n/2-1) candidates.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n % 2 != 0:
        raise ValueError("n must be even")
    if n > 26:
        raise ValueError(f"enumeration guard: n={n} > 26")
    capacity = math.comb(n, n // 2) // 2
    if R > capacity:
        raise ValueError(f"R={R} exceeds the {capacity} unmirrored allocations at n={n}")

    total = math.comb(n - 1, n // 2 - 1)
    combos = itertools.combinations(range(1, n), n // 2 - 1)
    x_sum = x.sum()
    # heap of (-|B_x|, neg-lex entries) so the worst kept candidate pops first
    heap: list[tuple[float, tuple, tuple]] = []
    chunk_size = 500_000
    remaining = total
    while remaining > 0:
        m = min(chunk_size, remaining)
        remaining -= m
        idx = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(combos, m)),
            dtype=np.int64,
            count=m * (n // 2 - 1),
        ).reshape(m, n // 2 - 1)
        treated_sum = x[idx].sum(axis=1) + x[0]
        abs_bx = np.abs(2.0 * treated_sum - x_sum) / n
        if len(heap) == R:
            cand = np.flatnonzero(abs_bx <= -heap[0][0] + 1e-18)
        else:
            cand = np.arange(m)
        for k in cand:
            w = np.full(n, -1, dtype=np.int8)
            w[0] = 1
            w[idx[k]] = 1
            item = (-float(abs_bx[k]), tuple(-w), tuple(w))
            if len(heap) < R:
                heapq.heappush(heap, item)
            elif item > heap[0]:
                heapq.heapreplace(heap, item)
    kept = sorted(((-b, t) for b, _negt, t in heap))
    W = np.array([t for _b, t in kept], dtype=np.int8)
    return DesignSet("best", _interleave_mirrors(W), seed=0)


def design_to_csv(design: DesignSet, path_or_file) -> None:
    """Serialize with header strategy,seed,threshold,row,entries where
    entries is a +/- string like '++--+-'. Round trips bit-exactly."""
    if hasattr(path_or_file, "write"):
        _write_design_csv(design, path_or_file)
    else:
        with open(path_or_file, "w", newline="\n") as fh:
            _write_design_csv(design, fh)


def _write_design_csv(design: DesignSet, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["strategy", "seed", "threshold", "row", "entries"])
    thr = "" if design.threshold is None else f"{design.threshold:.17g}"
    for row, w in enumerate(design.allocations):
        entries = "".join("+" if e > 0 else "-" for e in w)
        writer.writerow([design.strategy, design.seed, thr, row, entries])


def design_from_csv(path_or_file) -> DesignSet:
    if hasattr(path_or_file, "read"):
        return _read_design_csv(path_or_file)
    with open(path_or_file, newline="") as fh:
        return _read_design_csv(fh)


def _read_design_csv(fh) -> DesignSet:
    reader = csv.DictReader(fh)
    rows = list(reader)
    if not rows:
        raise ValueError("empty design CSV")
    strategy = rows[0]["strategy"]
    seed = int(rows[0]["seed"])
    thr_text = rows[0]["threshold"]
    threshold = float(thr_text) if thr_text else None
    rows.sort(key=lambda r: int(r["row"]))
    W = np.array(
        [[1 if ch == "+" else -1 for ch in r["entries"]] for r in rows],
        dtype=np.int8,
    )
    return DesignSet(strategy, W, seed, threshold=threshold)
