import io
import itertools
import math

import numpy as np
import pytest
from scipy import stats

from oracles import enumerate_balanced
from randpower.alloc import allocation_stats, normal_quantile_covariate
from randpower.designs import (
    DesignSet,
    _greedy_descend,
    best_design,
    calibrate_threshold,
    design_from_csv,
    design_to_csv,
    greedy_pair_switch,
    sample_bcrd,
    sample_matching,
    sample_rerandomization,
)


def canonical_set(W):
    """Frozen set of mirror-invariant keys for comparing allocation sets."""
    out = set()
    for w in np.asarray(W, dtype=int):
        key = tuple(w) if w[0] > 0 else tuple(-w)
        out.add(key)
    return out


class TestDesignSetLayout:
    def test_mirror_interleaving_enforced(self):
        W = np.array([[1, -1, 1, -1], [1, -1, -1, 1]], dtype=np.int8)
        with pytest.raises(ValueError):
            DesignSet("bcrd", W, seed=0)

    def test_duplicates_rejected(self):
        w = np.array([1, -1, 1, -1], dtype=np.int8)
        W = np.stack([w, -w, w, -w])
        with pytest.raises(ValueError):
            DesignSet("bcrd", W, seed=0)

    def test_unbalanced_rejected(self):
        w = np.array([1, 1, 1, -1], dtype=np.int8)
        with pytest.raises(ValueError):
            DesignSet("bcrd", np.stack([w, -w]), seed=0)

    def test_properties(self):
        D = sample_bcrd(6, 4, seed=1)
        assert D.R == 4
        assert D.n == 6
        assert D.unmirrored().shape == (4, 6)
        np.testing.assert_array_equal(D.allocations[1], -D.allocations[0])


class TestSampleBcrd:
    def test_forced_exhaustion_n4(self):
        # C(4,2) = 6 balanced vectors = 3 mirror pairs; R=3 must return all
        D = sample_bcrd(4, 3, seed=0)
        assert canonical_set(D.allocations) == canonical_set(enumerate_balanced(4))

    def test_capacity_error(self):
        with pytest.raises(ValueError):
            sample_bcrd(4, 4, seed=0)

    def test_odd_n_error(self):
        with pytest.raises(ValueError):
            sample_bcrd(5, 2, seed=0)

    def test_reproducible(self):
        a = sample_bcrd(26, 50, seed=42)
        b = sample_bcrd(26, 50, seed=42)
        np.testing.assert_array_equal(a.allocations, b.allocations)

    def test_seed_changes_draw(self):
        a = sample_bcrd(26, 50, seed=1)
        b = sample_bcrd(26, 50, seed=2)
        assert not np.array_equal(a.allocations, b.allocations)

    def test_mean_imbalance_near_zero(self, x26):
        D = sample_bcrd(26, 1000, seed=7)
        bx = D.unmirrored().astype(float) @ x26 / 26
        # mean of R=1000 draws of a centered quantity
        assert abs(bx.mean()) < 3 * bx.std(ddof=1) / math.sqrt(len(bx))


class TestCalibrateThreshold:
    def test_quantile_one_is_max(self, x26):
        thr = calibrate_threshold(x26, calibration_draws=5000, calibration_quantile=1.0, seed=0)
        # reproduce the draw stream directly: quantile 1.0 is the observed max
        half = calibrate_threshold(x26, calibration_draws=5000, calibration_quantile=0.5, seed=0)
        assert thr.a > half.a > 0

    def test_degenerate_covariate(self):
        with pytest.raises(ValueError):
            calibrate_threshold(np.ones(26), calibration_draws=5000, seed=0)

    def test_too_few_draws(self, x26):
        with pytest.raises(ValueError):
            calibrate_threshold(x26, calibration_draws=10, seed=0)

    def test_stable_under_doubling(self, x26):
        a1 = calibrate_threshold(x26, calibration_draws=200_000, calibration_quantile=0.001, seed=1).a
        a2 = calibrate_threshold(x26, calibration_draws=400_000, calibration_quantile=0.001, seed=2).a
        assert abs(a1 - a2) / a1 < 0.10


class TestSampleRerandomization:
    def test_members_satisfy_threshold(self, x26, threshold26):
        D = sample_rerandomization(x26, threshold26, R=50, seed=3)
        bx = np.abs(D.allocations.astype(float) @ x26) / 26
        assert np.all(bx <= threshold26)
        assert D.threshold == threshold26

    def test_infinite_threshold_is_unrestricted(self, x26):
        # a loose threshold accepts everything: same acceptance behavior as
        # plain balanced sampling (all candidates kept)
        D = sample_rerandomization(x26, 1.0, R=100, seed=3)
        assert D.R == 100
        bx = np.abs(D.unmirrored().astype(float) @ x26) / 26
        assert bx.max() > 0  # genuinely unconstrained draws get through

    def test_tiny_region_aborts_with_diagnostic(self, x26):
        with pytest.raises(RuntimeError, match="[0-9]+"):
            sample_rerandomization(x26, 1e-12, R=10, seed=0, max_draws=20_000)

    def test_negative_threshold(self, x26):
        with pytest.raises(ValueError):
            sample_rerandomization(x26, -0.1, R=10, seed=0)


class TestSampleMatching:
    def test_n2_capacity(self):
        x = normal_quantile_covariate(2)
        D = sample_matching(x, 1, seed=0)
        assert canonical_set(D.allocations) == {(1, -1)}
        with pytest.raises(ValueError):
            sample_matching(x, 2, seed=0)

    def test_pairs_are_opposite_armed(self):
        n = 8
        x = normal_quantile_covariate(n)
        D = sample_matching(x, 8, seed=1)  # full capacity 2^3
        order = np.argsort(x)
        for w in D.allocations:
            for k in range(0, n, 2):
                assert w[order[k]] == -w[order[k + 1]]

    def test_exhaustive_correlation_law_n8(self):
        # with independent per-pair signs, the agreement count U between two
        # allocations is Binomial(n/2, 1/2) and r = (4U - n)/n; exact count
        # over all 16 x 16 ordered sign patterns
        n = 8
        x = normal_quantile_covariate(n)
        order = np.argsort(x)
        pats = []
        for signs in itertools.product([1, -1], repeat=n // 2):
            w = np.empty(n, dtype=int)
            for k, s in enumerate(signs):
                w[order[2 * k]] = s
                w[order[2 * k + 1]] = -s
            pats.append(w)
        W = np.array(pats)
        dots = W @ W.T
        binom = stats.binom(n // 2, 0.5)
        for u in range(n // 2 + 1):
            count = int((dots == 4 * u - n).sum())
            assert count == round(binom.pmf(u) * 256)

    def test_mean_imbalance_below_bcrd(self, x26):
        Dm = sample_matching(x26, 1000, seed=2)
        Db = sample_bcrd(26, 1000, seed=2)
        sm = allocation_stats(Dm.unmirrored(), x26)
        sb = allocation_stats(Db.unmirrored(), x26)
        assert sm["mean_abs_Bx"] < sb["mean_abs_Bx"]


class TestGreedyPairSwitch:
    def test_degenerate_covariate(self):
        with pytest.raises(ValueError):
            greedy_pair_switch(np.zeros(8), R=2, seed=0)

    def test_descent_never_increases(self, x26):
        rng = np.random.default_rng(0)
        for _ in range(20):
            w = np.concatenate([np.ones(13), -np.ones(13)]).astype(np.int8)
            rng.shuffle(w)
            start = abs(float(w @ x26))
            out = _greedy_descend(w, x26)
            assert abs(float(out.astype(float) @ x26)) <= start + 1e-12

    def test_outputs_are_single_switch_local_optima(self, x26):
        D = greedy_pair_switch(x26, R=10, seed=4)
        for w in D.unmirrored():
            w = w.astype(float)
            dot = float(w @ x26)
            treated = np.flatnonzero(w > 0)
            control = np.flatnonzero(w < 0)
            for i in treated:
                for j in control:
                    new = dot - 2 * x26[i] + 2 * x26[j]
                    assert abs(new) >= abs(dot) - 1e-12

    def test_mean_imbalance_below_matching_and_bcrd(self, x26):
        Dg = greedy_pair_switch(x26, 1000, seed=2)
        Dm = sample_matching(x26, 1000, seed=2)
        Db = sample_bcrd(26, 1000, seed=2)
        g = allocation_stats(Dg.unmirrored(), x26)["mean_abs_Bx"]
        m = allocation_stats(Dm.unmirrored(), x26)["mean_abs_Bx"]
        b = allocation_stats(Db.unmirrored(), x26)["mean_abs_Bx"]
        assert g < m < b


def mean_bx_with_se(D, x):
    bx = np.abs(D.unmirrored().astype(float) @ x) / len(x)
    return float(bx.mean()), float(bx.std(ddof=1) / math.sqrt(len(bx)))


class TestImbalanceOrderingAtScale:
    """Mean |B_x| orderings across strategies at n=26, R=1000."""

    def test_matching_below_bcrd_by_3se(self, x26):
        m, m_se = mean_bx_with_se(sample_matching(x26, 1000, seed=9), x26)
        b, b_se = mean_bx_with_se(sample_bcrd(26, 1000, seed=9), x26)
        assert b - m > 3 * math.hypot(m_se, b_se)

    def test_rerandomization_below_matching_by_3se(self, x26, threshold26):
        r, r_se = mean_bx_with_se(
            sample_rerandomization(x26, threshold26, 1000, seed=9), x26
        )
        m, m_se = mean_bx_with_se(sample_matching(x26, 1000, seed=9), x26)
        assert m - r > 3 * math.hypot(m_se, r_se)

    def test_greedy_below_rerandomization(self, x26, threshold26):
        # Single-switch local optima at n=26 concentrate near |B_x| ~ 1e-3,
        # one order of magnitude above the 0.1%-quantile rerandomization
        # threshold (~2.5e-4). The gap narrows and reverses as n grows
        # (greedy scales roughly n^-2.7 vs the threshold's n^-0.5 shrink),
        # but at n=26 this ordering does not hold for the single-switch
        # descent; kept as an honest failure.
        g, g_se = mean_bx_with_se(greedy_pair_switch(x26, 1000, seed=9), x26)
        r, r_se = mean_bx_with_se(
            sample_rerandomization(x26, threshold26, 1000, seed=9), x26
        )
        assert g <= r + 3 * math.hypot(g_se, r_se)


class TestBestDesign:
    def test_exhaustion_returns_full_set(self):
        x = normal_quantile_covariate(4)
        D = best_design(x, R=3)
        assert canonical_set(D.allocations) == canonical_set(enumerate_balanced(4))

    def test_matches_brute_force_n6(self):
        x = normal_quantile_covariate(6)
        W = enumerate_balanced(6)
        bx = np.abs(W.astype(float) @ x) / 6
        # sort all 20 by |B_x| with lexicographic tie-break, take smallest 8
        order = sorted(range(len(W)), key=lambda i: (bx[i], tuple(W[i])))
        expected = canonical_set(W[order[:8]])
        D = best_design(x, R=4)
        assert canonical_set(D.allocations) == expected

    def test_deterministic(self, x26):
        a = best_design(x26, R=5)
        b = best_design(x26, R=5)
        np.testing.assert_array_equal(a.allocations, b.allocations)

    def test_guards(self, x26):
        with pytest.raises(ValueError):
            best_design(normal_quantile_covariate(28), R=5)
        with pytest.raises(ValueError):
            best_design(normal_quantile_covariate(4), R=4)

    def test_small_R_correlations_exceed_bcrd(self, x26):
        Dbest = best_design(x26, R=10)
        Dbcrd = sample_bcrd(26, 10, seed=11)
        sbest = allocation_stats(Dbest.unmirrored(), x26)
        sbcrd = allocation_stats(Dbcrd.unmirrored(), x26)
        assert sbest["mean_abs_r"] > sbcrd["mean_abs_r"]


class TestSerialization:
    def test_round_trip_bit_exact(self, x26, threshold26):
        D = sample_rerandomization(x26, threshold26, R=20, seed=6)
        buf = io.StringIO()
        design_to_csv(D, buf)
        back = design_from_csv(io.StringIO(buf.getvalue()))
        assert back.strategy == D.strategy
        assert back.seed == D.seed
        assert back.threshold == D.threshold
        np.testing.assert_array_equal(back.allocations, D.allocations)

    def test_round_trip_no_threshold(self):
        D = sample_bcrd(8, 5, seed=1)
        buf = io.StringIO()
        design_to_csv(D, buf)
        back = design_from_csv(io.StringIO(buf.getvalue()))
        assert back.threshold is None
        np.testing.assert_array_equal(back.allocations, D.allocations)

    def test_header(self):
        D = sample_bcrd(4, 2, seed=0)
        buf = io.StringIO()
        design_to_csv(D, buf)
        assert buf.getvalue().splitlines()[0] == "strategy,seed,threshold,row,entries"
