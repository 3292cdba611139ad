import math

import numpy as np
import pytest
from scipy import stats

from oracles import tournament_power
from randpower.theory import (
    PowerSE,
    QuadratureSpec,
    TheoryParams,
    asymptotic_power,
    density_fT,
    fT_total_mass,
    finite_power,
    finite_power_with_se,
    p_of_us,
    power_se,
    solve_qz,
    solve_uat,
    toy_power_r2,
)

FAST = QuadratureSpec(mc_samples=200_000)


class TestTheoryParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            TheoryParams(gamma=-1.0, rho=0.1, R=10, alpha=0.05)
        with pytest.raises(ValueError):
            TheoryParams(gamma=0.0, rho=1.0, R=10, alpha=0.05)
        with pytest.raises(ValueError):
            TheoryParams(gamma=0.0, rho=0.1, R=10, alpha=0.6)
        with pytest.raises(ValueError):
            TheoryParams(gamma=0.0, rho=0.1, R=0, alpha=0.05)

    def test_beat_budget(self):
        assert TheoryParams(0.0, 0.0, 10, 0.05).q == 0
        assert TheoryParams(0.0, 0.0, 2, 0.25).q == 0
        assert TheoryParams(0.0, 0.0, 1000, 0.05).q == 99
        # 2*alpha*R < 1: no rejection possible
        assert TheoryParams(0.0, 0.0, 9, 0.05).q == -1

    def test_quadrature_spec_floors(self):
        with pytest.raises(ValueError):
            QuadratureSpec(mc_samples=100)
        with pytest.raises(ValueError):
            QuadratureSpec(root_tol=1e-8)


class TestSolveQz:
    def test_closed_form_origin(self):
        # gamma=0, z=0: symmetry reduces the defining equation to
        # 2 Phi(-q / sqrt(1-rho)) = 2 alpha
        for rho in (0.0, 0.2, 0.4):
            params = TheoryParams(gamma=0.0, rho=rho, R=100, alpha=0.05)
            expected = math.sqrt(1 - rho) * stats.norm.ppf(0.95)
            assert solve_qz(0.0, params) == pytest.approx(expected, abs=1e-10)

    def test_rho_zero_independent_of_z(self):
        params = TheoryParams(gamma=0.0, rho=0.0, R=100, alpha=0.05)
        expected = stats.norm.ppf(0.95)
        for z in (-3.0, 0.0, 2.5):
            assert solve_qz(z, params) == pytest.approx(expected, abs=1e-10)

    def test_residual(self):
        params = TheoryParams(gamma=1.3, rho=0.25, R=100, alpha=0.05)
        for z in (-2.0, 0.0, 1.7):
            q = solve_qz(z, params)
            s = math.sqrt(1 - params.rho)
            arg = math.sqrt(params.rho) * z + params.rho * params.gamma
            resid = stats.norm.cdf((arg - q) / s) + stats.norm.cdf(-(arg + q) / s) - 2 * 0.05
            assert abs(resid) < 1e-10

    def test_vectorized(self):
        params = TheoryParams(gamma=1.0, rho=0.2, R=100, alpha=0.05)
        z = np.array([-1.0, 0.0, 1.0])
        qs = solve_qz(z, params)
        for zi, qi in zip(z, qs):
            assert solve_qz(float(zi), params) == pytest.approx(float(qi), abs=1e-12)


class TestAsymptoticPower:
    def test_size_at_null(self):
        for rho in (0.0, 0.1, 0.3):
            params = TheoryParams(gamma=0.0, rho=rho, R=1, alpha=0.05)
            assert asymptotic_power(params) == pytest.approx(0.05, abs=1e-4)

    def test_dominant_effect(self):
        params = TheoryParams(gamma=20.0, rho=0.1, R=1, alpha=0.05)
        assert asymptotic_power(params) > 0.999999

    def test_monotone_in_gamma(self):
        vals = [
            asymptotic_power(TheoryParams(gamma=g, rho=0.1, R=1, alpha=0.05))
            for g in (0.0, 0.5, 1.0, 1.5, 2.0)
        ]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_matches_tournament_oracle_at_large_R(self):
        # oracle at R = 3160 should sit within a hair of the R -> infinity
        # integral (gamma = sqrt(26) * 0.25 as in the main grid)
        gamma = math.sqrt(26) * 0.25
        params = TheoryParams(gamma=gamma, rho=0.0, R=3160, alpha=0.05)
        limit = asymptotic_power(params)
        oracle, se = tournament_power(3160, 0.0, gamma, 0.05, n_rep=200_000, seed=77)
        assert abs(limit - oracle) < max(2 * se, 0.01)


class TestPOfUS:
    def test_large_u_vanishes(self):
        params = TheoryParams(1.0, 0.2, 10, 0.05)
        assert p_of_us(50.0, 0.0, params) < 1e-12

    def test_u_zero_is_one(self):
        params = TheoryParams(1.0, 0.2, 10, 0.05)
        for s in (-1.0, 0.0, 2.0):
            assert p_of_us(0.0, s, params) == pytest.approx(1.0, abs=1e-12)

    def test_rho_zero_reduction(self):
        params = TheoryParams(1.0, 0.0, 10, 0.05)
        for u in (0.5, 1.0, 2.0):
            assert p_of_us(u, 0.0, params) == pytest.approx(2 * stats.norm.cdf(-u), abs=1e-12)


class TestFinitePower:
    def test_null_size(self):
        for rho in (0.0, 0.2):
            for R in (10, 100):
                params = TheoryParams(gamma=0.0, rho=rho, R=R, alpha=0.05)
                p, se = finite_power_with_se(params, FAST)
                assert abs(p - 0.05) < 3 * se

    def test_zero_when_budget_unattainable(self):
        params = TheoryParams(gamma=1.0, rho=0.1, R=9, alpha=0.05)
        assert finite_power(params, FAST) == 0.0

    def test_se_reported(self):
        params = TheoryParams(gamma=1.0, rho=0.1, R=100, alpha=0.05)
        p, se = finite_power_with_se(params, FAST)
        assert 0 < p < 1
        assert 0 < se < 0.01


class TestSolveUat:
    def test_t_one(self):
        for a in (0.0, 0.5, 3.0):
            assert solve_uat(a, 1.0) == pytest.approx(0.0, abs=1e-10)

    def test_a_zero_closed_form(self):
        for t in (0.1, 0.5, 0.9):
            assert solve_uat(0.0, t) == pytest.approx(-stats.norm.ppf(t / 2), abs=1e-10)

    def test_residual(self):
        for a, t in ((0.3, 0.2), (1.5, 0.7), (2.0, 0.05)):
            u = solve_uat(a, t)
            resid = stats.norm.cdf(-u + a) + stats.norm.cdf(-u - a) - t
            assert abs(resid) < 1e-10

    def test_domain(self):
        with pytest.raises(ValueError):
            solve_uat(1.0, 0.0)
        with pytest.raises(ValueError):
            solve_uat(1.0, 1.5)


class TestDensityFT:
    def test_uniform_half_at_null(self):
        params = TheoryParams(gamma=0.0, rho=0.2, R=10, alpha=0.05)
        for t in (0.1, 0.3, 0.5, 0.7, 0.9):
            assert density_fT(t, params) == pytest.approx(0.5, abs=1e-3)

    def test_strictly_decreasing_under_effect(self):
        params = TheoryParams(gamma=1.0, rho=0.2, R=10, alpha=0.05)
        vals = [density_fT(t, params) for t in np.arange(0.1, 0.95, 0.1)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_total_mass(self):
        # point mass at t=1 plus the density integral; includes the atom
        params = TheoryParams(gamma=1.0, rho=0.2, R=10, alpha=0.05)
        assert fT_total_mass(params) == pytest.approx(1.0, abs=1e-3)

    def test_density_crossing_diagnostic(self):
        # lower-correlation density starts below and ends above the
        # higher-correlation one, crossing once on a fine grid (reported as a
        # numerical diagnostic of the conjectured single crossing)
        t_grid = np.linspace(0.02, 0.98, 97)
        p1 = TheoryParams(gamma=1.0, rho=0.1, R=10, alpha=0.05)
        p2 = TheoryParams(gamma=1.0, rho=0.3, R=10, alpha=0.05)
        diff = np.array([density_fT(t, p1) - density_fT(t, p2) for t in t_grid])
        signs = np.sign(diff[np.abs(diff) > 1e-9])
        changes = int((signs[1:] != signs[:-1]).sum())
        assert changes == 1


class TestToyPower:
    def test_quarter_at_null(self):
        for rho in (0.0, 0.3, 0.6, 0.9):
            assert toy_power_r2(rho, 0.0) == pytest.approx(0.25, abs=1e-6)

    def test_maximized_without_correlation(self):
        for gamma in (0.5, 1.0, 2.0):
            base = toy_power_r2(0.0, gamma)
            for rho in (0.1, 0.3, 0.5, 0.7, 0.9):
                assert toy_power_r2(rho, gamma) < base

    def test_matches_tournament_oracle(self):
        rho, gamma = 0.3, 1.0
        value = toy_power_r2(rho, gamma)
        oracle, se = tournament_power(2, rho, gamma, 0.25, n_rep=400_000, seed=11)
        assert abs(value - oracle) < 2 * se


class TestPowerSE:
    def test_null_marginals_equal_level(self):
        res = power_se(TheoryParams(gamma=0.0, rho=0.2, R=100, alpha=0.05))
        assert res.p == pytest.approx(0.05, abs=1e-6)
        assert res.p_m == pytest.approx(0.05, abs=1e-6)

    def test_se_finite_decreasing(self):
        res = power_se(TheoryParams(gamma=1.25, rho=0.1, R=100, alpha=0.05))
        ses = [res.se_finite(R) for R in (10, 100, 1000, 100_000)]
        assert all(b < a for a, b in zip(ses, ses[1:]))

    def test_limit_positive(self):
        res = power_se(TheoryParams(gamma=1.25, rho=0.1, R=100, alpha=0.05))
        assert res.se_limit > 0

    def test_limit_formula(self):
        res = PowerSE(p=0.4, p_m=0.3, p_b=0.2, p_s=0.17)
        assert res.se_limit == pytest.approx(math.sqrt(0.17 - 0.16), abs=1e-12)

    def test_clamps_negative_variance(self):
        # quadrature noise can push the composed variance fractionally negative
        res = PowerSE(p=0.1, p_m=0.0, p_b=0.0, p_s=0.0)
        with pytest.warns(UserWarning):
            assert res.se_finite(10) == 0.0
