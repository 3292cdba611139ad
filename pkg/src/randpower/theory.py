"""Closed-form and integral power computations for the randomization test
under the stylized model: standardized effect gamma = sqrt(n)*beta, uniform
absolute allocation correlation rho, R mirrored allocation pairs, level
alpha. Includes the asymptotic (R -> infinity) integral, the finite-R
double integral evaluated by Monte Carlo, the beat-probability density f_T,
the R = 2 toy case, and the power standard-error decomposition.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "TheoryParams",
    "QuadratureSpec",
    "solve_qz",
    "asymptotic_power",
    "p_of_us",
    "finite_power",
    "finite_power_with_se",
    "solve_uat",
    "density_fT",
    "fT_total_mass",
    "toy_power_r2",
    "PowerSE",
    "power_se",
]

_norm = stats.norm


@dataclass(frozen=True)
class TheoryParams:
    """(gamma, rho, R, alpha) driving the power formulas."""

    gamma: float
    rho: float
    R: int
    alpha: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must be in [0, 1)")
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must be in (0, 0.5)")

    @property
    def q(self) -> int:
        """Number of null estimates allowed to beat the run: floor(2*alpha*R) - 1."""
        return math.floor(2 * self.alpha * self.R) - 1


@dataclass(frozen=True)
class QuadratureSpec:
    """Numerical knobs for the integral evaluations."""

    mc_samples: int = 1_000_000
    z_halfwidth: float = 8.0
    z_nodes: int = 2001
    root_tol: float = 1e-12
    refine_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 10_000:
            raise ValueError("mc_samples must be >= 10^4 for any reported number")
        if self.root_tol > 1e-10:
            raise ValueError("root tolerance must be <= 1e-10")
        if self.z_nodes < 3:
            raise ValueError("need at least 3 quadrature nodes")


def _simpson(values: np.ndarray, h: float) -> float:
    """Composite Simpson on an odd-length equally spaced grid."""
    if values.shape[-1] % 2 == 0:
        raise ValueError("Simpson rule needs an odd number of nodes")
    w = np.ones(values.shape[-1])
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(values @ w) * h / 3.0


def _bisect_decreasing(f, lo, hi, tol: float, max_iter: int = 200) -> np.ndarray:
    """Vectorized bisection for a strictly decreasing f, roots of f = 0.

    lo/hi are arrays bracketing the root (f(lo) > 0 > f(hi)); brackets are
    expanded geometrically if they fail to straddle zero.
    """
    lo = np.array(lo, dtype=np.float64, copy=True)
    hi = np.array(hi, dtype=np.float64, copy=True)
    for _ in range(200):
        bad = f(lo) < 0
        if not np.any(bad):
            break
        span = np.maximum(hi - lo, 1.0)
        lo = np.where(bad, lo - span, lo)
    for _ in range(200):
        bad = f(hi) > 0
        if not np.any(bad):
            break
        span = np.maximum(hi - lo, 1.0)
        hi = np.where(bad, hi + span, hi)
    if np.any(f(lo) < 0) or np.any(f(hi) > 0):
        raise RuntimeError("bisection failed to bracket the root")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        high_side = f(mid) > 0
        lo = np.where(high_side, mid, lo)
        hi = np.where(high_side, hi, mid)
        if np.max(hi - lo) < tol:
            break
    return 0.5 * (lo + hi)


def solve_qz(z, params: TheoryParams, root_tol: float = 1e-12):
    """The asymptotic null-quantile q(z): unique root of

        Phi((sqrt(rho) z + rho gamma - q)/sqrt(1-rho))
      + Phi(-(sqrt(rho) z + rho gamma + q)/sqrt(1-rho)) = 2 alpha

    (left side strictly decreasing in q). Vectorized over z.
    """
    z = np.asarray(z, dtype=np.float64)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    rho, gamma, alpha = params.rho, params.gamma, params.alpha
    s = math.sqrt(1.0 - rho)
    m = math.sqrt(rho) * z + rho * gamma

    def f(q):
        return _norm.cdf((m - q) / s) + _norm.cdf(-(m + q) / s) - 2.0 * alpha

    span = 10.0 * s + 10.0
    q = _bisect_decreasing(f, m - span, m + span, root_tol)
    return float(q[0]) if scalar else q


def asymptotic_power(params: TheoryParams, quad: QuadratureSpec | None = None) -> float:
    """R -> infinity power: integral over z of
    Phi((gamma + sqrt(rho) z - q(z))/sqrt(1-rho)) phi(z)."""
    quad = quad or QuadratureSpec()
    nodes = quad.z_nodes if quad.z_nodes % 2 == 1 else quad.z_nodes + 1
    z = np.linspace(-quad.z_halfwidth, quad.z_halfwidth, nodes)
    q = solve_qz(z, params, quad.root_tol)
    s = math.sqrt(1.0 - params.rho)
    integrand = _norm.cdf((params.gamma + math.sqrt(params.rho) * z - q) / s) * _norm.pdf(z)
    return float(np.clip(_simpson(integrand, z[1] - z[0]), 0.0, 1.0))


def p_of_us(u, s, params: TheoryParams):
    """Conditional beat probability p(u, s) = Phi(-(1-rho)u + s) + Phi(-(1+rho)u - s)."""
    u = np.asarray(u, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    rho = params.rho
    p = _norm.cdf(-(1.0 - rho) * u + s) + _norm.cdf(-(1.0 + rho) * u - s)
    return np.clip(p, 0.0, 1.0)


def finite_power_with_se(
    params: TheoryParams, quad: QuadratureSpec | None = None
) -> tuple[float, float]:
    """Finite-R power by Monte Carlo integration of

        P = E[ F_B(q; R-1, p(U, S)) 1{U > 0} ],
        U ~ N(gamma/sqrt(1-rho), 1/(1-rho)),  S ~ N(0, rho)

    with q = floor(2 alpha R) - 1 (power is 0 when floor(2 alpha R) < 1; the
    region U <= 0 contributes 0). At rho = 0, S degenerates to 0. Returns
    (power, Monte Carlo standard error).
    """
    quad = quad or QuadratureSpec()
    q = params.q
    if q < 0:
        return 0.0, 0.0
    rho, gamma = params.rho, params.gamma
    rng = np.random.default_rng(quad.seed)
    m = quad.mc_samples
    u = rng.normal(gamma / math.sqrt(1.0 - rho), math.sqrt(1.0 / (1.0 - rho)), m)
    s = rng.normal(0.0, math.sqrt(rho), m) if rho > 0 else np.zeros(m)
    vals = np.zeros(m)
    pos = u > 0
    p = p_of_us(u[pos], s[pos], params)
    vals[pos] = stats.binom.cdf(q, params.R - 1, p)
    power = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(m))
    return power, se


def finite_power(params: TheoryParams, quad: QuadratureSpec | None = None) -> float:
    power, _se = finite_power_with_se(params, quad)
    return power


def solve_uat(a, t, root_tol: float = 1e-12):
    """u(a, t): unique root of Phi(-u + a) + Phi(-u - a) = t (left side
    strictly decreasing in u); u(a, 1) = 0. Vectorized over a and t."""
    a = np.asarray(a, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(a < 0):
        raise ValueError("a must be >= 0")
    if np.any(t <= 0) or np.any(t > 1):
        raise ValueError("t must be in (0, 1]")
    scalar = a.ndim == 0 and t.ndim == 0
    a, t = np.broadcast_arrays(np.atleast_1d(a), np.atleast_1d(t))

    def f(u):
        return _norm.cdf(-u + a) + _norm.cdf(-u - a) - t

    # LHS = 1 at u = 0 and t <= 1, so the root is at u >= 0
    hi = a + 10.0 - _norm.ppf(np.minimum(t, 1.0) / 2.0)
    u = _bisect_decreasing(f, np.zeros_like(hi), hi, root_tol)
    return float(u[0]) if scalar else u


def _refined_simpson(f, lo: float, hi: float, tol: float, start_nodes: int = 257) -> float:
    """Composite Simpson refined by node doubling until successive halvings
    differ by less than tol."""
    nodes = start_nodes if start_nodes % 2 == 1 else start_nodes + 1
    grid = np.linspace(lo, hi, nodes)
    prev = _simpson(f(grid), grid[1] - grid[0])
    for _ in range(8):
        nodes = 2 * nodes - 1
        grid = np.linspace(lo, hi, nodes)
        cur = _simpson(f(grid), grid[1] - grid[0])
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    warnings.warn("quadrature refinement did not converge to tolerance")
    return prev


def density_fT(t: float, params: TheoryParams, quad: QuadratureSpec | None = None) -> float:
    """Density of the beat-probability variable T on (0, 1):

        f_T(t) = exp(-gamma^2/2) * integral_0^inf
                 exp(gamma sqrt(1-rho) u(a,t)) phi(a; 0, rho/(1-rho)) da.

    Requires rho in (0, 1). At gamma = 0 this is identically 1/2.
    """
    quad = quad or QuadratureSpec()
    if not 0 < t < 1:
        raise ValueError("t must be in (0, 1)")
    rho, gamma = params.rho, params.gamma
    if not 0 < rho < 1:
        raise ValueError("density_fT needs rho in (0, 1)")
    sd_a = math.sqrt(rho / (1.0 - rho))

    def integrand(a):
        u = solve_uat(a, np.full_like(a, t), quad.root_tol)
        return np.exp(gamma * math.sqrt(1.0 - rho) * u) * _norm.pdf(a, scale=sd_a)

    val = _refined_simpson(integrand, 0.0, 8.0 * sd_a, quad.refine_tol)
    return float(math.exp(-0.5 * gamma**2) * val)


def fT_total_mass(params: TheoryParams, quad: QuadratureSpec | None = None) -> float:
    """Phi(-gamma) + integral_0^1 f_T(t) dt, which should equal 1.

    The density diverges (integrably) as t -> 0 for gamma > 0; the integral
    is evaluated under the substitution t = 2 Phi(-v), which bounds the
    integrand.
    """
    quad = quad or QuadratureSpec()
    gamma = params.gamma

    def integrand(v):
        t = 2.0 * _norm.cdf(-v)
        vals = np.array([density_fT(ti, params, quad) for ti in t])
        return vals * 2.0 * _norm.pdf(v)

    eps = 1e-9  # keep t strictly inside (0, 1)
    v_lo = -_norm.ppf(0.5 - eps)
    v_hi = gamma + 12.0
    grid = np.linspace(v_lo, v_hi, 401)
    mass = _simpson(integrand(grid), grid[1] - grid[0])
    return float(_norm.cdf(-gamma) + mass)


def toy_power_r2(rho: float, gamma: float, refine_tol: float = 1e-9) -> float:
    """Power of the R = 2, alpha = 1/4 toy case: the probability that the
    run estimate is the largest of the four, via the omega = sqrt((1+rho)/(1-rho))
    parameterization

        G(omega) = integral_0^inf (Phi(u/omega) + Phi(u*omega)) phi(u - gamma) du
                   - Phi(gamma).
    """
    if not 0 <= rho < 1:
        raise ValueError("rho must be in [0, 1)")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    omega = math.sqrt((1.0 + rho) / (1.0 - rho))

    def integrand(u):
        return (_norm.cdf(u / omega) + _norm.cdf(u * omega)) * _norm.pdf(u - gamma)

    val = _refined_simpson(integrand, 0.0, gamma + 12.0, refine_tol, start_nodes=513)
    return float(val - _norm.cdf(gamma))


@dataclass(frozen=True)
class PowerSE:
    """Large-R decomposition of the variability of empirical power.

    Var(R) ~ ((p + p_m + 2 p_b)/4 - p_s)/R + (p_s - p^2); the limit of the
    standard error as R -> infinity is sqrt(p_s - p^2).
    """

    p: float
    p_m: float
    p_b: float
    p_s: float

    @property
    def se_limit(self) -> float:
        return math.sqrt(max(self.p_s - self.p**2, 0.0))

    def se_finite(self, R: int) -> float:
        var = (0.25 * (self.p + self.p_m + 2.0 * self.p_b) - self.p_s) / R + (
            self.p_s - self.p**2
        )
        if var < 0:
            warnings.warn("negative variance from quadrature noise; clamping at 0")
            var = 0.0
        return math.sqrt(var)


def power_se(params: TheoryParams, quad: QuadratureSpec | None = None) -> PowerSE:
    """The four conditional-rejection integrals behind the power SE, using
    the large-sample quantile q(z):

      p   = E_z[ P(I = 1 | z) ],      p_m = E_z[ P(I^m = 1 | z) ],
      p_b = E_z[ P(I = 1, I^m = 1 | z) ],
      p_s = E_z[ ((P(I=1|z) + P(I^m=1|z))/2)^2 ].
    """
    quad = quad or QuadratureSpec()
    rho, gamma = params.rho, params.gamma
    s = math.sqrt(1.0 - rho)
    nodes = quad.z_nodes if quad.z_nodes % 2 == 1 else quad.z_nodes + 1
    z = np.linspace(-quad.z_halfwidth, quad.z_halfwidth, nodes)
    q = solve_qz(z, params, quad.root_tol)
    # run estimate: V = sqrt(rho) z + sqrt(1-rho) Z + gamma; mirror negates the
    # z and Z terms but keeps +gamma
    hi = (gamma + math.sqrt(rho) * z - q) / s  # P(I = 1 | z) = Phi(hi)
    hi_m = (gamma - math.sqrt(rho) * z - q) / s  # P(I^m = 1 | z) = Phi(hi_m)
    prob = _norm.cdf(hi)
    prob_m = _norm.cdf(hi_m)
    # both reject: Z in ((q - gamma - sqrt(rho) z)/s, (gamma - sqrt(rho) z - q)/s)
    both = np.maximum(_norm.cdf(hi_m) - _norm.cdf(-hi), 0.0)
    pdf = _norm.pdf(z)
    h = z[1] - z[0]
    p = _simpson(prob * pdf, h)
    p_m = _simpson(prob_m * pdf, h)
    p_b = _simpson(both * pdf, h)
    p_s = _simpson((0.5 * (prob + prob_m)) ** 2 * pdf, h)
    return PowerSE(p=p, p_m=p_m, p_b=p_b, p_s=p_s)
