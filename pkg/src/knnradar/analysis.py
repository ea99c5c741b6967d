"""Semi-analytic KNN detection probability and brute-force oracles.

For a test feature ``x``, a block of ``k - M`` H0 training features and a
block of ``N_T - M`` H1 training features, the probability that the KNN
rule declares H1 is

    1 - C(N_T, k-M) C(N_T, M) E[ I_Y * p0^(N_T-k+M) * p1^M ]

where ``I_Y`` says every block-0 feature is at least as close to ``x`` as
every block-1 feature, ``p0`` is the probability that a fresh H0 feature
lies beyond the farthest block-0 feature and ``p1`` the probability that a
fresh H1 feature lies within the nearest block-1 feature. The outer
expectation is Monte Carlo; ``p0`` and ``p1`` are one-dimensional integrals
over the fresh feature's beta, with the t~ part in closed form.
"""
from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np
from scipy import special, stats

from .distributions import (
    StatLaw,
    beta_dof,
    cdf_complex_chi2,
    cdf_complex_F,
    f_den_dof,
    poisson_window,
    sample_stat_pair,
)
from .exceptions import ConfigError, InvalidCombinatorics, QuadratureNonConvergence
from .knn import count_from_distances
from .rng import complex_normal

BRUTE_CHUNK = 5000


# ------------------------------------------------------------ quadratics


def quad_coeffs(b_test, b_other, d):
    """Coefficients of ``sum_j d_j^2 (s b_other[j] - t b_test[j])^2 = g1 s^2 - 2 t g2 s + g3 t^2``.

    ``b_other`` may carry leading axes (one row per quadrature node).
    """
    d2 = np.asarray(d, dtype=float) ** 2
    b_test = np.asarray(b_test, dtype=float)
    b_other = np.asarray(b_other, dtype=float)
    g1 = np.sum(d2 * b_other**2, axis=-1)
    g2 = np.sum(d2 * b_other * b_test, axis=-1)
    g3 = np.sum(d2 * b_test**2)
    return g1, g2, np.broadcast_to(g3, np.shape(g1))


@dataclass(frozen=True)
class QuadCase:
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray
    rhs: float
    t: float

    @property
    def discriminant(self):
        """Quarter discriminant of ``g1 s^2 - 2 t g2 s + g3 t^2 - rhs``."""
        t = self.t
        return (t * self.gamma2) ** 2 - self.gamma1 * (self.gamma3 * t**2 - self.rhs)

    def roots(self):
        """``(r_lo, r_hi)``, continuous in the coefficients; meaningful where the discriminant is positive."""
        t = self.t
        sq = np.sqrt(np.maximum(self.discriminant, 0.0))
        b = t * self.gamma2
        q = b + np.where(b >= 0, sq, -sq)
        c = self.gamma3 * t**2 - self.rhs
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = q / self.gamma1
            r2 = np.where(q != 0, c / q, 0.0)
        return np.minimum(r1, r2), np.maximum(r1, r2)


# ----------------------------------------------------------- conditioning


@dataclass(frozen=True)
class ConditioningBlock:
    """Test pair plus the two training blocks of the outer expectation."""

    t: float
    beta: float
    t0: np.ndarray
    beta0: np.ndarray
    t1: np.ndarray
    beta1: np.ndarray
    spec: object

    @cached_property
    def x(self):
        return self.spec.from_pairs(self.t, self.beta)

    @cached_property
    def b_test(self):
        return self.spec.transform(self.beta)

    @cached_property
    def c2(self):
        """Largest squared distance from ``x`` to block 0."""
        x0 = self.spec.from_pairs(np.asarray(self.t0), np.asarray(self.beta0))
        return float(np.max(np.sum((x0 - self.x) ** 2, axis=-1))) if len(x0) else 0.0

    @cached_property
    def a2(self):
        """Smallest squared distance from ``x`` to block 1."""
        x1 = self.spec.from_pairs(np.asarray(self.t1), np.asarray(self.beta1))
        return float(np.min(np.sum((x1 - self.x) ** 2, axis=-1))) if len(x1) else np.inf


def indicator_Y(cond):
    return cond.c2 <= cond.a2


# ------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class BetaQuadrature:
    """Composite Gauss-Legendre rule on (0, 1) split at integrand kinks.

    Kinks sit where the discriminant or the lower root changes sign; they are
    located on a ``scan``-point grid and refined by bisection. Each smooth
    piece is cut into panels no wider than ``panel``.
    """

    scan: int = 512
    nodes: int = 16
    panel: float = 1.0 / 16
    check: bool = False
    tol: float = 1e-6

    def refined(self):
        return BetaQuadrature(self.scan * 2, self.nodes, self.panel / 2, False, self.tol)

    @cached_property
    def _gl(self):
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        return 0.5 * (x + 1.0), 0.5 * w

    def rule(self, breaks):
        """Nodes and weights on (0, 1) for the sorted interior break points."""
        edges = np.concatenate([[0.0], np.asarray(breaks, dtype=float), [1.0]])
        cuts = [edges[:1]]
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi <= lo:
                continue
            npan = max(1, int(np.ceil((hi - lo) / self.panel)))
            cuts.append(np.linspace(lo, hi, npan + 1)[1:])
        cuts = np.concatenate(cuts)
        lo, width = cuts[:-1], np.diff(cuts)
        keep = width > 0
        lo, width = lo[keep], width[keep]
        gx, gw = self._gl
        x = (lo[:, None] + width[:, None] * gx).ravel()
        w = (width[:, None] * gw).ravel()
        return x, w


def _find_breaks(fns, scan, iters=44):
    """Sign changes in (0, 1) of each vectorized function in ``fns``."""
    grid = (np.arange(scan) + 0.5) / scan
    a_list, b_list, kind = [], [], []
    for i, fn in enumerate(fns):
        s = np.sign(fn(grid))
        idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
        a_list.append(grid[idx])
        b_list.append(grid[idx + 1])
        kind.append(np.full(len(idx), i))
    a = np.concatenate(a_list)
    if not len(a):
        return a
    b = np.concatenate(b_list)
    kind = np.concatenate(kind)

    def evaluate(xs):
        out = np.empty_like(xs)
        for i, fn in enumerate(fns):
            sel = kind == i
            if np.any(sel):
                out[sel] = fn(xs[sel])
        return out

    fa = evaluate(a)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        fm = evaluate(mid)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, mid, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, mid)
    return np.sort(0.5 * (a + b))


class _BetaDensity:
    def __init__(self, p, q):
        self.p, self.q = p, q
        self.lognorm = -special.betaln(p, q)

    def __call__(self, x):
        return np.exp(self.lognorm + (self.p - 1) * np.log(x) + (self.q - 1) * np.log1p(-x))


def _integrate(cond, rhs, integrand, density, quad):
    """``int_0^1 integrand(beta, r_lo, r_hi, disc) f(beta) d beta`` for the quadratic at ``rhs``."""
    spec, t, b_test = cond.spec, cond.t, cond.b_test
    d = spec.weights

    def case(beta):
        g1, g2, g3 = quad_coeffs(b_test, spec.transform(beta), d)
        return QuadCase(g1, g2, g3, rhs, t)

    def disc(beta):
        return case(beta).discriminant

    def lower_root(beta):
        return case(beta).roots()[0]

    def run(q):
        x, w = q.rule(_find_breaks((disc, lower_root), q.scan))
        c = case(x)
        lo, hi = c.roots()
        vals = integrand(x, lo, hi, c.discriminant)
        return float(np.sum(w * vals * density(x)))

    value = run(quad)
    if quad.check:
        fine = run(quad.refined())
        if abs(fine - value) > quad.tol:
            raise QuadratureNonConvergence(
                f"grid doubling moved the integral by {abs(fine - value):.3g}"
            )
    return min(max(value, 0.0), 1.0)


def p0_closed(cond, n, k_s, quad=None):
    """P(a fresh H0 feature is at least as far from x as the whole block 0)."""
    quad = quad or BetaQuadrature()
    c2 = cond.c2
    if c2 <= 0.0:
        return 1.0
    if not np.isfinite(c2):
        return 0.0
    nden = f_den_dof(n, k_s)

    def integrand(beta, lo, hi, disc):
        inside = -np.expm1(-nden * np.log1p(np.maximum(lo, 0.0)))  # F(max(r_lo, 0))
        above = (1.0 + np.maximum(hi, 0.0)) ** (-float(nden))  # 1 - F(r_hi)
        return np.where(disc > 0, inside + above, 1.0)

    return _integrate(cond, c2, integrand, _BetaDensity(*beta_dof(n, k_s)), quad)


def p1_closed(cond, n, k_s, snr, quad=None):
    """P(a fresh H1 training feature at ``snr`` is no farther from x than block 1)."""
    quad = quad or BetaQuadrature()
    a2 = cond.a2
    if a2 <= 0.0:
        return 0.0
    if not np.isfinite(a2):
        return 1.0
    nden = f_den_dof(n, k_s)
    window = poisson_window(np.array([0.0, snr])) if snr > 0 else None

    def integrand(beta, lo, hi, disc):
        lam = snr * beta
        pts = np.stack([np.maximum(hi, 0.0), np.maximum(lo, 0.0)])
        cdf = cdf_complex_F(pts, nden, np.broadcast_to(lam, pts.shape), window=window)
        return np.where(disc > 0, cdf[0] - cdf[1], 0.0)

    return _integrate(cond, a2, integrand, _BetaDensity(*beta_dof(n, k_s)), quad)


# --------------------------------------------------------- outer estimates


def _check_rule(n_t, k, m):
    if not 0 <= m <= k - 1:
        raise InvalidCombinatorics(f"M={m} must lie in [0, k-1] for k={k}")
    if k - m > n_t or m > n_t:
        raise InvalidCombinatorics(f"blocks of {k - m} and {n_t - m} do not fit N_T={n_t}")


def block_factor(n_t, k, m):
    """Number of ways to pick the two conditioning blocks."""
    _check_rule(n_t, k, m)
    return comb(n_t, k - m) * comb(n_t, n_t - m)


def _finish(g, factor):
    n = len(g)
    est = 1.0 - factor * float(np.mean(g))
    se = factor * float(np.std(g, ddof=1)) / np.sqrt(n)
    return est, se


def semi_analytic_probability(n_t, k, m, spec, n, k_s, test_law, train_snr, n_outer, rng, quad=None):
    """Semi-analytic ``P(KNN decides H1)`` with its Monte Carlo standard error.

    ``test_law`` is the :class:`StatLaw` of the tested feature; training
    blocks follow H0 and the matched law at ``train_snr`` (linear).
    """
    factor = block_factor(n_t, k, m)
    if spec.kind != "stacked":
        raise ConfigError("closed-form evaluation needs stacked-statistic features")
    if n_outer < 2:
        raise ValueError("n_outer must be >= 2")
    quad = quad or BetaQuadrature()
    h0, h1 = StatLaw.h0(), StatLaw.matched(train_snr)
    t, beta = sample_stat_pair(test_law, n, k_s, rng, n_outer)
    t0, beta0 = sample_stat_pair(h0, n, k_s, rng, (n_outer, k - m))
    t1, beta1 = sample_stat_pair(h1, n, k_s, rng, (n_outer, n_t - m))
    x = spec.from_pairs(t, beta)
    c2 = np.max(np.sum((spec.from_pairs(t0, beta0) - x[:, None]) ** 2, axis=-1), axis=-1)
    a2 = np.min(np.sum((spec.from_pairs(t1, beta1) - x[:, None]) ** 2, axis=-1), axis=-1)
    e0 = n_t - k + m
    g = np.zeros(n_outer)
    for i in np.nonzero(c2 <= a2)[0]:
        cond = ConditioningBlock(t[i], beta[i], t0[i], beta0[i], t1[i], beta1[i], spec)
        val = 1.0
        if e0 > 0:
            val *= p0_closed(cond, n, k_s, quad) ** e0
        if m > 0 and val > 0:
            val *= p1_closed(cond, n, k_s, train_snr, quad) ** m
        g[i] = val
    return _finish(g, factor)


def brute_force_probability(n_t, k, m, spec, n, k_s, test_law, train_snr, n_trials, rng):
    """Direct simulation: fresh distribution-level training set per trial, exact KNN rule."""
    _check_rule(n_t, k, m)
    h0, h1 = StatLaw.h0(), StatLaw.matched(train_snr)
    hits = 0
    for start in range(0, n_trials, BRUTE_CHUNK):
        b = min(BRUTE_CHUNK, n_trials - start)
        x = spec.from_pairs(*sample_stat_pair(test_law, n, k_s, rng, b))
        f0 = spec.from_pairs(*sample_stat_pair(h0, n, k_s, rng, (b, n_t)))
        f1 = spec.from_pairs(*sample_stat_pair(h1, n, k_s, rng, (b, n_t)))
        train = np.concatenate([f0, f1], axis=1)
        d2 = np.sum((train - x[:, None]) ** 2, axis=-1)
        hits += int(np.sum(count_from_distances(d2, n_t, k) > m))
    p = hits / n_trials
    return p, float(np.sqrt(p * (1.0 - p) / n_trials))


def exchangeable_probability(n_t, k, m):
    """P(more than M of the k nearest carry label 1) when both classes are iid."""
    return float(stats.hypergeom.sf(m, 2 * n_t, n_t, k))


# ------------------------------------------------------ Gaussian feature toy


def _gaussian(rng, mean, sigma2, shape):
    mean = np.asarray(mean, dtype=complex)
    return mean + np.sqrt(sigma2) * complex_normal(rng, tuple(shape) + mean.shape)


def gaussian_toy_probability(m0, m1, sigma2, n_t, k, m, n_outer, rng, test_class=0):
    """Outer Monte Carlo for features ``CN(m_i, sigma2 I)`` with p0, p1 from chi-square CDFs."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    factor = block_factor(n_t, k, m)
    m0 = np.asarray(m0, dtype=complex)
    m1 = np.asarray(m1, dtype=complex)
    dim = m0.shape[-1]
    x = _gaussian(rng, m1 if test_class else m0, sigma2, (n_outer,))
    x0 = _gaussian(rng, m0, sigma2, (n_outer, k - m))
    x1 = _gaussian(rng, m1, sigma2, (n_outer, n_t - m))
    c2 = np.max(np.sum(np.abs(x0 - x[:, None]) ** 2, axis=-1), axis=-1)
    a2 = np.min(np.sum(np.abs(x1 - x[:, None]) ** 2, axis=-1), axis=-1)
    nc0 = np.sum(np.abs(m0 - x) ** 2, axis=-1) / sigma2
    nc1 = np.sum(np.abs(m1 - x) ** 2, axis=-1) / sigma2
    p0 = 1.0 - cdf_complex_chi2(c2 / sigma2, dim, nc0)
    p1 = cdf_complex_chi2(a2 / sigma2, dim, nc1)
    g = np.where(c2 <= a2, p0 ** (n_t - k + m) * p1**m, 0.0)
    return _finish(g, factor)


def gaussian_toy_brute_force(m0, m1, sigma2, n_t, k, m, n_trials, rng, test_class=0):
    """Direct KNN simulation for the Gaussian toy features."""
    _check_rule(n_t, k, m)
    hits = 0
    for start in range(0, n_trials, BRUTE_CHUNK):
        b = min(BRUTE_CHUNK, n_trials - start)
        x = _gaussian(rng, m1 if test_class else m0, sigma2, (b,))
        train = np.concatenate(
            [_gaussian(rng, m0, sigma2, (b, n_t)), _gaussian(rng, m1, sigma2, (b, n_t))], axis=1
        )
        d2 = np.sum(np.abs(train - x[:, None]) ** 2, axis=-1)
        hits += int(np.sum(count_from_distances(d2, n_t, k) > m))
    p = hits / n_trials
    return p, float(np.sqrt(p * (1.0 - p) / n_trials))
