"""Complex chi-square, F and beta laws of the statistic pair.

Conventions: a complex chi-square variable with ``m`` complex degrees of
freedom and noncentrality ``delta2`` is ``sum_i |g_i + mu_i|^2`` with
``g_i`` standard circular complex normal and ``sum_i |mu_i|^2 = delta2``.
Complex F with ``(1, n)`` dof is the ratio of a 1-dof noncentral variable
to an independent central ``n``-dof variable. The complex noncentral beta
with ``(p, q)`` dof is ``A / (A + B)`` with ``A`` central ``p``-dof and
``B`` noncentral ``q``-dof, so noncentrality pushes the law toward 0.

Noncentral CDFs and PDFs are Poisson mixtures of central terms, truncated
once the retained Poisson mass reaches ``1 - tol``.
"""
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .exceptions import SeriesNonConvergence
from .rng import complex_normal

SERIES_TOL = 1e-12
MAX_TERMS = 10**6


# ---------------------------------------------------------------- sampling


def sample_complex_chi2(m, delta2, rng, size=None):
    """Draw ``sum_{i<m} |g_i + mu_i|^2`` with all noncentrality on the first coordinate."""
    if m < 1:
        raise ValueError("m must be >= 1")
    shape = () if size is None else tuple(np.atleast_1d(size))
    delta2 = np.broadcast_to(np.asarray(delta2, dtype=float), shape)
    g = complex_normal(rng, shape + (m,))
    g[..., 0] += np.sqrt(delta2)
    return np.sum(np.abs(g) ** 2, axis=-1)


def sample_complex_F(n_den, delta2, rng, size=None):
    """Complex F with 1 and ``n_den`` dof; ``delta2`` may vary per sample."""
    num = sample_complex_chi2(1, delta2, rng, size)
    den = sample_complex_chi2(n_den, 0.0, rng, size)
    return num / den


def sample_complex_beta(p, q, delta2, rng, size=None):
    a = sample_complex_chi2(p, 0.0, rng, size)
    b = sample_complex_chi2(q, delta2, rng, size)
    return a / (a + b)


# ---------------------------------------------------------- Poisson series


def poisson_window(lam, tol=SERIES_TOL):
    """Index range ``[j_lo, j_hi]`` holding at least ``1 - tol`` of every Pois(lam) mass."""
    lam = np.asarray(lam, dtype=float)
    lmin, lmax = float(lam.min()), float(lam.max())
    j_lo = 0 if lmin <= 0 else int(stats.poisson.ppf(tol / 2, lmin))
    j_hi = 0 if lmax <= 0 else int(stats.poisson.isf(tol / 2, lmax)) + 1
    if j_hi - j_lo + 1 > MAX_TERMS:
        raise SeriesNonConvergence(
            f"Poisson series needs {j_hi - j_lo + 1} terms (noncentrality {lmax:g})"
        )
    return max(j_lo, 0), j_hi


def poisson_weight(j, lam):
    """Pois(lam) mass at ``j``, evaluated in log space (no underflow of e^-lam)."""
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = j * np.log(lam) - lam - special.gammaln(j + 1)
    return np.where(lam > 0, np.exp(logw), float(j == 0))


# ------------------------------------------------------------- complex F


def cdf_complex_F(x, n_den, delta2=0.0, tol=SERIES_TOL, window=None):
    """CDF of the complex F law with 1 and ``n_den`` dof and noncentrality ``delta2``.

    ``x`` and ``delta2`` broadcast against each other. The central case is
    the closed form ``1 - (1 + x)^-n``. The noncentral case sums
    ``Pois_j(delta2) * I_{x/(1+x)}(1 + j, n)``; for integer ``n`` the
    incomplete-beta terms satisfy an exact recurrence in the first parameter, so only the
    first term is evaluated directly. ``window`` overrides the Poisson index
    range when the caller already knows the noncentrality bounds.
    """
    x, lam = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(delta2, dtype=float))
    xp = np.maximum(x, 0.0)
    if not np.any(lam > 0):
        return -np.expm1(-n_den * np.log1p(xp))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        y = np.where(np.isinf(xp), 1.0, xp / (1.0 + xp))
        j_lo, j_hi = window or poisson_window(lam, tol)
        a = 1.0 + j_lo
        ib = special.betainc(a, n_den, y)
        term = np.exp(
            special.gammaln(a + n_den) - special.gammaln(a + 1) - special.gammaln(n_den)
            + a * np.log(y) + n_den * np.log1p(-y)
        )
        term = np.nan_to_num(term, nan=0.0)
        acc = np.zeros_like(y)
        for j in range(j_lo, j_hi + 1):
            acc += poisson_weight(j, lam) * ib
            ib = np.maximum(ib - term, 0.0)
            term = term * y * (a + n_den) / (a + 1.0)
            a += 1.0
    return np.clip(acc, 0.0, 1.0)


def sf_complex_F(x, n_den, delta2=0.0, tol=SERIES_TOL):
    x = np.asarray(x, dtype=float)
    if np.all(np.asarray(delta2) == 0):
        return (1.0 + np.maximum(x, 0.0)) ** (-float(n_den))
    return 1.0 - cdf_complex_F(x, n_den, delta2, tol)


# ------------------------------------------------------------ complex beta


def pdf_complex_beta(x, p, q, delta2=0.0, tol=SERIES_TOL):
    """Density of the complex beta law ``A / (A + B)`` (noncentrality in ``B``)."""
    x = np.asarray(x, dtype=float)
    if delta2 == 0:
        return stats.beta.pdf(x, p, q)
    j_lo, j_hi = poisson_window(delta2, tol)
    return sum(
        poisson_weight(j, delta2) * stats.beta.pdf(x, p, q + j) for j in range(j_lo, j_hi + 1)
    )


def cdf_complex_beta(x, p, q, delta2=0.0, tol=SERIES_TOL):
    x = np.asarray(x, dtype=float)
    if delta2 == 0:
        return special.betainc(p, q, x)
    j_lo, j_hi = poisson_window(delta2, tol)
    return sum(
        poisson_weight(j, delta2) * special.betainc(p, q + j, x) for j in range(j_lo, j_hi + 1)
    )


# ------------------------------------------------------- complex chi-square


def cdf_complex_chi2(x, m, delta2=0.0):
    """CDF of a complex chi-square with ``m`` dof; ``2X`` is real chi-square with ``2m`` dof."""
    x, lam = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(delta2, dtype=float))
    central = special.gammainc(m, np.maximum(x, 0.0))
    if not np.any(lam > 0):
        return central
    nc = stats.ncx2.cdf(2.0 * np.maximum(x, 0.0), 2 * m, 2.0 * np.where(lam > 0, lam, 1.0))
    return np.where(lam > 0, nc, central)


# ------------------------------------------------------------- stat pairs


@dataclass(frozen=True)
class StatLaw:
    """Law of ``(t~, beta)``: received SNR along the actual steering and cos^2(theta).

    ``beta ~ Cbeta(K-N+2, N-1; snr * (1 - cos2))`` and, given beta,
    ``t~ ~ CF(1, K-N+1; snr * beta * cos2)``. ``snr = 0`` is H0; ``cos2 = 1``
    is the matched law used for H1 training data.
    """

    snr: float = 0.0
    cos2_theta: float = 1.0

    @classmethod
    def h0(cls):
        return cls()

    @classmethod
    def matched(cls, snr):
        return cls(snr=float(snr), cos2_theta=1.0)

    @classmethod
    def mismatched(cls, snr_p, cos2_theta):
        return cls(snr=float(snr_p), cos2_theta=float(cos2_theta))

    @property
    def beta_noncentrality(self):
        return self.snr * (1.0 - self.cos2_theta)

    def t_noncentrality(self, beta):
        return self.snr * self.cos2_theta * np.asarray(beta)


def beta_dof(n, k_s):
    return k_s - n + 2, n - 1


def f_den_dof(n, k_s):
    return k_s - n + 1


def sample_stat_pair(law, n, k_s, rng, size=None):
    """Draw ``(t~, beta)`` directly from their distribution-level law."""
    if k_s < n:
        raise ValueError("k_s must be >= n")
    p, q = beta_dof(n, k_s)
    beta = sample_complex_beta(p, q, law.beta_noncentrality, rng, size)
    t = sample_complex_F(f_den_dof(n, k_s), law.t_noncentrality(beta), rng, size)
    return t, beta
