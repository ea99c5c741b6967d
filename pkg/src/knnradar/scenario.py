"""Radar signal model: steering vectors, disturbance covariance, data generation."""
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from .exceptions import ConfigError, DegenerateVector
from .linalg import cholesky, solve_quadratic_form
from .rng import complex_normal

H0, H1 = 0, 1


def steering_vector(nu_d, n):
    """Doppler steering vector ``[1, e^{j2pi nu}, ..., e^{j2pi nu (n-1)}]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.exp(2j * np.pi * nu_d * np.arange(n))


def gaussian_covariance(rho, n):
    """Gaussian-shaped correlation ``C[i, j] = rho ** ((i - j) ** 2)`` (unit diagonal)."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    lag = np.subtract.outer(np.arange(n), np.arange(n))
    return rho ** (lag.astype(float) ** 2)


def disturbance_covariance(rho, n, cnr_db=10.0):
    """Gaussian-shaped clutter at ``cnr_db`` over unit white noise.

    ``cnr_db=None`` returns the bare clutter shape.
    """
    shape = gaussian_covariance(rho, n)
    if cnr_db is None:
        return shape
    return 10.0 ** (cnr_db / 10.0) * shape + np.eye(n)


def _whitened_energy(a, c):
    e = solve_quadratic_form(a, c, a).real
    if not e > np.finfo(float).tiny:
        raise DegenerateVector("vector has vanishing energy in the C^-1 metric")
    return e


def cos2_theta(p, v, c):
    """Squared cosine between ``p`` and ``v`` in the ``C^{-1}`` inner product."""
    pp = _whitened_energy(p, c)
    vv = _whitened_energy(v, c)
    pv = solve_quadratic_form(p, c, v)
    return float(min(max(abs(pv) ** 2 / (pp * vv), 0.0), 1.0))


def alpha_from_snr(snr_linear, v, c):
    """Real amplitude with ``|alpha|^2 v^H C^-1 v = snr_linear``."""
    if snr_linear < 0:
        raise ValueError("snr must be nonnegative")
    return float(np.sqrt(snr_linear / _whitened_energy(v, c)))


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Dimensions and signal parameters of one detection scenario.

    ``snr_db`` is the SNR of the echo actually present in the CUT, i.e.
    measured along the actual steering ``p = v(nu_d + delta_nu)``; training
    data always use the nominal steering.
    """

    n: int = 8
    k_s: int = 16
    nu_d: float = 0.08
    rho: float = 0.95
    snr_db: float = 12.0
    delta_nu: float = 0.0
    cnr_db: float | None = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.k_s < self.n:
            raise ConfigError(f"k_s must be >= n for an invertible S, got {self.k_s} < {self.n}")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")

    def replace(self, **changes):
        return replace(self, **changes)

    @cached_property
    def covariance(self):
        return disturbance_covariance(self.rho, self.n, self.cnr_db)

    @cached_property
    def chol(self):
        return cholesky(self.covariance)

    @property
    def nominal_steering(self):
        return steering_vector(self.nu_d, self.n)

    @property
    def actual_steering(self):
        return steering_vector(self.nu_d + self.delta_nu, self.n)

    @property
    def alpha(self):
        return alpha_from_snr(float(db_to_linear(self.snr_db)), self.actual_steering, self.covariance)

    @property
    def cos2_theta(self):
        return cos2_theta(self.actual_steering, self.nominal_steering, self.covariance)


@dataclass(frozen=True)
class Observation:
    z: np.ndarray  # (N,) cell under test
    r: np.ndarray  # (K_S, N) secondary data, one vector per row


def draw_observations(hyp, cfg, rng, size):
    """Batch of ``size`` observations as arrays ``z (size, N)`` and ``r (size, K_S, N)``."""
    L = cfg.chol
    z = complex_normal(rng, (size, cfg.n)) @ L.T
    r = complex_normal(rng, (size, cfg.k_s, cfg.n)) @ L.T
    if hyp == H1:
        z = z + cfg.alpha * cfg.actual_steering
    return z, r


def draw_observation(hyp, cfg, rng):
    z, r = draw_observations(hyp, cfg, rng, 1)
    return Observation(z=z[0], r=r[0])


def delta_nu_for_cos2(target, n, nu_d=0.08, rho=0.95, cnr_db=10.0, scan=2000):
    """Smallest positive Doppler offset whose cos^2(theta) equals ``target``.

    Scans ``(0, 1/n]`` (the main lobe of the whitened ambiguity) for the first
    crossing, then refines with Brent's method.
    """
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie in (0, 1)")
    c = disturbance_covariance(rho, n, cnr_db)
    v = steering_vector(nu_d, n)

    def gap(dnu):
        return cos2_theta(steering_vector(nu_d + dnu, n), v, c) - target

    grid = np.linspace(0.0, 1.0 / n, scan + 1)
    prev = gap(grid[0])
    for lo, hi in zip(grid[:-1], grid[1:]):
        cur = gap(hi)
        if prev > 0 >= cur:
            return brentq(gap, lo, hi, xtol=1e-14)
        prev = cur
    raise ValueError(f"no offset in (0, 1/{n}] reaches cos2_theta={target}")
