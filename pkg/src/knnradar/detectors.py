"""Adaptive detection statistics and feature extraction.

Kelly, AMF and ACE are all algebraic functions of the pair ``(t, beta)``
(here ``t`` is the Kelly-derived statistic t~ = t_Kelly / (1 - t_Kelly)
and ``beta`` the loss factor). Every statistic below is built from the
same three quadratic forms, so the decomposition identities hold to
roundoff rather than only in exact arithmetic.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DimensionMismatch, TransformSingularity
from .linalg import primitive_forms, whiten

RAW = "raw"
STACKED = "stacked"


def scaled_sample_covariance(r):
    """``S = sum_i r_i r_i^H`` for secondary data stored one vector per row.

    Accepts ``(K_S, N)`` or a stack ``(..., K_S, N)``.
    """
    r = np.asarray(r)
    return np.einsum("...ki,...kj->...ij", r, np.conj(r))


@dataclass(frozen=True)
class StatPair:
    t_tilde: np.ndarray
    beta: np.ndarray


def _forms(z, s, v):
    zz, zv, vv = primitive_forms(z, s, v)
    a = np.abs(zv) ** 2 / vv  # |z^H S^-1 v|^2 / v^H S^-1 v
    return zz, a


def kelly_stat(z, s, v):
    zz, a = _forms(z, s, v)
    return a / (1.0 + zz)


def amf_stat(z, s, v):
    _, a = _forms(z, s, v)
    return a


def ace_stat(z, s, v):
    zz, a = _forms(z, s, v)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(zz > 0, a / np.where(zz > 0, zz, 1.0), 0.0)


def stat_pair(z, s, v):
    """The sufficient pair ``(t~, beta)``; vectorized over leading axes."""
    zz, a = _forms(z, s, v)
    # z^H S^-1 z >= a by Cauchy-Schwarz; clip roundoff so beta stays <= 1
    perp = np.maximum(zz - a, 0.0)
    beta = 1.0 / (1.0 + perp)
    return StatPair(t_tilde=a * beta, beta=beta)


# transforms b = f(beta) of the stacked features
TRANSFORMS = {
    "kelly": lambda beta: np.ones_like(beta),
    "amf": lambda beta: 1.0 / beta,
    "ace": lambda beta: 1.0 / (1.0 - beta),
}


@dataclass(frozen=True)
class FeatureSpec:
    """Map from an observation to a real feature vector.

    ``kind`` is ``"raw"`` (whitened CUT, 2N reals) or ``"stacked"``, in which
    case ``stats`` lists ``(transform_name, weight)`` pairs and entry j of the
    feature is ``weight_j * t~ * f_j(beta)``.
    """

    kind: str = STACKED
    stats: tuple = (("kelly", 1.0),)

    def __post_init__(self):
        if self.kind == RAW:
            return
        if self.kind != STACKED:
            raise ConfigError(f"unknown feature kind {self.kind!r}")
        if len(self.stats) < 1:
            raise ConfigError("stacked features need at least one statistic")
        for name, weight in self.stats:
            if name not in TRANSFORMS:
                raise ConfigError(f"unknown transform {name!r}; choose from {sorted(TRANSFORMS)}")
            if weight < 0:
                raise ConfigError("feature weights must be nonnegative")
        if not any(w > 0 for _, w in self.stats):
            raise ConfigError("at least one feature weight must be positive")

    @classmethod
    def raw(cls):
        return cls(kind=RAW, stats=())

    @classmethod
    def stacked(cls, *stats):
        return cls(kind=STACKED, stats=tuple((str(n), float(w)) for n, w in stats))

    @property
    def weights(self):
        return np.array([w for _, w in self.stats], dtype=float)

    def dim(self, n):
        return 2 * n if self.kind == RAW else len(self.stats)

    def transform(self, beta):
        """``b[..., j] = f_j(beta)`` for every stacked entry."""
        beta = np.asarray(beta, dtype=float)
        cols = []
        for name, _ in self.stats:
            if name == "amf" and np.any(beta == 0.0):
                raise TransformSingularity("AMF transform evaluated at beta = 0")
            if name == "ace" and np.any(beta == 1.0):
                raise TransformSingularity("ACE transform evaluated at beta = 1")
            cols.append(TRANSFORMS[name](beta))
        return np.stack(cols, axis=-1)

    def from_pairs(self, t_tilde, beta):
        """Stacked features from ``(t~, beta)`` arrays of matching shape."""
        if self.kind != STACKED:
            raise ConfigError("raw features cannot be formed from statistic pairs")
        t_tilde = np.asarray(t_tilde, dtype=float)
        return self.weights * t_tilde[..., None] * self.transform(beta)


# reference feature designs
def kelly_amf_spec(d2=0.7):
    return FeatureSpec.stacked(("kelly", 1.0), ("amf", d2))


def kelly_ace_spec(d2=0.8):
    return FeatureSpec.stacked(("kelly", 1.0), ("ace", d2))


def embed_complex(x):
    """Interleave real and imaginary parts: ``[Re x1, Im x1, Re x2, ...]``."""
    x = np.asarray(x)
    return np.stack([x.real, x.imag], axis=-1).reshape(x.shape[:-1] + (2 * x.shape[-1],))


def extract_features(z, r, v, spec):
    """Feature vectors for a batch ``z (B, N)``, ``r (B, K_S, N)``."""
    z = np.asarray(z)
    r = np.asarray(r)
    if z.shape[-1] != r.shape[-1] or z.shape[-1] != np.shape(v)[-1]:
        raise DimensionMismatch("z, r and v must share the vector length N")
    s = scaled_sample_covariance(r)
    if spec.kind == RAW:
        return embed_complex(whiten(s, z))
    pair = stat_pair(z, s, v)
    return spec.from_pairs(pair.t_tilde, pair.beta)


def extract_feature(obs, v, spec):
    return extract_features(obs.z[None], obs.r[None], v, spec)[0]


def statistic(name, z, r, v):
    """Named scalar detector statistic for a batch of observations."""
    s = scaled_sample_covariance(r)
    return {"kelly": kelly_stat, "amf": amf_stat, "ace": ace_stat}[name](z, s, v)
