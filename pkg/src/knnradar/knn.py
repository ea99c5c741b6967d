"""Training sets and the k-nearest-neighbors decision rule.

Neighbors are found by exact brute force on squared Euclidean distances.
Ties are broken by (distance, class 0 before class 1, ascending index):
class-0 points are stored before class-1 points, so this is plain
lexicographic order on (distance, storage position).
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .detectors import extract_features
from .exceptions import ConfigError, DimensionMismatch
from .rng import TRAINING, chunk_sizes, stream
from .scenario import H0, H1, db_to_linear, draw_observations

QUERY_CHUNK = 2048


@dataclass(frozen=True)
class KnnRule:
    k: int
    threshold: float

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 0.0 <= self.threshold < 1.0:
            raise ConfigError(f"threshold must lie in [0, 1), got {self.threshold}")

    @property
    def m(self):
        """Greatest integer M with ``threshold >= M / k``, capped at ``k - 1``."""
        m = math.floor(self.k * self.threshold)
        # guard against k*T landing a hair below an integer
        if (m + 1) / self.k <= self.threshold:
            m += 1
        return min(max(m, 0), self.k - 1)


@dataclass(frozen=True)
class TrainingSet:
    features0: np.ndarray  # (N_T, dim), label 0
    features1: np.ndarray  # (N_T, dim), label 1
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        f0, f1 = np.asarray(self.features0), np.asarray(self.features1)
        if f0.ndim != 2 or f1.ndim != 2:
            raise DimensionMismatch("training features must be 2-D arrays")
        if len(f0) != len(f1) or len(f0) < 1:
            raise DimensionMismatch("both classes need the same positive number of samples")
        if f0.shape[1] != f1.shape[1]:
            raise DimensionMismatch("feature lengths differ between classes")

    @property
    def n_t(self):
        return len(self.features0)

    @property
    def dim(self):
        return self.features0.shape[1]

    @property
    def stacked(self):
        return np.vstack([self.features0, self.features1])


def build_training_set(cfg, spec, n_t, seed=None, chunk=QUERY_CHUNK):
    """``n_t`` H0 and ``n_t`` H1 feature vectors at the design SNR ``cfg.snr_db``.

    H1 training echoes use the nominal steering (no mismatch).
    """
    seed = cfg.seed if seed is None else seed
    design = cfg.replace(delta_nu=0.0)
    v = design.nominal_steering
    feats = []
    for label, hyp in enumerate((H0, H1)):
        parts = []
        for i, size in enumerate(chunk_sizes(n_t, chunk)):
            z, r = draw_observations(hyp, design, stream(seed, TRAINING, label, i), size)
            parts.append(extract_features(z, r, v, spec))
        feats.append(np.concatenate(parts))
    meta = {
        "spec": spec,
        "snr_db": cfg.snr_db,
        "snr": float(db_to_linear(cfg.snr_db)),
        "scenario": design,
        "seed": seed,
    }
    return TrainingSet(features0=feats[0], features1=feats[1], meta=meta)


def count_from_distances(d2, n0, k):
    """Label-1 count among the k nearest, given squared distances ``d2 (..., n0 + n1)``.

    Columns ``[:n0]`` carry label 0. Exact ties at the k-th distance are
    resolved by storage order, i.e. class 0 first, then lower index.
    """
    d2 = np.asarray(d2)
    kth = np.partition(d2, k - 1, axis=-1)[..., k - 1 : k]
    less = d2 < kth
    equal = d2 == kth
    n_less = less.sum(axis=-1)
    ones_less = less[..., n0:].sum(axis=-1)
    need = k - n_less
    eq0 = equal[..., :n0].sum(axis=-1)
    return ones_less + np.maximum(need - eq0, 0)


def neighbor_label_counts(x, ts, k):
    """Batched label-1 counts for query features ``x (B, dim)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != ts.dim:
        raise DimensionMismatch(f"query dim {x.shape[1]} vs training dim {ts.dim}")
    if not 1 <= k <= 2 * ts.n_t:
        raise ConfigError(f"k must lie in [1, {2 * ts.n_t}]")
    train = ts.stacked
    out = np.empty(len(x), dtype=np.int64)
    for start in range(0, len(x), QUERY_CHUNK):
        d2 = cdist(x[start : start + QUERY_CHUNK], train, "sqeuclidean")
        out[start : start + QUERY_CHUNK] = count_from_distances(d2, ts.n_t, k)
    return out


def neighbor_label_count(x, ts, k):
    return int(neighbor_label_counts(np.asarray(x)[None], ts, k)[0])


def decide(x, ts, rule):
    """Return ``(hypothesis, l_bar)`` for a single feature vector."""
    count = neighbor_label_count(x, ts, rule.k)
    return (H1 if count > rule.m else H0), count / rule.k


def decide_batch(x, ts, rule):
    """Boolean H1 decisions for a batch of feature vectors."""
    return neighbor_label_counts(x, ts, rule.k) > rule.m
