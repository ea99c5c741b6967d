"""Counter-based random streams.

Every Monte Carlo chunk draws from its own generator, derived from the
master seed and an integer key path, so results never depend on how the
chunks are scheduled across threads.
"""
import numpy as np

# stream identifiers used as the first element of a key path
TRAINING = 0
TEST_H0 = 1
TEST_H1 = 2
CALIBRATION = 3
ORACLE = 4


def stream(seed, *key):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(total, chunk):
    """Sizes of consecutive fixed-width chunks covering ``total`` trials."""
    full, rest = divmod(int(total), int(chunk))
    return [chunk] * full + ([rest] if rest else [])


def complex_normal(rng, shape):
    """Standard circular complex normal samples, ``E|g|^2 = 1``."""
    g = rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,))
    return (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)
