"""Dense complex linear algebra: Hermitian factorizations, whitening, quadratic forms.

All functions accept a single matrix ``(n, n)`` or a stack ``(..., n, n)``.
Inputs are symmetrized before factorization to absorb roundoff.
"""
import numpy as np

from .exceptions import DimensionMismatch, NotPositiveDefinite

HERMITIAN_RTOL = 1e-10


def hermitian_part(a):
    a = np.asarray(a)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def check_hermitian(a, rtol=HERMITIAN_RTOL):
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    skew = np.linalg.norm(a - np.conj(np.swapaxes(a, -1, -2)), axis=(-2, -1))
    scale = np.linalg.norm(a, axis=(-2, -1))
    if np.any(skew > rtol * np.maximum(scale, np.finfo(float).tiny)):
        raise NotPositiveDefinite("matrix is not Hermitian within tolerance")


def cholesky(a):
    """Lower-triangular ``L`` with ``L @ L^H == a``; raises NotPositiveDefinite."""
    check_hermitian(a)
    try:
        return np.linalg.cholesky(hermitian_part(a))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def inv_sqrt_hermitian(a):
    """Hermitian inverse square root ``a^{-1/2}`` from the eigendecomposition.

    This is the unique Hermitian positive definite root, not a Cholesky
    whitener; the two differ by a unitary factor, which changes feature
    geometry when every sample is whitened by its own matrix.
    """
    check_hermitian(a)
    w, u = np.linalg.eigh(hermitian_part(a))
    if np.any(w <= 0):
        raise NotPositiveDefinite("non-positive eigenvalue")
    return (u * w[..., None, :] ** -0.5) @ np.conj(np.swapaxes(u, -1, -2))


def whiten(a, z):
    """``a^{-1/2} z`` for a stack of matrices ``(..., n, n)`` and vectors ``(..., n)``."""
    return np.einsum("...ij,...j->...i", inv_sqrt_hermitian(a), z)


def solve_quadratic_form(a, m, b):
    """``a^H m^{-1} b`` through a Cholesky solve (never an explicit inverse)."""
    a = np.asarray(a)
    b = np.asarray(b)
    m = np.asarray(m)
    n = m.shape[-1]
    if a.shape[-1] != n or b.shape[-1] != n:
        raise DimensionMismatch(
            f"vectors of length {a.shape[-1]}, {b.shape[-1]} vs matrix {m.shape}"
        )
    chol = cholesky(m)
    wa = np.linalg.solve(chol, a[..., None])[..., 0]
    wb = np.linalg.solve(chol, b[..., None])[..., 0]
    return np.sum(np.conj(wa) * wb, axis=-1)


def primitive_forms(z, s, v):
    """The triple ``(z^H S^-1 z, z^H S^-1 v, v^H S^-1 v)`` from one factorization.

    ``z`` and ``s`` may be stacked along leading axes; ``v`` broadcasts.
    The diagonal forms are returned as real arrays.
    """
    z = np.asarray(z)
    s = np.asarray(s)
    v = np.broadcast_to(np.asarray(v), z.shape)
    if z.shape[-1] != s.shape[-1]:
        raise DimensionMismatch(f"vector length {z.shape[-1]} vs matrix {s.shape}")
    chol = cholesky(s)
    w = np.linalg.solve(chol, np.stack([z, v], axis=-1))
    wz, wv = w[..., 0], w[..., 1]
    zz = np.sum(np.abs(wz) ** 2, axis=-1)
    vv = np.sum(np.abs(wv) ** 2, axis=-1)
    zv = np.sum(np.conj(wz) * wv, axis=-1)
    return zz, zv, vv
