"""Dense complex linear-algebra kernels.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.
Vectorization is column-major throughout so that
``vec(A @ B @ C) == kron(C.T, A) @ vec(B)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Upper bound on the number of entries a Kronecker product may allocate.
MAX_KRON_ENTRIES = 2**28


class DimensionOverflowError(ValueError):
    """Raised when a product would exceed :data:`MAX_KRON_ENTRIES`."""


def as_complex_matrix(a, name: str = "a") -> np.ndarray:
    """Validate ``a`` and return it as a finite 2-D complex array."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be at most 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def kron(a, b, max_entries: int = MAX_KRON_ENTRIES) -> np.ndarray:
    """Kronecker product with a guard against runaway allocations."""
    a = as_complex_matrix(a, "a")
    b = as_complex_matrix(b, "b")
    n = a.shape[0] * b.shape[0] * a.shape[1] * b.shape[1]
    if n > max_entries:
        raise DimensionOverflowError(
            f"kron of {a.shape} and {b.shape} needs {n} entries (limit {max_entries})"
        )
    return np.kron(a, b)


def vectorize(a) -> np.ndarray:
    """Stack the columns of ``a`` into one column vector."""
    a = np.asarray(a)
    if a.ndim < 2:
        a = a.reshape(-1, 1) if a.ndim == 1 else a.reshape(1, 1)
    return a.reshape(-1, 1, order="F")


def unvectorize(v, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v).reshape(rows, cols, order="F")


@dataclass(frozen=True)
class LstsqInfo:
    rank: int
    rank_deficient: bool
    singular_values: np.ndarray


def least_squares(a, y, return_info: bool = False):
    """Minimum-norm least-squares solution ``pinv(a) @ y``.

    Singular values below ``max(rows, cols) * eps * s_max`` are discarded, so
    rank-deficient systems are handled rather than rejected. ``y`` may hold
    several right-hand sides as columns.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] < 1:
        raise ValueError("a must be a 2-D matrix with at least one row")
    y = np.asarray(y, dtype=np.complex128)
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, None]
    if y.shape[0] != a.shape[0]:
        raise ValueError(f"y has {y.shape[0]} rows, expected {a.shape[0]}")
    if a.shape[1] == 0:
        x = np.zeros((0, y.shape[1]), dtype=np.complex128)
        info = LstsqInfo(0, False, np.zeros(0))
    else:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
        cutoff = max(a.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
        keep = s > cutoff
        rank = int(keep.sum())
        coeff = (u[:, keep].conj().T @ y) / s[keep, None]
        x = vh[keep].conj().T @ coeff
        info = LstsqInfo(rank, rank < min(a.shape), s)
    if squeeze:
        x = x[:, 0]
    return (x, info) if return_info else x


def spectral_norm(a) -> float:
    """Largest singular value of ``a`` (full SVD, exact to rounding)."""
    a = np.asarray(a, dtype=np.complex128)
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[0])


def spectral_norm_power(matvec, rmatvec, n: int, rng=None, tol: float = 1e-9,
                        max_iter: int = 1000) -> float:
    """Largest singular value of an implicit operator by power iteration.

    ``matvec`` applies the operator and ``rmatvec`` its adjoint to vectors of
    length ``n``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    sigma2 = 0.0
    for _ in range(max_iter):
        z = rmatvec(matvec(x))
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0
        new = float(np.real(np.vdot(x, z)))
        x = z / nz
        if abs(new - sigma2) <= tol * max(new, 1e-300):
            sigma2 = new
            break
        sigma2 = new
    return float(np.sqrt(max(sigma2, 0.0)))


def eig_hermitian(a, tol: float = 1e-10):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending."""
    a = as_complex_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.conj().T).max() > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]
