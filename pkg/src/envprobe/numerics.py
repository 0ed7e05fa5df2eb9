"""Dense complex matrix kernel.

Everything that touches raw LAPACK lives here. Matrices are plain
``numpy.ndarray`` objects of dtype ``complex128``; the helpers below add the
shape/finiteness checks, deterministic phase conventions and tolerance rules
the rest of the package relies on.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "DEFAULT_TOL",
    "settings",
    "limits",
    "DimensionError",
    "NotHermitianError",
    "EigResult",
    "as_cmatrix",
    "check_hermitian",
    "kron",
    "herm_eig",
    "unitary_evolution",
    "svd",
    "nullspace",
    "lstsq",
    "fix_phases",
    "frob",
    "commutator",
]

DEFAULT_TOL = 1e-10


@dataclass
class Settings:
    """Global size limits.

    ``max_dim`` caps the total Hilbert-space dimension of a problem instance
    (a triple on S⊗E⊗A). ``max_kernel_dim`` caps the row/column count of any
    dense matrix produced by :func:`kron`, which also serves intermediate
    objects such as an ancilla padded by an extra qubit.
    """

    max_dim: int = 64
    max_kernel_dim: int = 4096


settings = Settings()


@contextlib.contextmanager
def limits(max_dim: int | None = None, max_kernel_dim: int | None = None):
    """Temporarily override the size limits."""
    old = (settings.max_dim, settings.max_kernel_dim)
    if max_dim is not None:
        settings.max_dim = int(max_dim)
    if max_kernel_dim is not None:
        settings.max_kernel_dim = int(max_kernel_dim)
    try:
        yield settings
    finally:
        settings.max_dim, settings.max_kernel_dim = old


class DimensionError(ValueError):
    """Raised for shape mismatches or instances beyond the configured caps."""


class NotHermitianError(ValueError):
    pass


class EigResult(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_cmatrix(a, ndim: int = 2) -> np.ndarray:
    """Convert to a finite complex128 array with ``ndim`` dimensions."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d array, got shape {arr.shape}")
    if arr.size == 0 and ndim == 2 and 0 in arr.shape and arr.shape != (0, 0):
        return arr
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def frob(a) -> float:
    return float(np.linalg.norm(a))


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def check_hermitian(a, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Validate Hermiticity within ``tol * ||a||_F`` and return the symmetrized matrix."""
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix is not square: {a.shape}")
    scale = frob(a)
    if frob(a - a.conj().T) > tol * max(scale, np.finfo(float).tiny):
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    return 0.5 * (a + a.conj().T)


def kron(a, b, max_dim: int | None = None) -> np.ndarray:
    """Kronecker product, entry ``(i*rows_b + k, j*cols_b + l) = a[i, j] * b[k, l]``."""
    a = np.atleast_2d(as_cmatrix(a, np.ndim(a)) if np.ndim(a) else np.asarray(a, complex))
    b = np.atleast_2d(as_cmatrix(b, np.ndim(b)) if np.ndim(b) else np.asarray(b, complex))
    cap = settings.max_kernel_dim if max_dim is None else max_dim
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > cap:
        raise DimensionError(f"kron result {rows}x{cols} exceeds the configured cap {cap}")
    return np.kron(a, b)


def fix_phases(vecs: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Rotate each column so its first non-negligible component is real positive."""
    vecs = np.array(vecs, dtype=np.complex128)
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        mags = np.abs(col)
        if mags.size == 0:
            continue
        idx = int(np.argmax(mags > eps * max(mags.max(), eps)))
        if mags[idx] > 0:
            vecs[:, j] = col * (abs(col[idx]) / col[idx])
    return vecs


def herm_eig(a, tol: float = DEFAULT_TOL) -> EigResult:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues are returned ascending. Each eigenvector is phase-fixed so its
    first non-negligible component is real and positive, which makes
    serialized outputs reproducible. The zero matrix returns the identity as
    its eigenvector matrix.
    """
    h = check_hermitian(a, tol)
    n = h.shape[0]
    if not np.any(h):
        return EigResult(np.zeros(n), np.eye(n, dtype=np.complex128))
    w, v = np.linalg.eigh(h)
    return EigResult(w, fix_phases(v))


def unitary_evolution(h, t: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``exp(-i h t)`` computed as ``V exp(-i Λ t) V†``."""
    w, v = herm_eig(h, tol)
    return (v * np.exp(-1j * w * float(t))) @ v.conj().T


def svd(a):
    """Thin SVD returning ``(U, s, V)`` with ``A = U diag(s) V†`` and ``s`` descending."""
    a = as_cmatrix(a)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return u, s, vh.conj().T


def nullspace(a, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of ``{x : ||Ax|| <= tol ||A||_F ||x||}``.

    Returns a ``(cols, 0)`` array when the null space is trivial.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = np.asarray(a)
    if a.ndim != 2:
        raise DimensionError("nullspace needs a matrix")
    cols = a.shape[1]
    dtype = np.float64 if np.isrealobj(a) else np.complex128
    if a.shape[0] == 0 or not np.any(a):
        return np.eye(cols, dtype=dtype)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    cut = tol * float(np.linalg.norm(a))
    rank = int(np.sum(s > cut))
    return vh[rank:].conj().T.copy()


def lstsq(a, b, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Minimum-norm least-squares solution, truncating singular values below ``tol * s_max``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"incompatible shapes {a.shape} and {b.shape}")
    vec = b.ndim == 1
    if vec:
        b = b[:, None]
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        x = np.zeros((a.shape[1], b.shape[1]), dtype=np.result_type(a, b))
    else:
        keep = s > tol * s[0]
        x = vh[keep].conj().T @ ((u[:, keep].conj().T @ b) / s[keep][:, None])
    return x[:, 0] if vec else x
