"""Orthonormal Hermitian operator bases and their structure constants.

The ancilla space is ``A = A1 ⊗ A2`` with ``d_A = d_S * d_E_tilde``. The full
basis of Hermitian operators on ``S ⊗ A`` is ``G_{p,q} = C_p ⊗ B_q`` where
``{C_p}`` and ``{B_q}`` are normalized generalized Gell-Mann bases on S and A
(identity first). The elements with ``p = 0`` are ``A_j = I_S/√d_S ⊗ B_j``,
the ones a Hamiltonian acting on A alone can use.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..hilbert import HermitianOperator, SubsystemLayout

__all__ = ["gell_mann", "HermitianBasis", "build_basis"]


def gell_mann(n: int) -> np.ndarray:
    """Normalized generalized Gell-Mann matrices, ``Tr(B_j B_k) = δ_jk``.

    Order: ``I/√n``, then symmetric ``(|j><k| + |k><j|)/√2`` for ``j < k``,
    antisymmetric ``(-i|j><k| + i|k><j|)/√2`` for ``j < k``, then the
    diagonal ones ``diag(1, .., 1, -l, 0, ..)/√(l(l+1))``.
    """
    mats = [np.eye(n, dtype=complex) / np.sqrt(n)]
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    for j, k in pairs:
        m = np.zeros((n, n), dtype=complex)
        m[j, k] = m[k, j] = 1 / np.sqrt(2)
        mats.append(m)
    for j, k in pairs:
        m = np.zeros((n, n), dtype=complex)
        m[j, k] = -1j / np.sqrt(2)
        m[k, j] = 1j / np.sqrt(2)
        mats.append(m)
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1.0
        d[l] = -l
        mats.append(np.diag(d / np.sqrt(l * (l + 1))).astype(complex))
    return np.stack(mats)


class HermitianBasis:
    """Basis data for the reconstruction system.

    Attributes
    ----------
    d_S, d_E_tilde : int
        Dimensions of S and of the effective environment (A2).
    ops_A : ndarray, shape (n_A, d_A, d_A)
        The ancilla basis ``B_j``.
    full : ndarray, shape (n_full, d_S d_A, d_S d_A)
        All ``G_{p,q}``, flattened with index ``p * n_A + q``.
    """

    def __init__(self, d_S: int, d_E_tilde: int):
        if d_S < 1 or d_E_tilde < 1:
            raise ValueError("dimensions must be positive")
        self.d_S = int(d_S)
        self.d_E_tilde = int(d_E_tilde)
        self.d_A = self.d_S * self.d_E_tilde
        self.ops_S = gell_mann(self.d_S)
        self.ops_A = gell_mann(self.d_A)
        self.n_A = self.ops_A.shape[0]
        self.full = np.einsum("pij,qkl->pqikjl", self.ops_S, self.ops_A).reshape(
            self.d_S**2 * self.n_A, self.d_S * self.d_A, self.d_S * self.d_A
        )
        self.n_full = self.full.shape[0]
        self._dual = self.full.transpose(0, 2, 1).reshape(self.n_full, -1)

    @property
    def dim(self) -> int:
        return self.d_S * self.d_A

    @property
    def ham_elements(self) -> np.ndarray:
        """The ``A_j`` as dense arrays on S ⊗ A."""
        return self.full[: self.n_A]

    @cached_property
    def elements(self) -> list:
        lay = SubsystemLayout([("S", self.d_S), ("A", self.d_A)])
        return [HermitianOperator(lay, m, ("A",)) for m in self.ham_elements]

    def coefficients(self, x) -> np.ndarray:
        """Real coefficients ``Tr(G_k X)`` of a Hermitian X."""
        x = np.asarray(x, dtype=complex).reshape(-1)
        return (self._dual @ x).real

    def expand(self, coeffs) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, dtype=float), self.full, axes=(0, 0))

    @cached_property
    def _ancilla_constants(self) -> np.ndarray:
        """``f[j, q, q'] = i Tr([B_j, B_q] B_q')`` on the ancilla alone."""
        b = self.ops_A
        prod = np.einsum("jab,qbc->jqac", b, b)
        comm = prod - prod.transpose(1, 0, 2, 3)
        f = 1j * np.einsum("jqac,rca->jqr", comm, b)
        return f.real

    @cached_property
    def structure_constants(self) -> sp.csr_matrix:
        """Sparse ``ε_jkl`` for ``j < n_A`` and all ``k, l``, with ``[iG_j, iG_k] = Σ_l ε_jkl iG_l``.

        Stored as an ``(n_A * n_full, n_full)`` matrix whose entry
        ``(j * n_full + l, k)`` is ``ε_jkl``, so ``(E @ x).reshape(n_A, n_full)``
        contracts the middle index. Since ``A_j`` is the identity on S,
        ``ε_{j,(p,q),(p',q')} = δ_pp' f[j, q, q'] / √d_S``.
        """
        f = self._ancilla_constants / np.sqrt(self.d_S)
        j, q, qq = np.nonzero(np.abs(f) > 1e-14)
        vals = f[j, q, qq]
        n_p = self.d_S**2
        p = np.repeat(np.arange(n_p), j.size)
        jj, qv, qqv, vv = (np.tile(a, n_p) for a in (j, q, qq, vals))
        rows = jj * self.n_full + p * self.n_A + qqv
        cols = p * self.n_A + qv
        shape = (self.n_A * self.n_full, self.n_full)
        return sp.csr_matrix((vv, (rows, cols)), shape=shape)

    def epsilon(self, j: int, k: int, l: int) -> float:
        return float(self.structure_constants[j * self.n_full + l, k])

    def contract(self, x) -> np.ndarray:
        """``M[l, j] = Σ_k ε_jkl x_k`` as a dense ``(n_full, n_A)`` array."""
        m = self.structure_constants @ np.asarray(x, dtype=float)
        return m.reshape(self.n_A, self.n_full).T


def build_basis(d_S: int, d_E_tilde: int) -> HermitianBasis:
    return HermitianBasis(d_S, d_E_tilde)
