"""The linear system for the Hamiltonian coefficients ``h_j``.

With ``H = Σ_j h_j A_j`` and the Fourier components expanded in the full
basis as ``ρ_0 = Σ u_k G_k``, ``ρ_α + ρ_α† = Σ v_k G_k`` and
``i(ρ_α - ρ_α†) = Σ w_k G_k``, the constraints ``[H, ρ_0] = 0`` and
``[H, ρ_α] = -θ_α ρ_α`` read, for every ``l``,

    Σ_j (Σ_k ε_jkl u_k) h_j = 0
    Σ_j (Σ_k ε_jkl v_k) h_j = -θ_α w_l
    Σ_j (Σ_k ε_jkl w_k) h_j = +θ_α v_l

where ``[iG_j, iG_k] = Σ_l ε_jkl iG_l``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import numerics
from ..hilbert import HermitianOperator, SubsystemLayout
from .basis import HermitianBasis
from .spectral import SpectralData

__all__ = [
    "SolveError",
    "SolveResult",
    "ReconstructionResult",
    "assemble_system",
    "solve_system",
    "canonical_solution",
    "reconstruct",
    "operator_coefficients",
    "affine_distance",
]


class SolveError(RuntimeError):
    pass


@dataclass
class SolveResult:
    h_particular: np.ndarray
    null_basis: np.ndarray  # columns
    residual: float
    singular_values: np.ndarray = field(repr=False, default=None)

    @property
    def null_dim(self) -> int:
        return int(self.null_basis.shape[1])


@dataclass
class ReconstructionResult:
    h_particular: np.ndarray
    null_basis: np.ndarray
    H_tilde_SE: HermitianOperator
    system_residual: float
    equivalence_deviation: float | None = None
    closure_residual: float | None = None

    @property
    def null_dim(self) -> int:
        return int(self.null_basis.shape[1])

    def to_dict(self) -> dict:
        return {
            "system_residual": self.system_residual,
            "null_dim": self.null_dim,
            "equivalence_deviation": self.equivalence_deviation,
            "closure_residual": self.closure_residual,
            "h_particular": [float(x) for x in self.h_particular],
            "null_basis": [[float(x) for x in col] for col in self.null_basis.T],
            "H_tilde_SE": self.H_tilde_SE.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj) -> "ReconstructionResult":
        h = np.asarray(obj["h_particular"], dtype=float)
        nb = np.asarray(obj["null_basis"], dtype=float).reshape(-1, h.size).T
        return cls(h, nb, HermitianOperator.from_dict(obj["H_tilde_SE"]), float(obj["system_residual"]),
                   obj.get("equivalence_deviation"), obj.get("closure_residual"))


def _expand_components(spec: SpectralData, basis: HermitianBasis):
    u = basis.coefficients(spec.rho_0)
    vs, ws = [], []
    for ra in spec.rho_alpha:
        vs.append(basis.coefficients(ra + ra.conj().T))
        ws.append(basis.coefficients(1j * (ra - ra.conj().T)))
    return u, vs, ws


def assemble_system(spec: SpectralData, basis: HermitianBasis, theta_sign: float = 1.0):
    """Stack the constraint rows into ``(A, b)``.

    ``theta_sign = -1`` builds the opposite frequency convention; it exists
    so tests can show that convention is inconsistent with the dynamics.
    """
    if spec.d_S != basis.d_S or spec.rho_0.shape[0] != basis.dim:
        raise numerics.DimensionError(
            f"spectral data on d_S={spec.d_S}, dim={spec.rho_0.shape[0]} does not match "
            f"basis d_S={basis.d_S}, dim={basis.dim}"
        )
    u, vs, ws = _expand_components(spec, basis)
    blocks = [basis.contract(u)]
    rhs = [np.zeros(basis.n_full)]
    for th, v, w in zip(spec.theta, vs, ws):
        th = theta_sign * th
        blocks.append(basis.contract(v))
        rhs.append(-th * w)
        blocks.append(basis.contract(w))
        rhs.append(th * v)
    return np.vstack(blocks), np.concatenate(rhs)


def solve_system(a, b, tol: float = 1e-8, solve_tol: float = 1e-6) -> SolveResult:
    """Minimum-norm solution plus an orthonormal null-space basis.

    Singular values below ``tol * s_max`` count as zero. Raises
    :class:`SolveError` when the relative residual ``|Ah - b| / (1 + |b|)``
    exceeds ``solve_tol``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    null = vh[rank:].T.copy()
    h = numerics.lstsq(a, b, tol=tol) if rank else np.zeros(a.shape[1])
    resid = float(np.linalg.norm(a @ h - b) / (1.0 + np.linalg.norm(b)))
    if resid > solve_tol:
        raise SolveError(f"system residual {resid:.3e} exceeds {solve_tol:.1e}; spectral data inconsistent")
    return SolveResult(h, null, resid, s)


def canonical_solution(h: np.ndarray) -> np.ndarray:
    """Drop the identity direction (always element 0) from a coefficient vector."""
    h = np.array(h, dtype=float)
    h[0] = 0.0
    return h


def reconstruct(h, basis: HermitianBasis, split=None) -> HermitianOperator:
    """``H̃_SE = K^T`` where ``I_S ⊗ K = Σ_j h_j A_j`` and K acts on ``A1 ⊗ A2``.

    The transpose is taken in the computational basis of ``A1 ⊗ A2`` as
    fixed by the split; A1 becomes S and A2 becomes the effective environment.
    """
    h = np.asarray(h, dtype=float)
    if h.shape != (basis.n_A,):
        raise numerics.DimensionError(f"expected {basis.n_A} coefficients, got {h.shape}")
    if split is not None and (split.d_S != basis.d_S or split.r != basis.d_E_tilde):
        raise numerics.DimensionError("split dimensions do not match the basis")
    k = np.tensordot(h, basis.ops_A, axes=(0, 0)) / np.sqrt(basis.d_S)
    lay = SubsystemLayout([("S", basis.d_S), ("E", basis.d_E_tilde)])
    return HermitianOperator(lay, k.T)


def operator_coefficients(k_op, basis: HermitianBasis) -> np.ndarray:
    """Coefficients ``h_j`` of ``I_S ⊗ K`` for an operator K on the ancilla."""
    k_op = np.asarray(k_op, dtype=complex)
    return np.sqrt(basis.d_S) * np.einsum("jab,ba->j", basis.ops_A, k_op).real


def affine_distance(h, solve: SolveResult) -> float:
    """Distance from ``h`` to the affine set ``h_particular + span(null_basis)``."""
    d = np.asarray(h, dtype=float) - solve.h_particular
    nb = solve.null_basis
    if nb.size:
        d = d - nb @ (nb.T @ d)
    return float(np.linalg.norm(d))
