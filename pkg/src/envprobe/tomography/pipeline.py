"""Blind identification of an equivalent Hamiltonian from ρ_SA(t) alone.

The only access to the hidden triple is a sampler returning ρ_SA at
requested times. The split ``A = A1 ⊗ A2`` is found at ``t0 = 0``, samples
are pulled back onto ``S ⊗ A1 ⊗ A2``, the Fourier components come from a
matrix pencil, and the commutator constraints give the coefficient vector
of the effective ancilla Hamiltonian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import numerics
from ..hilbert import DensityMatrix, PureState, SubsystemLayout, Triple
from ..scenarios import rng_stream
from ..steering import Split, find_split
from .basis import HermitianBasis
from .linsys import (
    ReconstructionResult,
    SolveResult,
    assemble_system,
    canonical_solution,
    operator_coefficients,
    reconstruct,
    solve_system,
)
from .spectral import SpectralData, SpectralError, extract_spectrum_pencil, frequency_range, sample_matrices

__all__ = [
    "TomographyConfig",
    "IdentifyResult",
    "identify",
    "identify_from_sampler",
    "reconstructed_state",
    "effective_operator",
    "true_coefficients",
]


@dataclass
class TomographyConfig:
    samples: int | None = None
    dt: float | None = None
    rank_tol: float = 1e-8
    merge_tol: float = 1e-7
    solve_tol: float = 1e-6
    null_tol: float = 1e-8
    fit_tol: float = 1e-8
    prescan_dt: float = 0.1
    closure_samples: int = 50
    closure_tol: float = 1e-7
    rng_seed: int = 0

    @classmethod
    def from_dict(cls, obj: dict) -> "TomographyConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown tomography keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class IdentifyResult:
    split: Split
    basis: HermitianBasis
    spectral: SpectralData
    solve: SolveResult
    reconstruction: ReconstructionResult
    triple: Triple
    dt: float
    times: np.ndarray
    samples: np.ndarray = field(repr=False)
    closure_residual: float = 0.0


def _lift(split: Split) -> np.ndarray:
    return np.kron(np.eye(split.d_S), split.isometry)


def reconstructed_state(split: Split, d_A: int) -> PureState:
    """``Σ |s>_S |e>_E W|s, e>_A / √(d_S r)``: the ME state on the identified triple."""
    d_S, r = split.d_S, split.r
    psi = split.isometry.reshape(d_A, d_S, r).transpose(1, 2, 0) / math.sqrt(d_S * r)
    lay = SubsystemLayout([("S", d_S), ("E", r), ("A", d_A)])
    return PureState.normalized(lay, psi.reshape(-1))


def _pull(raw, lift):
    return np.einsum("ij,tjk,kl->til", lift.conj().T, raw, lift)


def _pencil_run(sampler, lift, n_samp, dt, d_S, cfg):
    times = dt * np.arange(n_samp)
    raw = sampler(times)
    spec = extract_spectrum_pencil(_pull(raw, lift), dt, cfg.rank_tol, cfg.merge_tol, 0.0, d_S, fit_tol=cfg.fit_tol)
    return spec, times, raw


def _choose_dt(sampler, lift, n_samp, cfg):
    dt0 = cfg.prescan_dt
    for _ in range(20):
        pulled = _pull(sampler(dt0 * np.arange(n_samp)), lift)
        th = frequency_range(pulled, dt0)
        if th * dt0 <= 0.8 * math.pi:
            return (0.9 * math.pi / th) if th > cfg.merge_tol else dt0
        dt0 /= 2
    raise SpectralError("pre-scan could not find an alias-free step")


def identify_from_sampler(sampler, d_S: int, d_A: int, cfg: TomographyConfig | None = None) -> IdentifyResult:
    """Run the blind pipeline; ``sampler(times)`` returns a ``(T, d_S d_A, d_S d_A)`` stack of ρ_SA."""
    cfg = cfg or TomographyConfig()
    lay = SubsystemLayout([("S", d_S), ("A", d_A)])
    rho0 = DensityMatrix(lay, sampler(np.zeros(1))[0])
    split = find_split(rho0)
    lift = _lift(split)
    n = d_S * split.r
    n_samp = cfg.samples or 4 * n * n + 1
    dt = cfg.dt or _choose_dt(sampler, lift, n_samp, cfg)
    spec, times, raw = _pencil_run(sampler, lift, n_samp, dt, d_S, cfg)

    rng = rng_stream(cfg.rng_seed, "closure_times")
    fresh = np.sort(rng.uniform(0.0, 2 * times[-1] + dt, cfg.closure_samples))
    check = sampler(fresh)
    closure = max(numerics.frob(lift @ spec.evaluate(t) @ lift.conj().T - m) for t, m in zip(fresh, check))
    if closure > cfg.closure_tol:
        raise SpectralError(f"Fourier model misses fresh samples by {closure:.2e}")

    basis = HermitianBasis(d_S, split.r)
    a, b = assemble_system(spec, basis)
    sol = solve_system(a, b, cfg.null_tol, cfg.solve_tol)
    h = canonical_solution(sol.h_particular)
    h_tilde = reconstruct(h, basis, split)
    recon = ReconstructionResult(h, sol.null_basis, h_tilde, sol.residual, closure_residual=closure)
    triple = Triple(split.r, reconstructed_state(split, d_A), h_tilde)
    return IdentifyResult(split, basis, spec, sol, recon, triple, dt, times, raw, closure)


def identify(triple: Triple, cfg: TomographyConfig | None = None) -> IdentifyResult:
    """Blind pipeline fed by exact ρ_SA(t) samples of ``triple``."""
    return identify_from_sampler(lambda ts: sample_matrices(triple, ts), triple.d_S, triple.d_A, cfg)


def effective_operator(triple: Triple, split: Split, tol: float = 1e-8) -> np.ndarray:
    """White-box ``K`` on ``A1 ⊗ A2`` with ``H_SE (I ⊗ Ψ) = (I ⊗ K) Ψ`` on the ME support.

    With ``Φ|c> = √(d_S r)(I ⊗ <W c|)Ψ`` the map from ``A1 ⊗ A2`` into
    ``S ⊗ E``, ``K = (Φ† H Φ)^T``. Raises ``ValueError`` when ``H`` moves
    the range of Φ, because K is then not well defined (stationarize first).
    """
    d_S, r = split.d_S, split.r
    psi = triple.psi_tensor().reshape(d_S * triple.d_E, triple.d_A)
    phi = math.sqrt(d_S * r) * psi @ split.isometry.conj()
    gram_dev = numerics.frob(phi.conj().T @ phi - np.eye(d_S * r))
    if gram_dev > tol:
        raise ValueError(f"split does not match the state (isometry defect {gram_dev:.2e})")
    h = triple.h_SE.matrix
    hp = h @ phi
    leak = numerics.frob(hp - phi @ (phi.conj().T @ hp))
    if leak > tol * (1.0 + numerics.frob(h)):
        raise ValueError(f"H_SE moves the entangled support (leak {leak:.2e}); stationarize first")
    return (phi.conj().T @ hp).T


def true_coefficients(triple: Triple, split: Split, basis: HermitianBasis, tol: float = 1e-8) -> np.ndarray:
    """Coefficient vector of the white-box effective Hamiltonian in ``basis``."""
    return operator_coefficients(effective_operator(triple, split, tol), basis)

