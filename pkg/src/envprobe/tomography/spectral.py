"""Fourier structure of ρ_SA(t).

For a time-independent Hamiltonian the reduced state is a finite sum

    ρ(t) = ρ_0 + Σ_α (ρ_α e^{iθ_α t} + ρ_α† e^{-iθ_α t}),   θ_α > 0,

with θ_α the Bohr frequencies that carry nonzero weight. The blind route
recovers the θ_α from uniformly spaced samples with a multichannel matrix
pencil and then fits the matrix coefficients by linear least squares.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import jsonio, numerics
from ..hilbert import DensityMatrix, SubsystemLayout, Triple

__all__ = [
    "SpectralData",
    "SpectralError",
    "sample_rho_SA",
    "sample_matrices",
    "extract_spectrum_pencil",
    "extract_spectrum_exact",
    "derivative_spectrum_probe",
    "cluster_values",
    "frequency_range",
]


class SpectralError(RuntimeError):
    pass


@dataclass
class SpectralData:
    theta: np.ndarray
    rho_0: np.ndarray
    rho_alpha: list
    d_S: int
    d_A: int
    fit_residual: float = 0.0
    rank: int = field(default=0)

    @property
    def L(self) -> int:
        return int(len(self.theta))

    def evaluate(self, t: float) -> np.ndarray:
        out = np.array(self.rho_0, dtype=complex)
        for th, ra in zip(self.theta, self.rho_alpha):
            term = ra * np.exp(1j * th * t)
            out = out + term + term.conj().T
        return out

    def derivative(self, t: float, order: int) -> np.ndarray:
        out = np.zeros_like(self.rho_0, dtype=complex)
        for th, ra in zip(self.theta, self.rho_alpha):
            term = (1j * th) ** order * ra * np.exp(1j * th * t)
            out = out + term + ((-1j * th) ** order * ra.conj().T * np.exp(-1j * th * t))
        return out

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "d_S": self.d_S,
            "d_A": self.d_A,
            "theta": [float(x) for x in self.theta],
            "fit_residual": self.fit_residual,
            "pencil_rank": self.rank,
            "rho_0": jsonio.encode_matrix(self.rho_0),
            "rho_alpha": [jsonio.encode_matrix(r) for r in self.rho_alpha],
        }

    @classmethod
    def from_dict(cls, obj) -> "SpectralData":
        return cls(
            np.asarray(obj["theta"], dtype=float),
            jsonio.decode_matrix(obj["rho_0"]),
            [jsonio.decode_matrix(r) for r in obj["rho_alpha"]],
            int(obj["d_S"]),
            int(obj["d_A"]),
            float(obj.get("fit_residual", 0.0)),
            int(obj.get("pencil_rank", 0)),
        )


def cluster_values(values, tol: float):
    """Group sorted reals whose consecutive gaps are at most ``tol``.

    Returns ``(centers, labels)`` with ``labels[i]`` the cluster index of
    ``values[i]``.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0), np.zeros(0, dtype=int)
    order = np.argsort(values, kind="stable")
    labels = np.empty(values.size, dtype=int)
    centers = []
    current = [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if values[b] - values[a] <= tol:
            current.append(b)
        else:
            centers.append(values[current].mean())
            labels[current] = len(centers) - 1
            current = [b]
    centers.append(values[current].mean())
    labels[current] = len(centers) - 1
    return np.asarray(centers), labels


def _sa_tensor(triple: Triple):
    d_S, d_E, d_A = triple.d_S, triple.d_E, triple.d_A
    w, v = numerics.herm_eig(triple.h_SE.matrix)
    c = v.conj().T @ triple.psi.amplitudes.reshape(d_S * d_E, d_A)
    return w, v, c, (d_S, d_E, d_A)


def sample_matrices(triple: Triple, times) -> np.ndarray:
    """Exact ρ_SA(t) for each time, stacked as an ``(T, d_S d_A, d_S d_A)`` array."""
    w, v, c, (d_S, d_E, d_A) = _sa_tensor(triple)
    times = np.asarray(times, dtype=float)
    phases = np.exp(-1j * np.outer(times, w))
    psi = np.einsum("ij,tj,ja->tia", v, phases, c).reshape(len(times), d_S, d_E, d_A)
    rho = np.einsum("tsea,tueb->tsaub", psi, psi.conj())
    return rho.reshape(len(times), d_S * d_A, d_S * d_A)


def sample_rho_SA(triple: Triple, times) -> list:
    """Ideal tomography of ρ_SA at the requested times."""
    lay = SubsystemLayout([("S", triple.d_S), ("A", triple.d_A)])
    return [DensityMatrix(lay, m) for m in sample_matrices(triple, times)]


def extract_spectrum_exact(triple: Triple, merge_tol: float = 1e-9, amp_tol: float = 0.0) -> SpectralData:
    """Fourier components of ρ_SA(t) from the eigendecomposition of H_SE.

    Components whose Frobenius norm does not exceed ``amp_tol`` are dropped,
    which lets callers compare against a blind extraction that cannot see
    zero-weight gaps.
    """
    w, v, c, (d_S, d_E, d_A) = _sa_tensor(triple)
    n = w.size
    vt = v.reshape(d_S, d_E, n)
    # T[a, b] = Tr_E |φ_a><φ_b| with φ_a = v_a ⊗ c_a
    g = np.einsum("sea,ueb->absu", vt, vt.conj())
    t = np.einsum("absu,ax,by->absxuy", g, c, c.conj()).reshape(n, n, d_S * d_A, d_S * d_A)
    gaps = w[None, :] - w[:, None]  # E_b - E_a, the frequency of term (a, b)
    dim = d_S * d_A
    rho0 = np.zeros((dim, dim), dtype=complex)
    pos = []
    for a in range(n):
        for b in range(n):
            if abs(gaps[a, b]) <= merge_tol:
                rho0 += t[a, b]
            elif gaps[a, b] > 0:
                pos.append((a, b))
    thetas, rhos = [], []
    if pos:
        centers, labels = cluster_values([gaps[a, b] for a, b in pos], merge_tol)
        comps = [np.zeros((dim, dim), dtype=complex) for _ in centers]
        for (a, b), lab in zip(pos, labels):
            comps[lab] += t[a, b]
        for th, comp in zip(centers, comps):
            if numerics.frob(comp) > amp_tol:
                thetas.append(float(th))
                rhos.append(comp)
    return SpectralData(np.asarray(thetas), 0.5 * (rho0 + rho0.conj().T), rhos, d_S, d_A)


def _as_stack(samples) -> np.ndarray:
    mats = [s.matrix if isinstance(s, DensityMatrix) else np.asarray(s, dtype=complex) for s in samples]
    return np.stack(mats)


def _pencil_frequencies(y: np.ndarray, dt: float, rank_tol: float, pencil: int | None, strict: bool = True):
    """Angular frequencies of the exponential sum in ``y`` (rows are samples).

    ``strict=False`` takes the rank at the widest gap of the singular
    values and skips the consistency checks; it is meant for a rough
    frequency range from badly conditioned (oversampled) data.
    """
    n_samp, n_chan = y.shape
    p = pencil or n_samp // 2
    if p < 1 or n_samp - p < 1:
        raise SpectralError("too few samples for the requested pencil parameter")
    win = sliding_window_view(y, p + 1, axis=0)  # [n_samp - p, n_chan, p + 1]
    hank = win.reshape(-1, p + 1)
    _, s, v = numerics.svd(hank)
    if s[0] == 0:
        return np.zeros(0), 0
    rel = s / s[0]
    if not strict:
        live = rel[rel > 1e-14]
        if live.size < 2:
            rank = live.size
        else:
            rank = int(np.argmax(live[:-1] / live[1:])) + 1
            if live[-1] > 1e-10:
                rank = live.size
        vh = v[:, :rank].conj().T
        z = np.linalg.eigvals(vh[:, 1:] @ np.linalg.pinv(vh[:, :-1]))
        return np.angle(z) / dt, rank
    rank = int(np.sum(rel > rank_tol))
    if rank >= p:
        raise SpectralError(f"pencil rank {rank} saturates the pencil size {p}; take more samples")
    if rank < rel.size and (rel[rank - 1] < 10 * rank_tol or rel[rank] > rank_tol / 10):
        raise SpectralError(
            f"pencil rank is ambiguous (kept {rel[rank - 1]:.2e}, dropped {rel[rank]:.2e}); "
            "take more samples or a smaller step"
        )
    vh = v[:, :rank].conj().T  # rows span the shift-invariant row space
    z = np.linalg.eigvals(vh[:, 1:] @ np.linalg.pinv(vh[:, :-1]))
    mod_dev = float(np.max(np.abs(np.abs(z) - 1.0)))
    if mod_dev > 1e-6:
        raise SpectralError(f"pencil roots leave the unit circle by {mod_dev:.2e}; signal is not a pure exponential sum")
    return np.angle(z) / dt, rank


def frequency_range(samples, dt: float) -> float:
    """Rough largest |θ| present in uniformly spaced samples; 0 for a constant signal."""
    y = _as_stack(samples).reshape(len(samples), -1)
    omegas, _ = _pencil_frequencies(y, dt, 0.0, None, strict=False)
    return float(np.max(np.abs(omegas))) if omegas.size else 0.0


def extract_spectrum_pencil(samples, dt: float, rank_tol: float = 1e-8, merge_tol: float = 1e-7,
                            t0: float = 0.0, d_S: int = 1, pencil: int | None = None,
                            fit_tol: float = 1e-8) -> SpectralData:
    """Recover the Fourier form of ρ_SA(t) from samples at ``t0 + n dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    stack = _as_stack(samples)
    n_samp, dim, _ = stack.shape
    if dim % d_S:
        raise numerics.DimensionError("d_S does not divide the sample dimension")
    y = stack.reshape(n_samp, -1)
    omegas, rank = _pencil_frequencies(y, dt, rank_tol, pencil)
    mags = np.abs(omegas)
    thetas = np.zeros(0)
    if np.any(mags > merge_tol):
        thetas, _ = cluster_values(mags[mags > merge_tol], merge_tol)
    freqs = np.concatenate([[0.0], thetas, -thetas])
    times = t0 + dt * np.arange(n_samp)
    vander = np.exp(1j * np.outer(times, freqs))
    coef = numerics.lstsq(vander, y, tol=1e-13)
    fit = vander @ coef
    resid = float(np.max(np.linalg.norm(fit - y, axis=1)))
    scale = 1.0 + float(np.max(np.linalg.norm(y, axis=1)))
    if resid > fit_tol * scale:
        raise SpectralError(f"Fourier fit residual {resid:.2e} too large; dt may alias the spectrum")
    mats = coef.reshape(len(freqs), dim, dim)
    n_th = thetas.size
    rho0 = 0.5 * (mats[0] + mats[0].conj().T)
    rho_alpha = [0.5 * (mats[1 + k] + mats[1 + n_th + k].conj().T) for k in range(n_th)]
    return SpectralData(thetas, rho0, rho_alpha, d_S, dim // d_S, resid, rank)


def _central_weights(m: int, order: int) -> np.ndarray:
    offsets = np.arange(-m, m + 1, dtype=float)
    powers = np.arange(2 * m + 1)
    mat = offsets[None, :] ** powers[:, None] / np.array([math.factorial(p) for p in powers])[:, None]
    rhs = np.zeros(2 * m + 1)
    rhs[order] = 1.0
    return np.linalg.solve(mat, rhs)


def derivative_spectrum_probe(samples, dt: float, order: int) -> list:
    """Central finite-difference derivatives of orders ``1..order`` at the middle sample.

    ``samples`` holds an odd number ``2m + 1`` of states at spacing ``dt``.
    Orders above 8 are refused: truncation and round-off make them
    meaningless in double precision.
    """
    if order < 1 or order > 8:
        raise ValueError("order must lie in [1, 8]")
    stack = _as_stack(samples)
    n = stack.shape[0]
    if n % 2 == 0:
        raise ValueError("need an odd number of samples centred on t0")
    m = n // 2
    if 2 * m < order:
        raise ValueError("not enough samples for the requested order")
    if not dt > 0 or dt ** order < 1e-280 or dt < 1e-8:
        raise FloatingPointError("step size underflow")
    out = []
    for k in range(1, order + 1):
        wts = _central_weights(m, k)
        out.append(np.tensordot(wts, stack, axes=(0, 0)) / dt**k)
    return out
