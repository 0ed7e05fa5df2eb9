"""Sampled test of triple equivalence.

Two triples are equivalent when no sequence of operations on S and the
ancillas, interleaved with free evolution, can tell them apart. The check
here draws random sequences of contractions on ``S ⊗ A ⊗ X`` (X is one
extra qubit that starts in ``|0>``) at random times and compares the
resulting unnormalized ``Tr_E`` states, plus the plain free evolution on a
fixed time grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numerics
from ..hilbert import Triple
from ..scenarios import haar_unitary, rng_stream
from .spectral import sample_matrices

__all__ = ["EquivalenceConfig", "verify_equivalence"]


@dataclass
class EquivalenceConfig:
    n_sequences: int = 8
    max_ops_per_sequence: int = 4
    time_horizon: float = 5.0
    rng_seed: int = 0
    n_grid: int = 16
    extra_dim: int = 2

    @classmethod
    def from_dict(cls, obj: dict) -> "EquivalenceConfig":
        alias = {"max_ops": "max_ops_per_sequence", "horizon": "time_horizon"}
        kw = {alias.get(k, k): v for k, v in obj.items()}
        unknown = set(kw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown verify keys: {sorted(unknown)}")
        return cls(**kw)


class _Evolver:
    def __init__(self, triple: Triple, extra_dim: int):
        self.d_S, self.d_E, self.d_A = triple.d_S, triple.d_E, triple.d_A
        self.w, self.v = numerics.herm_eig(triple.h_SE.matrix)
        self.dx = extra_dim
        psi = triple.psi.amplitudes.reshape(self.d_S, self.d_E, self.d_A)
        pad = np.zeros(extra_dim)
        pad[0] = 1.0
        self.psi0 = np.einsum("sea,x->seax", psi, pad).reshape(self.d_S, self.d_E, self.d_A * extra_dim)

    def evolve(self, psi, tau):
        u = (self.v * np.exp(-1j * self.w * tau)) @ self.v.conj().T
        flat = psi.reshape(self.d_S * self.d_E, -1)
        return (u @ flat).reshape(psi.shape)

    @staticmethod
    def apply(psi, op):
        d_S, d_E, d_Ap = psi.shape
        m = np.transpose(psi, (0, 2, 1)).reshape(d_S * d_Ap, d_E)
        return np.transpose((op @ m).reshape(d_S, d_Ap, d_E), (0, 2, 1))

    @staticmethod
    def reduced(psi):
        d_S, _, d_Ap = psi.shape
        r = np.einsum("sea,ueb->saub", psi, psi.conj())
        return r.reshape(d_S * d_Ap, d_S * d_Ap)


def verify_equivalence(t1: Triple, t2: Triple, cfg: EquivalenceConfig | None = None) -> float:
    """Max Frobenius distance of the ``Tr_E`` outputs over all sampled sequences."""
    cfg = cfg or EquivalenceConfig()
    if t1.d_S != t2.d_S or t1.d_A != t2.d_A:
        raise numerics.DimensionError("triples must share d_S and the ancilla dimension")
    grid = np.linspace(0.0, cfg.time_horizon, cfg.n_grid)
    dev = float(np.max(np.linalg.norm(sample_matrices(t1, grid) - sample_matrices(t2, grid), axis=(1, 2))))
    e1, e2 = _Evolver(t1, cfg.extra_dim), _Evolver(t2, cfg.extra_dim)
    rng = rng_stream(cfg.rng_seed, "verify_equivalence")
    d_op = t1.d_S * t1.d_A * cfg.extra_dim
    for _ in range(cfg.n_sequences):
        n_ops = int(rng.integers(1, cfg.max_ops_per_sequence + 1))
        times = np.sort(rng.uniform(0.0, cfg.time_horizon, n_ops))
        ops = [rng.uniform(0.5, 1.0) * haar_unitary(rng, d_op) for _ in range(n_ops)]
        p1, p2, t_prev = e1.psi0, e2.psi0, 0.0
        for t, op in zip(times, ops):
            p1 = e1.apply(e1.evolve(p1, t - t_prev), op)
            p2 = e2.apply(e2.evolve(p2, t - t_prev), op)
            t_prev = t
            dev = max(dev, numerics.frob(e1.reduced(p1) - e2.reduced(p2)))
    return dev
