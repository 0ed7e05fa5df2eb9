"""Seeded ground-truth instances.

Every random draw goes through :func:`rng_stream`, which gives each consumer
its own PCG64 substream keyed by a string label. Adding a new consumer thus
never shifts the numbers an existing one sees.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.stats import unitary_group

from . import jsonio, numerics
from .hilbert import HermitianOperator, PureState, SubsystemLayout, Triple
from .numerics import DimensionError

RNG_ALGORITHM = "numpy.random.PCG64; SeedSequence(seed, spawn_key=sha256(label)[:16] as 4 x uint32)"

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

HAMILTONIAN_KINDS = ("random_gue", "heisenberg_chain", "explicit")
STATE_KINDS = ("random_pure", "equilibrated_fixed", "random_mixed", "explicit")


def rng_stream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for ``(seed, label)``."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    key = tuple(int.from_bytes(digest[4 * i : 4 * i + 4], "little") for i in range(4))
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def random_gue(rng: np.random.Generator, dim: int, strength: float = 1.0) -> np.ndarray:
    """Hermitian matrix with unit-variance entries, scaled by ``strength / sqrt(dim)``."""
    g = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    h = (g + g.conj().T) / np.sqrt(2.0)
    return h * (strength / np.sqrt(dim))


def haar_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1), dtype=complex)
    return np.asarray(unitary_group.rvs(dim, random_state=rng), dtype=complex)


def random_pure(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def heisenberg_chain(n_spins: int, couplings=1.0) -> np.ndarray:
    """Open Heisenberg chain ``sum_k J_k (XX + YY + ZZ)`` on nearest neighbours."""
    if n_spins < 2:
        raise ValueError("a chain needs at least two spins")
    js = np.broadcast_to(np.asarray(couplings, dtype=float), (n_spins - 1,))
    dim = 2**n_spins
    h = np.zeros((dim, dim), dtype=complex)
    for k, jk in enumerate(js):
        for p in "XYZ":
            ops = [PAULI["I"]] * n_spins
            ops[k] = ops[k + 1] = PAULI[p]
            term = ops[0]
            for o in ops[1:]:
                term = np.kron(term, o)
            h += jk * term
    return h


@dataclass
class ScenarioSpec:
    seed: int
    d_S: int
    d_E: int
    hamiltonian: dict = field(default_factory=lambda: {"kind": "random_gue", "strength": 1.0})
    initial_state: dict = field(default_factory=lambda: {"kind": "random_pure"})
    notes: str = ""

    def __post_init__(self):
        self.seed = int(self.seed)
        self.d_S, self.d_E = int(self.d_S), int(self.d_E)
        if self.d_S < 1 or self.d_E < 1:
            raise ValueError("dimensions must be positive")
        kind = self.hamiltonian.get("kind")
        if kind not in HAMILTONIAN_KINDS:
            raise ValueError(f"unknown hamiltonian kind {kind!r}")
        if kind == "heisenberg_chain":
            n = int(self.hamiltonian.get("n_spins", 0))
            if self.d_S != 2 or self.d_E != 2 ** (n - 1):
                raise ValueError(
                    f"heisenberg_chain with {n} spins needs d_S = 2 and d_E = {2 ** max(n - 1, 0)}"
                )
        skind = self.initial_state.get("kind")
        if skind not in STATE_KINDS:
            raise ValueError(f"unknown initial_state kind {skind!r}")

    def to_dict(self) -> dict:
        def enc(d):
            return {k: (jsonio.encode_matrix(v) if isinstance(v, np.ndarray) else v) for k, v in d.items()}

        return {
            "seed": self.seed,
            "d_S": self.d_S,
            "d_E": self.d_E,
            "hamiltonian": enc(self.hamiltonian),
            "initial_state": enc(self.initial_state),
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ScenarioSpec":
        try:
            return cls(
                seed=obj["seed"],
                d_S=obj["d_S"],
                d_E=obj["d_E"],
                hamiltonian=dict(obj.get("hamiltonian", {"kind": "random_gue", "strength": 1.0})),
                initial_state=dict(obj.get("initial_state", {"kind": "random_pure"})),
                notes=str(obj.get("notes", "")),
            )
        except KeyError as exc:
            raise ValueError(f"scenario is missing field {exc}") from None


def _as_array(value, shape=None) -> np.ndarray:
    if isinstance(value, dict):
        arr = jsonio.decode_matrix(value)
    else:
        arr = np.asarray(value, dtype=complex)
    if shape is not None:
        arr = arr.reshape(shape)
    return arr


def _build_hamiltonian(spec: ScenarioSpec) -> np.ndarray:
    hs = spec.hamiltonian
    dim = spec.d_S * spec.d_E
    kind = hs["kind"]
    if kind == "random_gue":
        return random_gue(rng_stream(spec.seed, "hamiltonian"), dim, float(hs.get("strength", 1.0)))
    if kind == "heisenberg_chain":
        return heisenberg_chain(int(hs["n_spins"]), hs.get("couplings", 1.0))
    h = _as_array(hs["matrix"])
    if h.shape != (dim, dim):
        raise DimensionError(f"explicit hamiltonian must be {dim}x{dim}, got {h.shape}")
    return h


def _purify(rho: np.ndarray, rng: np.random.Generator, rank_tol: float = 1e-12):
    """Purify ``rho`` with a Haar-rotated purifier of dimension ``rank(rho)``."""
    w, v = numerics.herm_eig(rho)
    keep = w > rank_tol * max(w.max(), 1e-300)
    w, v = w[keep], v[:, keep]
    k = w.size
    u = haar_unitary(rng, k)
    # |psi> = sum_k sqrt(w_k) |v_k> ⊗ U|k>
    return (v * np.sqrt(w)) @ u.T, k


def generate(spec: ScenarioSpec) -> Triple:
    """Ground-truth triple for a scenario, deterministic in ``spec``.

    Mixed initial states (Gibbs or random mixed) are purified into an
    enlarged environment ``E ⊗ E'`` on which the Hamiltonian acts as
    ``H_SE ⊗ I``; the returned triple's ``d_E`` is the enlarged dimension.
    """
    d_S, d_E = spec.d_S, spec.d_E
    if d_S * d_E > numerics.settings.max_dim:
        raise DimensionError(f"d_S*d_E = {d_S * d_E} exceeds max_dim {numerics.settings.max_dim}")
    h = numerics.check_hermitian(_build_hamiltonian(spec))
    st = spec.initial_state
    kind = st["kind"]
    dim = d_S * d_E
    if kind == "random_pure":
        psi = random_pure(rng_stream(spec.seed, "initial_state"), dim)
        return Triple.from_arrays(h, psi, d_S, d_E)
    if kind == "explicit":
        psi = _as_array(st["vector"]).ravel()
        if psi.size != dim:
            raise DimensionError(f"explicit state must have {dim} amplitudes")
        return Triple.from_arrays(h, psi / np.linalg.norm(psi), d_S, d_E)
    if kind == "equilibrated_fixed":
        beta = float(st.get("beta", 1.0))
        w, v = numerics.herm_eig(h)
        p = np.exp(-beta * (w - w.min()))
        rho = (v * (p / p.sum())) @ v.conj().T
    else:
        rank = int(st.get("rank", 2))
        if not 1 <= rank <= dim:
            raise ValueError(f"rank must lie in [1, {dim}]")
        g = rng_stream(spec.seed, "initial_state")
        m = g.standard_normal((dim, rank)) + 1j * g.standard_normal((dim, rank))
        rho = m @ m.conj().T
        rho /= np.trace(rho).real
    amps, k = _purify(rho, rng_stream(spec.seed, "purifier"))
    big_e = d_E * k
    if d_S * big_e > numerics.settings.max_dim:
        raise DimensionError(f"purified instance dimension {d_S * big_e} exceeds max_dim")
    # amps[(s,e), e'] regrouped as S ⊗ (E ⊗ E')
    psi = amps.reshape(d_S, d_E * k).ravel()
    h_big = np.kron(h, np.eye(k))
    return Triple.from_arrays(h_big, psi, d_S, big_e)
