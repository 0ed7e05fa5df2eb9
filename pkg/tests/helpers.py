"""Shared builders and independent oracles for the test suite."""
from __future__ import annotations

import itertools

import numpy as np

from envprobe.hilbert import Triple
from envprobe.scenarios import ScenarioSpec, generate
from envprobe.steering import SteeringConfig, run_steering, steered_triple

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


def me_state(d_S: int, supp: np.ndarray) -> np.ndarray:
    """``Υ_{S A1} ⊗ (Σ_k |e_k>_E |k>_A2)/√r`` on ``(S, E, A)`` with columns of ``supp`` as ``e_k``."""
    d_E, r = supp.shape
    psi = np.zeros((d_S, d_E, d_S, r), dtype=complex)
    for s in range(d_S):
        psi[s, :, s, :] = supp
    return (psi / np.sqrt(d_S * r)).ravel()


def me_triple(h: np.ndarray, d_S: int, supp: np.ndarray) -> Triple:
    d_E, r = supp.shape
    return Triple.from_arrays(h, me_state(d_S, supp), d_S, d_E, d_S * r)


def gue_triple(seed: int, d_E: int, d_S: int = 2, strength: float = 1.0) -> Triple:
    spec = ScenarioSpec(seed=seed, d_S=d_S, d_E=d_E,
                        hamiltonian={"kind": "random_gue", "strength": strength},
                        initial_state={"kind": "random_pure"})
    return generate(spec)


def steered(seed: int, d_E: int, d_S: int = 2, **cfg):
    """``(steered_triple, trace)`` for a seeded GUE instance."""
    tr = gue_triple(seed, d_E, d_S)
    state, trace = run_steering(tr, SteeringConfig(rng_seed=seed, **cfg))
    return steered_triple(tr, state), trace


def random_density(rng, n: int, rank: int | None = None) -> np.ndarray:
    rank = rank or n
    m = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


def brute_force_lie_dimension(gens, depth: int = 64) -> int:
    """Rank of all nested commutator words up to ``depth``, by SVD of the real vectorization.

    Independent of the library closure: no Gram–Schmidt, no pair
    bookkeeping, just words ``[g_1, [g_2, [..., g_k]]]`` built from the
    generators in every order, extended one letter at a time.
    """
    gens = [np.asarray(g, dtype=complex) for g in gens]

    def rank_of(mats):
        if not mats:
            return 0, np.zeros((0, 0))
        v = np.array([np.concatenate([m.real.ravel(), m.imag.ravel()]) for m in mats])
        u, s, vh = np.linalg.svd(v, full_matrices=False)
        if s[0] == 0:
            return 0, vh[:0]
        k = int(np.sum(s > 1e-9 * s[0]))
        return k, vh[:k]

    words = [g for g in gens if np.linalg.norm(g) > 0]
    k, _ = rank_of(words)
    level = words
    for _ in range(depth):
        nxt = [g @ w - w @ g for g, w in itertools.product(gens, level)]
        nxt = [w / np.linalg.norm(w) for w in nxt if np.linalg.norm(w) > 1e-12]
        # keep a spanning subset of the new level so word counts stay bounded
        if nxt:
            _, rows = rank_of(nxt)
            n = gens[0].shape[0]
            level = [(r[: n * n] + 1j * r[n * n:]).reshape(n, n) for r in rows]
        else:
            level = []
        words = words + level
        k_new, _ = rank_of(words)
        if k_new == k:  # level inside the old span: later levels add nothing either
            break
        k = k_new
    return k
