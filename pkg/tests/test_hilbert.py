import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from envprobe.hilbert import (
    DensityMatrix,
    HermitianOperator,
    PureState,
    SubsystemLayout,
    Triple,
    embed,
    entropy,
    evolve,
    mes,
    mirror_check,
    partial_trace,
    relative_entropy,
    schmidt,
    swap,
)
from envprobe.numerics import DimensionError
from envprobe.scenarios import haar_unitary, random_pure, rng_stream

from helpers import X, Z

LAY3 = SubsystemLayout([("S", 2), ("E", 3), ("A", 2)])


def _rand_state(seed, layout=LAY3):
    return PureState(layout, random_pure(np.random.default_rng(seed), layout.total_dim))


def test_layout_queries():
    assert LAY3.labels == ("S", "E", "A")
    assert LAY3.total_dim == 12
    assert LAY3.sub(["A", "S"]).labels == ("S", "A")
    assert LAY3.without(["E"]).dims == (2, 2)
    assert SubsystemLayout.from_list(LAY3.to_list()) == LAY3
    assert LAY3.append("X", 2).total_dim == 24
    with pytest.raises(Exception):
        SubsystemLayout([("S", 2), ("S", 2)])


def test_state_validation():
    with pytest.raises(ValueError):
        PureState(SubsystemLayout([("S", 2)]), [1.0, 1.0])
    with pytest.raises(DimensionError):
        PureState(SubsystemLayout([("S", 2)]), [1.0, 0.0, 0.0])
    st_ = PureState.normalized(SubsystemLayout([("S", 2)]), [1.0, 1.0])
    with pytest.raises(ValueError):
        st_.amplitudes[0] = 0.0
    with pytest.raises(ValueError):
        DensityMatrix(SubsystemLayout([("S", 2)]), np.eye(2))


def test_partial_trace_of_product():
    a = random_pure(np.random.default_rng(0), 2)
    b = random_pure(np.random.default_rng(1), 3)
    state = PureState(SubsystemLayout([("S", 2), ("E", 3)]), np.kron(a, b))
    assert np.allclose(partial_trace(state, ["S"]).matrix, np.outer(a, a.conj()))
    assert np.allclose(partial_trace(state, ["E"]).matrix, np.outer(b, b.conj()))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), keep=st.sampled_from([("S",), ("E",), ("A",), ("S", "A"), ("E", "A")]))
def test_partial_trace_pure_matches_density(seed, keep):
    state = _rand_state(seed)
    a = partial_trace(state, keep).matrix
    b = partial_trace(state.density(), keep).matrix
    assert np.allclose(a, b, atol=1e-13)
    assert abs(np.trace(a) - 1) < 1e-12


def test_embed_places_factor():
    op = HermitianOperator(SubsystemLayout([("E", 3)]), np.diag([1.0, 2.0, 3.0]))
    full = embed(op, LAY3).matrix
    assert np.allclose(full, np.kron(np.kron(np.eye(2), np.diag([1.0, 2.0, 3.0])), np.eye(2)))
    with pytest.raises(ValueError):
        embed(HermitianOperator(SubsystemLayout([("E", 2)]), np.eye(2)), LAY3)


def test_swap_is_involution_and_moves_content():
    lay = SubsystemLayout([("S", 2), ("a1", 2)])
    state = PureState(lay, np.kron([1.0, 0.0], [0.0, 1.0]))
    sw = swap(state, "S", "a1")
    assert np.allclose(sw.amplitudes, np.kron([0.0, 1.0], [1.0, 0.0]))
    assert np.allclose(swap(sw, "S", "a1").amplitudes, state.amplitudes)
    with pytest.raises(DimensionError):
        swap(_rand_state(0), "S", "E")


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_mes_reduction_is_flat(d):
    red = partial_trace(mes(d), ["a1"]).matrix
    assert np.allclose(red, np.eye(d) / d)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_schmidt_reconstructs(seed):
    state = _rand_state(seed)
    c, u, v = schmidt(state, ["S", "A"])
    assert np.all(np.diff(c) <= 1e-15)
    assert abs(np.sum(c**2) - 1) < 1e-12
    # left factors are (S, A), so rebuild in (S, A, E) order then permute back
    m = (u * c) @ v.T
    t = m.reshape(2, 2, 3).transpose(0, 2, 1).ravel()
    assert np.allclose(t, state.amplitudes, atol=1e-12)


def test_entropy_frozen_value():
    # -(0.625 ln 0.625 + 3 * 0.125 ln 0.125), computed once and frozen
    rho = DensityMatrix(SubsystemLayout([("S", 4)]), np.diag([0.625, 0.125, 0.125, 0.125]))
    assert entropy(rho) == pytest.approx(1.0735428464085233, abs=1e-14)


def test_relative_entropy_values():
    lay = SubsystemLayout([("S", 2)])
    pure0 = DensityMatrix(lay, np.diag([1.0, 0.0]))
    mixed = DensityMatrix(lay, np.eye(2) / 2)
    assert relative_entropy(pure0, mixed) == pytest.approx(0.6931471805599453, abs=1e-14)
    assert relative_entropy(mixed, pure0) == math.inf
    assert relative_entropy(mixed, mixed) == pytest.approx(0.0, abs=1e-14)


def test_hermitian_operator_support_and_roundtrip():
    op = HermitianOperator(SubsystemLayout([("S", 2), ("E", 2)]), np.kron(X, Z), ("S",))
    back = HermitianOperator.from_dict(op.to_dict())
    assert back.support_labels == ("S",)
    assert np.array_equal(back.matrix, op.matrix)
    with pytest.raises(Exception):
        HermitianOperator(SubsystemLayout([("S", 2)]), np.eye(2), ("Q",))


def test_triple_validation_and_roundtrip():
    rng = rng_stream(0, "t")
    h = np.kron(X, Z)
    t = Triple.from_arrays(h, random_pure(rng, 8), 2, 2, 2)
    assert (t.d_S, t.d_E, t.d_A) == (2, 2, 2)
    back = Triple.from_dict(t.to_dict())
    assert np.array_equal(back.psi.amplitudes, t.psi.amplitudes)
    with pytest.raises(DimensionError):
        Triple.from_arrays(np.eye(2), random_pure(rng, 4), 2, 2)
    with pytest.raises(DimensionError):
        Triple.from_arrays(np.eye(128), random_pure(rng, 128), 2, 64)


def test_evolve_preserves_norm_and_matches_exponential():
    t = Triple.from_arrays(np.kron(X, Z), random_pure(rng_stream(1, "t"), 4), 2, 2)
    out = evolve(t, 0.7)
    expected = np.cos(0.7) * t.psi.amplitudes - 1j * np.sin(0.7) * (np.kron(X, Z) @ t.psi.amplitudes)
    assert np.allclose(out.amplitudes, expected)
    with pytest.raises(ValueError):
        evolve(t, math.inf)


def _pair_state():
    ups = np.eye(2).ravel() / np.sqrt(2)
    psi = np.einsum("ia,jb->ijab", ups.reshape(2, 2), ups.reshape(2, 2)).ravel()
    return PureState(SubsystemLayout([("S", 2), ("E", 2), ("A", 4)]), psi)


def test_mirror_check_on_haar_unitaries():
    psi = _pair_state()
    rng = rng_stream(5, "mirror")
    for _ in range(5):
        assert mirror_check(haar_unitary(rng, 4), psi) <= 1e-10


def test_mirror_check_rejects_other_states():
    with pytest.raises(ValueError):
        mirror_check(np.eye(4), _rand_state(0, SubsystemLayout([("S", 2), ("E", 2), ("A", 4)])))
    with pytest.raises(DimensionError):
        mirror_check(np.eye(2), _pair_state())


BELL = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
LAY2 = SubsystemLayout([("S", 2), ("E", 2)])


def test_partial_trace_small_cases():
    assert np.allclose(partial_trace(PureState(LAY2, BELL), ["S"]).matrix, np.eye(2) / 2)
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    prod = PureState(LAY2, np.kron([1.0, 0.0], plus))
    assert np.allclose(partial_trace(prod, ["E"]).matrix, np.outer(plus, plus))


def test_partial_trace_against_index_sums():
    lay = SubsystemLayout([("S", 2), ("E", 3)])
    psi = random_pure(np.random.default_rng(4), 6).reshape(2, 3)
    rho_s = np.zeros((2, 2), dtype=complex)
    rho_e = np.zeros((3, 3), dtype=complex)
    for i, j, k in np.ndindex(2, 2, 3):
        rho_s[i, j] += psi[i, k] * psi[j, k].conj()
    for i, j, k in np.ndindex(3, 3, 2):
        rho_e[i, j] += psi[k, i] * psi[k, j].conj()
    state = PureState(lay, psi.ravel())
    assert np.allclose(partial_trace(state, ["S"]).matrix, rho_s)
    assert np.allclose(partial_trace(state, ["E"]).matrix, rho_e)
    ws = np.linalg.eigvalsh(rho_s)
    we = np.linalg.eigvalsh(rho_e)
    assert np.allclose(ws, we[1:]) and abs(we[0]) < 1e-12


def test_embed_small_cases():
    z = HermitianOperator(SubsystemLayout([("S", 2)]), Z)
    assert np.allclose(embed(z, LAY2).matrix, np.kron(Z, np.eye(2)))
    op_e = HermitianOperator(SubsystemLayout([("E", 2)]), X)
    full = embed(op_e, LAY2).matrix
    for i, j, k, l in np.ndindex(2, 2, 2, 2):
        assert full[2 * i + k, 2 * j + l] == (i == j) * X[k, l]


def test_embed_non_adjacent_factors_against_loops():
    target = SubsystemLayout([("S", 2), ("E", 2), ("A1", 2), ("A2", 3)])
    rng = np.random.default_rng(5)
    m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    m = m + m.conj().T
    op = HermitianOperator(SubsystemLayout([("S", 2), ("A2", 3)]), m)
    full = embed(op, target).matrix.reshape(2, 2, 2, 3, 2, 2, 2, 3)
    for s, e, a, b, s2, e2, a2, b2 in np.ndindex(2, 2, 2, 3, 2, 2, 2, 3):
        expected = m[3 * s + b, 3 * s2 + b2] * (e == e2) * (a == a2)
        assert full[s, e, a, b, s2, e2, a2, b2] == pytest.approx(expected)


def test_swap_moves_reduced_state():
    lay = SubsystemLayout([("a", 2), ("b", 2), ("c", 2)])
    state = PureState(lay, random_pure(np.random.default_rng(6), 8))
    sw = swap(state, "a", "b")
    assert np.allclose(partial_trace(sw, ["a"]).matrix, partial_trace(state, ["b"]).matrix)


def test_mes_small_dimensions():
    assert np.allclose(mes(1).amplitudes, [1.0])
    assert np.allclose(mes(2).amplitudes, BELL)


def test_schmidt_small_cases():
    c, _, _ = schmidt(PureState(LAY2, BELL), ["S"])
    assert np.allclose(c, [1 / np.sqrt(2)] * 2)
    c, _, _ = schmidt(PureState(LAY2, np.kron([1.0, 0.0], [0.0, 1.0])), ["S"])
    assert np.allclose(c, [1.0])
    lay = SubsystemLayout([("S", 4), ("E", 4)])
    state = PureState(lay, random_pure(np.random.default_rng(8), 16))
    c, u, v = schmidt(state, ["S"])
    assert np.linalg.norm(((u * c) @ v.T).ravel() - state.amplitudes) <= 1e-10


@pytest.mark.parametrize("d", [2, 3, 5])
def test_entropy_trivial_values(d):
    lay = SubsystemLayout([("S", d)])
    pure = np.zeros((d, d))
    pure[0, 0] = 1.0
    assert entropy(DensityMatrix(lay, pure)) == pytest.approx(0.0, abs=1e-14)
    assert entropy(DensityMatrix(lay, np.eye(d) / d)) == pytest.approx(math.log(d), abs=1e-14)


def test_relative_entropy_disjoint_support():
    lay = SubsystemLayout([("S", 2)])
    assert relative_entropy(DensityMatrix(lay, np.diag([1.0, 0.0])), DensityMatrix(lay, np.diag([0.0, 1.0]))) == math.inf


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 4))
def test_relative_entropy_nonnegative(seed, n):
    from helpers import random_density
    rng = np.random.default_rng(seed)
    lay = SubsystemLayout([("S", n)])
    rho = DensityMatrix(lay, random_density(rng, n))
    sigma = DensityMatrix(lay, random_density(rng, n))
    d = relative_entropy(rho, sigma)
    assert d >= -1e-12
    assert (d <= 1e-12) == (np.linalg.norm(rho.matrix - sigma.matrix) <= 1e-8)
    assert relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-10)


def test_evolve_trivial_cases_and_group_law():
    psi = random_pure(rng_stream(2, "t"), 4)
    t0 = Triple.from_arrays(np.zeros((4, 4)), psi, 2, 2)
    assert np.allclose(evolve(t0, 5.0).amplitudes, psi)
    t = Triple.from_arrays(np.kron(X, Z) + np.kron(Z, np.eye(2)), psi, 2, 2)
    assert np.allclose(evolve(t, 0.0).amplitudes, psi)
    a = evolve(Triple(t.d_E, evolve(t, 0.4), t.h_SE), 1.1).amplitudes
    assert np.allclose(a, evolve(t, 1.5).amplitudes, atol=1e-12)


def test_mirror_check_identity_and_swap():
    psi = _pair_state()
    assert mirror_check(np.eye(4), psi) <= 1e-12
    sw = np.eye(4)[[0, 2, 1, 3]]
    assert mirror_check(sw, psi) <= 1e-10
