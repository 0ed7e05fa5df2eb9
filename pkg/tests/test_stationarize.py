import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from envprobe import numerics
from envprobe.hilbert import partial_trace
from envprobe.scenarios import random_gue, rng_stream
from envprobe.tomography import StationarizeError, commutant_projection, stationarize, verify_equivalence
from envprobe.tomography.stationarize import decompose, spectral_projectors

from helpers import I2, X, Y, Z, me_triple, steered


def block_case(seed, d_mov=3, d_rest=2):
    """Support moves inside E_mov, where S only sees scalars; E_rest holds a fixed support vector."""
    rng = rng_stream(seed, "block_case")
    d_E = d_mov + d_rest
    c = rng.normal(size=3)
    h = np.zeros((2 * d_E, 2 * d_E), dtype=complex)
    for sig, ca in zip((X, Y, Z), c):
        rest = np.diag(rng.normal(size=d_rest))
        block = np.zeros((d_E, d_E), dtype=complex)
        block[:d_mov, :d_mov] = ca * np.eye(d_mov)
        block[d_mov:, d_mov:] = rest
        h += np.kron(sig, block)
    h_id = np.zeros((d_E, d_E), dtype=complex)
    h_id[:d_mov, :d_mov] = random_gue(rng, d_mov)
    h_id[d_mov:, d_mov:] = np.diag(rng.normal(size=d_rest))
    h += np.kron(I2, h_id)
    supp = np.zeros((d_E, 2), dtype=complex)
    supp[0, 0] = 1.0
    supp[d_mov, 1] = 1.0
    return me_triple(h, 2, supp)


def _check(t, res):
    assert res.iterations <= 64
    out = res.triple
    rho = partial_trace(out.psi, ["S", "E"]).matrix
    assert numerics.frob(numerics.commutator(out.h_SE.matrix, rho)) <= 1e-9
    assert res.commutator_residual <= 1e-9
    assert verify_equivalence(t, out) <= 1e-8


@pytest.mark.parametrize("seed", range(4))
def test_block_case(seed):
    t = block_case(seed)
    res = stationarize(t)
    _check(t, res)
    assert res.triple.d_E == 2
    # the moving block loses its free part, E_rest keeps its own energies
    assert np.allclose(res.h_id_prime[:3, :3], decompose(t.h_SE.matrix, 2, 5)[0][:3, :3])


def test_rotating_support_maps_to_zero():
    h = np.kron(I2, X)
    t = me_triple(h, 2, np.array([[1.0], [0.0]]))
    res = stationarize(t)
    _check(t, res)
    assert np.allclose(res.triple.h_SE.matrix, 0)


def test_already_stationary_triple_is_unchanged():
    t, _ = steered(0, 2)
    rho = partial_trace(t.psi, ["S", "E"]).matrix
    if numerics.frob(numerics.commutator(t.h_SE.matrix, rho)) > 1e-8:
        pytest.skip("steered instance has a moving support")
    res = stationarize(t)
    _check(t, res)


def test_full_rank_environment_keeps_the_coupling():
    # ρ_E = I/2, so nothing moves and I ⊗ σx survives only through the pinching by P0
    p0 = np.diag([1.0, 0.0])
    h = np.kron(I2, X) + np.kron(Z, p0)
    t = me_triple(h, 2, np.eye(2, dtype=complex))
    res = stationarize(t)
    _check(t, res)
    assert res.triple.d_E == 2


def test_non_invariant_support_raises():
    p0 = np.diag([1.0, 0.0])
    h = np.kron(I2, X) + np.kron(Z, p0)
    t = me_triple(h, 2, np.array([[1.0], [0.0]]))
    with pytest.raises(StationarizeError):
        stationarize(t)


def test_me_violation_raises():
    rng = rng_stream(0, "nonme")
    from envprobe.hilbert import Triple
    from envprobe.scenarios import random_pure
    t = Triple.from_arrays(np.kron(Z, Z), random_pure(rng, 16), 2, 2, 4)
    with pytest.raises(StationarizeError):
        stationarize(t)


def _pinch_oracle(x, projectors, sweeps=400):
    y = np.array(x, dtype=complex)
    for _ in range(sweeps):
        for p in projectors:
            q = np.eye(p.shape[0]) - p
            y = p @ y @ p + q @ y @ q
    return y


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 5))
def test_commutant_projection_matches_iterated_pinching(seed, n):
    rng = np.random.default_rng(seed)
    projs = spectral_projectors(np.diag(rng.integers(0, 2, n).astype(float)))
    projs += spectral_projectors(np.kron(np.diag(rng.integers(0, 2, 1).astype(float)), np.eye(n)))
    x = random_gue(rng, n)
    assert np.allclose(commutant_projection(x, projs), _pinch_oracle(x, projs), atol=1e-9)


def test_commutant_projection_with_overlapping_projectors():
    # P_a and P_b do not commute, so alternating pinchings have to converge
    v = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
    pa = np.diag([1.0, 0.0, 0.0])
    pb = np.outer(v, v)
    x = random_gue(np.random.default_rng(3), 3)
    ref = _pinch_oracle(x, [pa, pb], sweeps=4000)
    assert np.allclose(commutant_projection(x, [pa, pb]), ref, atol=1e-8)


def test_spectral_projectors_sum_to_identity():
    h = np.diag([1.0, 1.0 + 1e-12, 2.0])
    projs = spectral_projectors(h)
    assert len(projs) == 2
    assert np.allclose(sum(projs), np.eye(3))


def test_decompose_round_trip():
    rng = np.random.default_rng(4)
    h = random_gue(rng, 6)
    h_id, parts, ops = decompose(h, 2, 3)
    rebuilt = np.kron(I2, h_id) + sum(np.kron(c, p) for c, p in zip(ops, parts))
    assert np.allclose(rebuilt, h)
