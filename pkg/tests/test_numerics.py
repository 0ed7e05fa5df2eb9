import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from envprobe import numerics
from envprobe.numerics import DimensionError, NotHermitianError


def _herm(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a + a.conj().T


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
def test_herm_eig_reconstructs(seed, n):
    h = _herm(seed, n)
    w, v = numerics.herm_eig(h)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(v @ np.diag(w) @ v.conj().T, h, atol=1e-10)
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-12)


def test_herm_eig_phase_convention():
    _, v = numerics.herm_eig(_herm(3, 5))
    for col in v.T:
        first = col[np.argmax(np.abs(col) > 1e-12)]
        assert abs(first.imag) < 1e-14 and first.real > 0


def test_herm_eig_zero_matrix_gives_identity_vectors():
    w, v = numerics.herm_eig(np.zeros((3, 3)))
    assert np.array_equal(w, np.zeros(3))
    assert np.array_equal(v, np.eye(3))


def test_check_hermitian_rejects():
    with pytest.raises(NotHermitianError):
        numerics.check_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(DimensionError):
        numerics.check_hermitian(np.ones((2, 3)))


def test_as_cmatrix_rejects_non_finite():
    with pytest.raises(ValueError):
        numerics.as_cmatrix([[np.nan, 0], [0, 1]])
    with pytest.raises(DimensionError):
        numerics.as_cmatrix([1, 2, 3])


@pytest.mark.parametrize("t", [0.0, 0.3, -1.7, 12.0])
def test_unitary_evolution_matches_expm(t):
    h = _herm(11, 6)
    assert np.allclose(numerics.unitary_evolution(h, t), scipy.linalg.expm(-1j * h * t), atol=1e-11)


def test_kron_cap_and_limits():
    a = np.eye(8)
    with numerics.limits(max_kernel_dim=32):
        with pytest.raises(DimensionError):
            numerics.kron(a, a)
    assert numerics.settings.max_kernel_dim == 4096
    assert numerics.kron(a, a).shape == (64, 64)


def test_kron_ordering():
    a = np.array([[1, 2], [3, 4]])
    b = np.array([[0, 1], [1, 0]])
    k = numerics.kron(a, b)
    assert k[1 * 2 + 0, 0 * 2 + 1] == a[1, 0] * b[0, 1]


def test_svd_convention():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    u, s, v = numerics.svd(a)
    assert np.allclose(u @ np.diag(s) @ v.conj().T, a)
    assert np.all(np.diff(s) <= 0)


@pytest.mark.parametrize("rank", [0, 1, 3, 5])
def test_nullspace_dimension(rank):
    rng = np.random.default_rng(rank)
    a = rng.standard_normal((6, rank)) @ rng.standard_normal((rank, 5)) if rank else np.zeros((6, 5))
    ns = numerics.nullspace(a, tol=1e-10)
    assert ns.shape == (5, 5 - rank)
    if ns.size:
        assert np.linalg.norm(a @ ns) < 1e-9
        assert np.allclose(ns.conj().T @ ns, np.eye(5 - rank))


def test_nullspace_requires_positive_tol():
    with pytest.raises(ValueError):
        numerics.nullspace(np.eye(2), tol=0.0)


def test_lstsq_matches_pinv_and_truncates():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((8, 4))
    b = rng.standard_normal(8)
    assert np.allclose(numerics.lstsq(a, b), np.linalg.pinv(a) @ b)
    # a direction with singular value 1e-14 relative is dropped
    d = np.diag([1.0, 1e-14])
    assert np.allclose(numerics.lstsq(d, np.array([1.0, 1.0]), tol=1e-12), [1.0, 0.0])
    with pytest.raises(DimensionError):
        numerics.lstsq(a, np.ones(3))


def test_kron_small_cases():
    assert np.array_equal(numerics.kron(np.eye(2), np.eye(2)), np.eye(4))
    assert np.array_equal(numerics.kron(np.diag([1, 2]), np.diag([3, 4])), np.diag([3, 4, 6, 8]))


def test_kron_against_index_loops():
    rng = np.random.default_rng(7)
    a, b = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    ref = np.zeros((4, 4))
    for i, j, k, l in np.ndindex(2, 2, 2, 2):
        ref[2 * i + k, 2 * j + l] = a[i, j] * b[k, l]
    k = numerics.kron(a, b)
    assert np.array_equal(k, ref)
    assert k[1, 1] == a[0, 0] * b[1, 1]


def test_herm_eig_pauli():
    w, _ = numerics.herm_eig(np.diag([1.0, -1.0]))
    assert np.allclose(w, [-1, 1])
    w, v = numerics.herm_eig(np.array([[0, 1], [1, 0]]))
    assert np.allclose(w, [-1, 1])
    # columns are (|0> - |1>)/√2 and (|0> + |1>)/√2 with the first nonzero entry real positive
    assert np.allclose(v, np.array([[1, 1], [-1, 1]]) / np.sqrt(2))


@pytest.mark.parametrize("h, t, expected", [
    (np.zeros((2, 2)), 3.1, np.eye(2)),
    (np.diag([1.0, -1.0]), np.pi / 2, np.diag([np.exp(-0.5j * np.pi), np.exp(0.5j * np.pi)])),
    (np.array([[0.3, 1], [1, -2]]), 0.0, np.eye(2)),
])
def test_unitary_evolution_cases(h, t, expected):
    assert np.allclose(numerics.unitary_evolution(h, t), expected, atol=1e-14)


def test_svd_small_cases():
    assert np.allclose(numerics.svd(np.eye(3))[1], 1)
    u = np.array([0.6, 0.8])
    v = np.array([1, 1j, 0]) / np.sqrt(2)
    assert np.allclose(numerics.svd(np.outer(u, v.conj()))[1], [1, 0])


def test_nullspace_small_cases():
    ns = numerics.nullspace(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert ns.shape == (2, 1) and np.allclose(np.abs(ns[:, 0]), [0, 1])
    assert numerics.nullspace(np.array([[2.0, 1.0], [1.0, 3.0]])).shape == (2, 0)
    rng = np.random.default_rng(2)
    assert numerics.nullspace(np.outer(rng.standard_normal(4), rng.standard_normal(6))).shape == (6, 5)


def test_lstsq_cases():
    b = np.array([1.0, 2.0, 3.0])
    assert np.allclose(numerics.lstsq(np.eye(3), b), b)
    rng = np.random.default_rng(3)
    a = rng.standard_normal((9, 4))
    x0 = rng.standard_normal(4)
    assert np.linalg.norm(a @ numerics.lstsq(a, a @ x0) - a @ x0) <= 1e-10
    # rank-deficient: the minimum-norm member has no component along the null space
    a = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 5))
    x = numerics.lstsq(a, a @ rng.standard_normal(5), tol=1e-10)
    ns = numerics.nullspace(a, tol=1e-10)
    assert np.linalg.norm(ns.conj().T @ x) <= 1e-10
