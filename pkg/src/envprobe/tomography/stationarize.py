"""Replace a Hamiltonian with a moving environment support by a stationary one.

Write ``H_SE = I_S ⊗ H_id + Σ_p C_p ⊗ H_p`` with ``C_p`` the traceless
orthonormal basis on S. Only ``H_id`` moves the support of ρ_E, so the
construction averages ``H_id`` over the unitary group generated by the
spectral projectors of the ``H_p``, then over the group enlarged by the
spectral projectors of ``H_id - H_id^(n)``, until the average stops
changing. Averaging over the group generated by a projector set is the
Hilbert–Schmidt projection onto the set's commutant. Subtracting the limit
``I_S ⊗ H_id^(N)`` leaves a Hamiltonian whose support is invariant, and
restricting E to that support gives a triple with a maximally entangled
state on the reduced space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numerics
from ..hilbert import HermitianOperator, PureState, SubsystemLayout, Triple, partial_trace
from ..steering import me_condition_check
from .basis import gell_mann

__all__ = ["StationarizeError", "StationarizeResult", "commutant_projection", "spectral_projectors", "stationarize"]


class StationarizeError(RuntimeError):
    pass


@dataclass
class StationarizeResult:
    triple: Triple
    iterations: int
    commutator_residual: float
    h_id_prime: np.ndarray
    support: np.ndarray  # columns span supp ρ_E(t0)


def spectral_projectors(h: np.ndarray, tol: float = 1e-9) -> list:
    """Projectors onto the eigenspaces of a Hermitian matrix, eigenvalues grouped within ``tol * (1 + |h|)``."""
    w, v = numerics.herm_eig(h)
    scale = tol * (1.0 + float(np.max(np.abs(w))))
    groups, start = [], 0
    for i in range(1, w.size + 1):
        if i == w.size or w[i] - w[i - 1] > scale:
            groups.append(v[:, start:i])
            start = i
    return [g @ g.conj().T for g in groups]


def commutant_projection(x: np.ndarray, projectors: list, tol: float = 1e-10) -> np.ndarray:
    """Hilbert–Schmidt projection of ``x`` onto ``{Y : [Y, P] = 0 for all P}``.

    The commutant is the kernel of the stacked superoperators
    ``P ⊗ I - I ⊗ P^T`` acting on row-major ``vec(Y)``.
    """
    n = x.shape[0]
    if not projectors:
        return np.array(x, dtype=complex)
    eye = np.eye(n)
    sup = np.vstack([np.kron(p, eye) - np.kron(eye, p.T) for p in projectors])
    basis = numerics.nullspace(sup, tol=tol)
    y = basis @ (basis.conj().T @ np.asarray(x, dtype=complex).reshape(-1))
    y = y.reshape(n, n)
    return 0.5 * (y + y.conj().T)


def decompose(h_se: np.ndarray, d_S: int, d_E: int):
    """``(H_id, [H_p])`` with ``H_SE = I ⊗ H_id + Σ C_p ⊗ H_p`` over the traceless ``C_p``."""
    h4 = np.asarray(h_se, dtype=complex).reshape(d_S, d_E, d_S, d_E)
    h_id = np.einsum("iaib->ab", h4) / d_S
    ops = gell_mann(d_S)[1:]
    parts = [np.einsum("ji,iajb->ab", c, h4) for c in ops]
    return h_id, parts, ops


def stationarize(triple: Triple, tol: float = 1e-10, max_iter: int = 64, me_tol: float = 1e-8,
                 commute_tol: float = 1e-8) -> StationarizeResult:
    """Build the stationary equivalent of a triple that satisfies the ME condition at ``t0``.

    Raises :class:`StationarizeError` when the ME condition fails at ``t0``,
    when the averages do not settle within ``max_iter`` rounds, or when the
    resulting Hamiltonian still moves the support (the ME condition cannot
    hold along the whole evolution in that case).
    """
    d_S, d_E = triple.d_S, triple.d_E
    lay = triple.psi.layout
    sa = [lab for lab in lay.labels if lab != "E"]
    if "A" not in lay:
        raise StationarizeError("triple has no ancilla; the ME condition cannot be checked")
    rep = me_condition_check(partial_trace(triple.psi, sa), me_tol)
    if not rep.passed:
        raise StationarizeError(
            f"ME precondition violated (deviations {rep.rho_S_deviation:.2e}, "
            f"{rep.factorization_deviation:.2e}, {rep.projector_deviation:.2e})"
        )
    h = triple.h_SE.matrix
    h_id, parts, _ = decompose(h, d_S, d_E)
    projs = [p for hp in parts for p in spectral_projectors(hp)]
    cur = commutant_projection(h_id, projs)
    iterations = 1
    while True:
        projs = projs + spectral_projectors(h_id - cur)
        nxt = commutant_projection(cur, projs)
        iterations += 1
        if numerics.frob(nxt - cur) <= tol:
            cur = nxt
            break
        cur = nxt
        if iterations >= max_iter:
            raise StationarizeError(f"pinching did not converge within {max_iter} iterations")

    h_prime = h - np.kron(np.eye(d_S), cur)
    rho_se = partial_trace(triple.psi, ["S", "E"]).matrix
    resid = numerics.frob(numerics.commutator(h_prime, rho_se))
    if resid > commute_tol:
        raise StationarizeError(
            f"stationarized Hamiltonian does not preserve the support (residual {resid:.2e}); "
            "the ME condition cannot hold at later times"
        )
    rho_e = partial_trace(triple.psi, ["E"]).matrix
    w, v = numerics.herm_eig(rho_e)
    supp = v[:, w > me_tol * max(float(w.max()), 1e-300)]
    r = supp.shape[1]
    lift = np.kron(np.eye(d_S), supp)
    h_new = lift.conj().T @ h_prime @ lift
    psi_t = triple.psi_tensor()
    psi_new = np.einsum("ek,sea->ska", supp.conj(), psi_t)
    se = SubsystemLayout([("S", d_S), ("E", r)])
    new_lay = se.append("A", triple.d_A)
    out = Triple(r, PureState.normalized(new_lay, psi_new.reshape(-1)),
                 HermitianOperator(se, 0.5 * (h_new + h_new.conj().T)))
    return StationarizeResult(out, iterations, resid, cur, supp)
