"""State steering towards the maximal-entanglement (ME) condition.

A run repeats rounds of: append a maximally entangled pair ``(a1, a2)``,
swap S with ``a1``, flatten ``ρ_A`` with the local filter, then watch
``ΔE_SA(t)`` over a window. The run halts when the window maximum is zero
(within ``tol_zero``); otherwise the state is evolved to the first sampled
time at which ``ΔE_SA`` reaches half the window maximum and the next round
begins there.

The ancilla register is kept as a single factor ``A``. Within each round
the new factors are appended at the end, so A's basis is positional:
``index = (a_old * d_S + a1) * d_S + a2`` before optional compression of the
``(a_old, a1)`` block onto its support.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import jsonio, numerics
from .hilbert import (
    DensityMatrix,
    HermitianOperator,
    PureState,
    SubsystemLayout,
    Triple,
    entropy,
    entropy_of_spectrum,
    mes,
    partial_trace,
    relative_entropy,
    swap,
)
from .numerics import DimensionError
from .scenarios import rng_stream

__all__ = [
    "SteeringConfig",
    "RoundRecord",
    "SteeringTrace",
    "MEReport",
    "Split",
    "SteeringError",
    "SplitError",
    "delta_e_sa",
    "delta_e_relative_form",
    "delta_e_swap_form",
    "local_filter",
    "steering_round",
    "run_steering",
    "me_condition_check",
    "find_split",
    "mirror_map",
    "steered_triple",
]


class SteeringError(RuntimeError):
    pass


class SplitError(ValueError):
    """The reduced state does not factor as a maximally entangled pair times a flat state."""


@dataclass
class SteeringConfig:
    delta_t: float = 1.0
    samples_per_window: int = 64
    tol_zero: float = 1e-9
    max_rounds: int = 16
    rng_seed: int = 0
    mc_filter: bool = False
    compress_ancilla: bool = True
    rank_tol: float = 1e-10
    max_restarts: int = 10000

    def __post_init__(self):
        if not self.delta_t > 0:
            raise ValueError("delta_t must be positive")
        if int(self.samples_per_window) < 2:
            raise ValueError("samples_per_window must be at least 2")
        if not self.tol_zero > 0:
            raise ValueError("tol_zero must be positive")
        if int(self.max_rounds) < 1:
            raise ValueError("max_rounds must be positive")
        self.samples_per_window = int(self.samples_per_window)
        self.max_rounds = int(self.max_rounds)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, obj: dict) -> "SteeringConfig":
        known = {k: v for k, v in obj.items() if k in cls.__dataclass_fields__}
        unknown = set(obj) - set(known)
        if unknown:
            raise ValueError(f"unknown steering keys: {sorted(unknown)}")
        return cls(**known)


@dataclass
class RoundRecord:
    round_index: int
    swap_time: float
    delta_e_series: list
    epsilon_c: float
    filter_success_prob: float
    lambda_min: float
    rank_rho_A: int
    rank_before: int
    halted: bool
    next_time: float

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["delta_e_series"] = [[t, v] for t, v in self.delta_e_series]
        return d


@dataclass
class SteeringTrace:
    rounds: list = field(default_factory=list)
    halted_at: int | None = None
    halt_time: float | None = None
    restarts: int = 0

    def to_dict(self) -> dict:
        return {
            "halted_at": self.halted_at,
            "halt_time": self.halt_time,
            "restarts": self.restarts,
            "rounds": [r.to_dict() for r in self.rounds],
        }

    def to_csv(self) -> str:
        lines = ["t,delta_e_sa"]
        for r in self.rounds:
            for t, v in r.delta_e_series:
                lines.append(f"{jsonio._fmt_float(t)},{jsonio._fmt_float(v)}")
        return "\n".join(lines) + "\n"


@dataclass
class Split:
    """Isometry ``W`` from ``A1 ⊗ A2`` (dims ``d_S``, ``r``) into the ancilla space.

    Column ``i * r + k`` of ``W`` is the A-vector for ``|i>_{A1}|k>_{A2}``.
    """

    isometry: np.ndarray
    d_S: int
    r: int

    @property
    def a1_isometry(self) -> np.ndarray:
        """Vectors ``W |i>|0>``: the A1 basis paired with the first A2 level."""
        return self.isometry[:, :: self.r]

    @property
    def a2_isometry(self) -> np.ndarray:
        """Vectors ``W |0>|k>``: the A2 basis paired with the first A1 level."""
        return self.isometry[:, : self.r]

    def to_dict(self) -> dict:
        return {"d_S": self.d_S, "r": self.r, "isometry": jsonio.encode_matrix(self.isometry)}

    @classmethod
    def from_dict(cls, obj) -> "Split":
        return cls(jsonio.decode_matrix(obj["isometry"]), int(obj["d_S"]), int(obj["r"]))


@dataclass
class MEReport:
    passed: bool
    rho_S_deviation: float
    factorization_deviation: float
    projector_deviation: float
    r: int
    split: Split | None

    def to_dict(self, with_split: bool = False) -> dict:
        d = {
            "passed": self.passed,
            "rho_S_deviation": self.rho_S_deviation,
            "factorization_deviation": self.factorization_deviation,
            "projector_deviation": self.projector_deviation,
            "r": self.r,
        }
        if with_split and self.split is not None:
            d["split"] = self.split.to_dict()
        return d


# ---------------------------------------------------------------------------
# ΔE_SA in its three forms


def _sa_dims(layout: SubsystemLayout):
    d_S = layout.dim("S")
    return d_S, layout.total_dim // d_S


def delta_e_sa(rho_SA: DensityMatrix) -> float:
    """``S(ρ_SA) - S(ρ_A) + ln d_S`` where A is every factor other than S."""
    lay = rho_SA.layout
    if "S" not in lay or len(lay.labels) < 2:
        raise ValueError("layout needs an S factor and at least one ancilla factor")
    rho_a = partial_trace(rho_SA, [lab for lab in lay.labels if lab != "S"])
    return entropy(rho_SA) - entropy(rho_a) + math.log(lay.dim("S"))


def delta_e_relative_form(rho_SE: DensityMatrix) -> float:
    """``D(ρ_SE || ρ_S ⊗ ρ_E) + D(ρ_S || I/d_S)`` for the S and E factors of ``rho_SE``."""
    lay = rho_SE.layout
    rho_s = partial_trace(rho_SE, ["S"])
    rho_e = partial_trace(rho_SE, [lab for lab in lay.labels if lab != "S"])
    d_S = lay.dim("S")
    prod = DensityMatrix(lay, np.kron(rho_s.matrix, rho_e.matrix))
    mixed = DensityMatrix(rho_s.layout, np.eye(d_S) / d_S)
    return relative_entropy(rho_SE, prod) + relative_entropy(rho_s, mixed)


def _product(a: PureState, b: PureState) -> PureState:
    lay = SubsystemLayout(list(a.layout.factors) + list(b.layout.factors))
    return PureState(lay, np.kron(a.amplitudes, b.amplitudes))


def delta_e_swap_form(state: PureState) -> float:
    """Entanglement gained across ``SE | ancillas`` by one append-and-swap step.

    Entanglement is measured as the entropy of the S⊗E reduction, before
    (state ⊗ Υ_{a1 a2}) and after swapping S with ``a1``.
    """
    d_S = state.layout.dim("S")
    before = _product(state, mes(d_S, ("a1", "a2")))
    after = swap(before, "S", "a1")
    return entropy(partial_trace(after, ["S", "E"])) - entropy(partial_trace(before, ["S", "E"]))


# ---------------------------------------------------------------------------
# local filter


def _split_matrix(state: PureState, target) -> tuple[np.ndarray, list, list]:
    lay = state.layout
    tgt = [lab for lab in lay.labels if lab in set(target)]
    rest = [lab for lab in lay.labels if lab not in set(target)]
    axes = [lay.index(lab) for lab in rest + tgt]
    t = np.transpose(state.tensor(), axes)
    d_t = int(np.prod([lay.dim(lab) for lab in tgt], dtype=np.int64))
    return t.reshape(-1, d_t), rest, tgt


def _assemble(m: np.ndarray, layout: SubsystemLayout, rest: list, tgt: list) -> np.ndarray:
    order = rest + tgt
    t = m.reshape([layout.dim(lab) for lab in order])
    inv = [order.index(lab) for lab in layout.labels]
    return np.transpose(t, inv).ravel()


def _filter_matrix(m: np.ndarray, rank_tol: float):
    """Filter the column register of ``m`` (rows: rest, columns: target)."""
    rho = m.T @ m.conj()
    w, v = numerics.herm_eig(rho)
    on = w > rank_tol
    if not np.any(on):
        raise SteeringError("reduced state on the target has no support above rank_tol")
    lam_min = float(w[on].min())
    f = (v[:, on] * np.sqrt(lam_min / w[on])) @ v[:, on].conj().T
    out = m @ f.T
    prob = float(np.vdot(out, out).real)
    return out / math.sqrt(prob), prob, lam_min, int(on.sum())


def local_filter(state: PureState, target, rank_tol: float = 1e-10):
    """Apply ``sqrt(λ_min ρ_T^{-1})`` on the target factors and post-select success.

    Returns ``(post_state, success_prob)``. The inverse is taken on the
    support of ``ρ_T`` (eigenvalues above ``rank_tol``), and the success
    probability equals ``λ_min · rank(ρ_T)``.
    """
    target = set(target)
    if not target:
        raise ValueError("target factor set is empty")
    m, rest, tgt = _split_matrix(state, target)
    out, prob, _, _ = _filter_matrix(m, rank_tol)
    return PureState(state.layout, _assemble(out, state.layout, rest, tgt)), prob


# ---------------------------------------------------------------------------
# the protocol


def _tensor3(state: PureState):
    lay = state.layout
    d_S, d_E = lay.dim("S"), lay.dim("E")
    return state.amplitudes.reshape(d_S, d_E, -1)


def _state_from_tensor(t: np.ndarray) -> PureState:
    d_S, d_E, d_A = t.shape
    lay = SubsystemLayout([("S", d_S), ("E", d_E), ("A", d_A)])
    v = t.ravel()
    return PureState(lay, v / np.linalg.norm(v))


def _append_and_swap(state: PureState, compress: bool, rank_tol: float) -> PureState:
    """Step 1: adjoin ``Υ_{a1 a2}``, swap S with ``a1``, merge the ancillas into ``A``."""
    lay = state.layout
    d_S, d_E = lay.dim("S"), lay.dim("E")
    if not compress:
        big = _product(state, mes(d_S, ("a1", "a2")))
        big = swap(big, "S", "a1")
        d_A = big.layout.total_dim // (d_S * d_E)
        return _state_from_tensor(big.amplitudes.reshape(d_S, d_E, d_A))
    # After the swap the (a_old, a1) block holds the old (A, S) content and S
    # is maximally entangled with a2, so the swap can be written directly and
    # the block compressed onto its support before a2 is attached.
    t = _tensor3(state)  # [s, e, a]
    d_A = t.shape[2]
    x = np.transpose(t, (1, 2, 0)).reshape(d_E, d_A * d_S)  # [e, (a, a1)]
    _, s, v = numerics.svd(x)
    k = max(1, int(np.sum(s * s > rank_tol)))
    basis = numerics.fix_phases(v[:, :k].conj())
    xc = x @ basis.conj()  # [e, k] coordinates in the compressed basis
    ups = np.eye(d_S) / math.sqrt(d_S)  # [s, a2]
    new = np.einsum("ek,sb->sekb", xc, ups).reshape(d_S, d_E, k * d_S)
    return _state_from_tensor(new)


def _window_delta_e(t3: np.ndarray, w: np.ndarray, v: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """ΔE_SA at offsets ``taus`` for the state tensor ``t3`` under ``H = V diag(w) V†``."""
    d_S, d_E, d_A = t3.shape
    c = v.conj().T @ t3.reshape(d_S * d_E, d_A)
    phases = np.exp(-1j * np.outer(taus, w))  # [T, n]
    psi = np.einsum("ij,tj,ja->tia", v, phases, c).reshape(len(taus), d_S, d_E, d_A)
    rho_sa = np.einsum("tsea,tueb->tsaub", psi, psi.conj()).reshape(len(taus), d_S * d_A, d_S * d_A)
    rho_a = np.einsum("tsea,tseb->tab", psi, psi.conj())
    out = np.empty(len(taus))
    for i in range(len(taus)):
        s_sa = entropy_of_spectrum(np.linalg.eigvalsh(rho_sa[i]))
        s_a = entropy_of_spectrum(np.linalg.eigvalsh(rho_a[i]))
        out[i] = s_sa - s_a + math.log(d_S)
    return out


def _evolve_tensor(t3: np.ndarray, w: np.ndarray, v: np.ndarray, tau: float) -> np.ndarray:
    d_S, d_E, d_A = t3.shape
    u = (v * np.exp(-1j * w * tau)) @ v.conj().T
    return (u @ t3.reshape(d_S * d_E, d_A)).reshape(d_S, d_E, d_A)


def steering_round(state: PureState, triple_h: HermitianOperator, cfg: SteeringConfig, C: int,
                   t_start: float = 0.0):
    """Run round ``C`` starting at time ``t_start``.

    Returns ``(state, record)``. When the round halts the returned state is
    the post-filter state at ``t_start``; otherwise it is the state at
    ``record.next_time``.
    """
    d_S = state.layout.dim("S")
    rank_before = 1
    if "A" in state.layout:
        m_prev = state.amplitudes.reshape(-1, state.layout.dim("A"))
        rank_before = int(np.sum(np.linalg.eigvalsh(m_prev.T @ m_prev.conj()) > cfg.rank_tol))
    swapped = _append_and_swap(state, cfg.compress_ancilla, cfg.rank_tol)
    if swapped.layout.total_dim > numerics.settings.max_dim:
        raise DimensionError(
            f"steering state dimension {swapped.layout.total_dim} exceeds max_dim "
            f"{numerics.settings.max_dim}; enable ancilla compression or raise the cap"
        )
    t3 = _tensor3(swapped)
    m = t3.reshape(-1, t3.shape[2])
    m, prob, lam_min, rank_a = _filter_matrix(m, cfg.rank_tol)
    t3 = m.reshape(t3.shape)
    w, v = numerics.herm_eig(triple_h.matrix)
    taus = np.linspace(0.0, cfg.delta_t, cfg.samples_per_window)
    de = _window_delta_e(t3, w, v, taus)
    eps = 0.5 * float(de.max())
    series = [(float(t_start + tau), float(x)) for tau, x in zip(taus, de)]
    if eps <= cfg.tol_zero:
        rec = RoundRecord(C, float(t_start), series, eps, prob, lam_min, rank_a, rank_before, True, float(t_start))
        return _state_from_tensor(t3), rec
    hits = np.nonzero(de >= eps)[0]
    tau_next = None
    if hits.size:
        tau_next = float(taus[hits[0]])
    else:
        # unreachable when eps is half the window maximum; kept as a guard
        step = cfg.delta_t / (cfg.samples_per_window - 1)
        extra = np.arange(cfg.delta_t + step, 10 * cfg.delta_t + step / 2, step)
        more = _window_delta_e(t3, w, v, extra)
        idx = np.nonzero(more >= eps)[0]
        if not idx.size:
            raise SteeringError("ΔE_SA did not reach epsilon_C within 10 windows; sample more densely")
        tau_next = float(extra[idx[0]])
    t3 = _evolve_tensor(t3, w, v, tau_next)
    rec = RoundRecord(C, float(t_start), series, eps, prob, lam_min, rank_a, rank_before, False,
                      float(t_start + tau_next))
    return _state_from_tensor(t3), rec


def run_steering(triple: Triple, cfg: SteeringConfig):
    """Iterate rounds until halt. Returns ``(final_state, trace)``.

    With ``cfg.mc_filter`` each filter succeeds with its recorded
    probability; a failure discards the run and restarts from the initial
    triple at time 0, counted in ``trace.restarts``.
    """
    rng = rng_stream(cfg.rng_seed, "mc_filter") if cfg.mc_filter else None
    restarts = 0
    while True:
        state, t = triple.psi, 0.0
        trace = SteeringTrace(restarts=restarts)
        aborted = False
        for C in range(1, cfg.max_rounds + 1):
            state, rec = steering_round(state, triple.h_SE, cfg, C, t)
            trace.rounds.append(rec)
            if rng is not None and rng.random() >= rec.filter_success_prob:
                aborted = True
                break
            if rec.halted:
                trace.halted_at, trace.halt_time = C, rec.swap_time
                return state, trace
            t = rec.next_time
        if not aborted:
            raise SteeringError(
                f"no halt within max_rounds={cfg.max_rounds}; tol_zero may be below the numerical noise"
            )
        restarts += 1
        if restarts > cfg.max_restarts:
            raise SteeringError(f"filter failed {restarts} times in Monte-Carlo mode")


def steered_triple(triple: Triple, final_state: PureState) -> Triple:
    return Triple(triple.d_E, final_state, triple.h_SE)


# ---------------------------------------------------------------------------
# ME condition


def _blocks(rho_SA: DensityMatrix):
    d_S, d_A = _sa_dims(rho_SA.layout)
    if rho_SA.layout.labels[0] != "S":
        raise ValueError("S must be the first factor")
    return rho_SA.matrix.reshape(d_S, d_A, d_S, d_A), d_S, d_A


def _polar(x: np.ndarray) -> np.ndarray:
    u, _, v = numerics.svd(x)
    return u @ v.conj().T


def _candidate_split(rho_SA: DensityMatrix, rank_tol: float = 1e-8) -> Split:
    r4, d_S, d_A = _blocks(rho_SA)
    m00 = r4[0, :, 0, :]
    w, v = numerics.herm_eig(0.5 * (m00 + m00.conj().T))
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    top = max(float(w[0]), 1e-300)
    r = max(1, int(np.sum(w > rank_tol * top)))
    r = min(r, max(1, d_A // d_S))
    u = v[:, :r]
    cols = np.empty((d_A, d_S * r), dtype=complex)
    for i in range(d_S):
        cols[:, i * r : (i + 1) * r] = (d_S * r) * (r4[i, :, 0, :] @ u)
    if d_S * r > d_A:
        return Split(np.zeros((d_A, d_S * r), dtype=complex), d_S, r)
    return Split(_polar(cols), d_S, r)


def _predicted(split: Split, rho_a2: np.ndarray) -> np.ndarray:
    d_S = split.d_S
    ups = np.eye(d_S).ravel() / math.sqrt(d_S)
    core = np.kron(np.outer(ups, ups), rho_a2)  # on S ⊗ A1 ⊗ A2
    lift = np.kron(np.eye(d_S), split.isometry)
    return lift @ core @ lift.conj().T


def _pull_back(rho: np.ndarray, split: Split) -> np.ndarray:
    lift = np.kron(np.eye(split.d_S), split.isometry)
    return lift.conj().T @ rho @ lift


def _a2_state(rho_pulled: np.ndarray, d_S: int, r: int) -> np.ndarray:
    t = rho_pulled.reshape(d_S, d_S, r, d_S, d_S, r)
    return np.einsum("ijkijl->kl", t)


def find_split(rho_SA: DensityMatrix, tol: float = 1e-8) -> Split:
    """Locate ``A1 ⊗ A2`` inside the ancilla space.

    The blocks ``M_ij = <i|ρ_SA|j>_S`` of an ME state are
    ``W(|i><j| ⊗ I_r)W† / (d_S r)``. An orthonormal basis ``u_k`` of
    ``supp M_00`` fixes the A2 basis, and ``d_S r M_i0 u_k`` transports it to
    the other A1 levels. The result is checked by rebuilding ρ_SA.
    """
    r4, d_S, d_A = _blocks(rho_SA)
    rho_s = np.einsum("iaja->ij", r4)
    dev = numerics.frob(rho_s - np.eye(d_S) / d_S)
    if dev > tol:
        raise SplitError(f"ρ_S deviates from I/d_S by {dev:.3e}")
    split = _candidate_split(rho_SA)
    if d_S * split.r > d_A:
        raise SplitError("ancilla space too small for a d_S x r split")
    r = split.r
    resid = numerics.frob(rho_SA.matrix - _predicted(split, np.eye(r) / r))
    if resid > tol:
        raise SplitError(f"matrix-unit closure failed: residual {resid:.3e}")
    return split


def me_condition_check(rho_SA: DensityMatrix, tol: float = 1e-8) -> MEReport:
    """Report how far ρ_SA is from ``Υ_{SA1} ⊗ P/r``. Never raises on a bad state."""
    r4, d_S, d_A = _blocks(rho_SA)
    rho_s = np.einsum("iaja->ij", r4)
    dev_s = numerics.frob(rho_s - np.eye(d_S) / d_S)
    split = _candidate_split(rho_SA)
    r = split.r
    if d_S * r > d_A:
        return MEReport(False, dev_s, math.inf, math.inf, r, None)
    rho_a2 = _a2_state(_pull_back(rho_SA.matrix, split), d_S, r)
    dev_f = numerics.frob(rho_SA.matrix - _predicted(split, rho_a2))
    dev_p = numerics.frob(rho_a2 - np.eye(r) / r)
    passed = dev_s <= tol and dev_f <= tol and dev_p <= tol
    return MEReport(bool(passed), dev_s, dev_f, dev_p, r, split)


# ---------------------------------------------------------------------------
# mirror map


def mirror_map(n_SA, psi: PureState, tol: float = 1e-8) -> np.ndarray:
    """Operator ``F`` on A′ with ``(F ⊗ I_SE)|Ψ> = (N ⊗ I_E)|Ψ>``.

    ``n_SA`` acts on ``S ⊗ A ⊗ X`` where ``X`` is an optional extra ancilla
    factor (its dimension is inferred from the shape of ``n_SA``); ``psi``
    lives on ``(S, E, A)`` and is padded with ``|0>_X``. Raises
    ``ValueError`` when ρ_SA does not satisfy the ME condition.
    """
    lay = psi.layout
    d_S, d_E = lay.dim("S"), lay.dim("E")
    d_A = lay.total_dim // (d_S * d_E)
    n = numerics.as_cmatrix(n_SA)
    if n.shape[0] != n.shape[1] or n.shape[0] % (d_S * d_A):
        raise DimensionError(f"operator of shape {n.shape} does not act on S ⊗ A ⊗ X")
    d_X = n.shape[0] // (d_S * d_A)
    try:
        split = find_split(partial_trace(psi, [lab for lab in lay.labels if lab != "E"]), tol)
    except SplitError as exc:
        raise ValueError(f"state fails the ME check: {exc}") from None
    pad = np.zeros(d_X)
    pad[0] = 1.0
    w = np.kron(split.isometry, pad[:, None])  # [a', c]
    d_Ap = d_A * d_X
    psi_t = np.einsum("sea,x->seax", psi.amplitudes.reshape(d_S, d_E, d_A), pad).reshape(d_S, d_E, d_Ap)
    chi = np.einsum("sea,ac->sec", psi_t, w.conj())  # (I ⊗ <w_c|)Ψ
    npsi = np.einsum("pq,qe->pe", n, np.transpose(psi_t, (0, 2, 1)).reshape(d_S * d_Ap, d_E))
    npsi = np.transpose(npsi.reshape(d_S, d_Ap, d_E), (0, 2, 1))  # [s, e, a']
    scale = d_S * split.r
    y = scale * np.einsum("sec,sea->ac", chi.conj(), npsi)
    return y @ w.conj().T
