"""Tensor-structured states and operators.

A :class:`SubsystemLayout` is an ordered list of labeled factors; amplitudes
and matrices are stored in the row-major (C-order) product basis of that
list, so the first factor is the most significant index. The canonical order
is ``(S, E, A)`` where ``A`` collects every ancilla appended so far.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import jsonio, numerics
from .numerics import DEFAULT_TOL, DimensionError

__all__ = [
    "SubsystemLayout",
    "PureState",
    "DensityMatrix",
    "HermitianOperator",
    "Triple",
    "partial_trace",
    "embed",
    "swap",
    "mes",
    "schmidt",
    "entropy",
    "relative_entropy",
    "evolve",
    "mirror_check",
    "entropy_of_spectrum",
]

INFINITY = float("inf")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SubsystemLayout:
    factors: tuple

    def __init__(self, factors: Iterable[Sequence]):
        facs = tuple((str(lab), int(d)) for lab, d in factors)
        labels = [lab for lab, _ in facs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate factor labels in {labels}")
        for lab, d in facs:
            if d < 1:
                raise ValueError(f"factor {lab!r} has non-positive dimension {d}")
        object.__setattr__(self, "factors", facs)

    @property
    def labels(self) -> tuple:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple:
        return tuple(d for _, d in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown factor label {label!r}; layout has {self.labels}") from None

    def __contains__(self, label) -> bool:
        return label in self.labels

    def sub(self, labels: Iterable[str]) -> "SubsystemLayout":
        """Sub-layout on ``labels``, kept in this layout's order."""
        keep = set(labels)
        for lab in keep:
            self.index(lab)
        return SubsystemLayout([f for f in self.factors if f[0] in keep])

    def without(self, labels: Iterable[str]) -> "SubsystemLayout":
        drop = set(labels)
        return SubsystemLayout([f for f in self.factors if f[0] not in drop])

    def append(self, label: str, dim: int) -> "SubsystemLayout":
        return SubsystemLayout(list(self.factors) + [(label, dim)])

    def to_list(self) -> list:
        return [[lab, d] for lab, d in self.factors]

    @classmethod
    def from_list(cls, obj) -> "SubsystemLayout":
        return cls([(lab, d) for lab, d in obj])


@dataclass(frozen=True)
class PureState:
    layout: SubsystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.complex128).ravel()
        if amp.size != self.layout.total_dim:
            raise DimensionError(
                f"{amp.size} amplitudes do not match layout dimension {self.layout.total_dim}"
            )
        if not np.all(np.isfinite(amp)):
            raise ValueError("state has non-finite amplitudes")
        if abs(np.linalg.norm(amp) - 1.0) > DEFAULT_TOL:
            raise ValueError(f"state is not normalized (norm {np.linalg.norm(amp):.3e})")
        object.__setattr__(self, "amplitudes", _frozen(amp))

    @classmethod
    def normalized(cls, layout: SubsystemLayout, amplitudes) -> "PureState":
        amp = np.asarray(amplitudes, dtype=np.complex128).ravel()
        return cls(layout, amp / np.linalg.norm(amp))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def density(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix(self.layout, np.outer(v, v.conj()))

    def to_dict(self) -> dict:
        return {"layout": self.layout.to_list(), "amplitudes": jsonio.encode_matrix(self.amplitudes)}

    @classmethod
    def from_dict(cls, obj) -> "PureState":
        return cls(SubsystemLayout.from_list(obj["layout"]), jsonio.decode_vector(obj["amplitudes"]))


@dataclass(frozen=True)
class DensityMatrix:
    """Density operator on a layout.

    ``weight`` is the trace of the matrix; it is 1 for normalized states and
    lies in ``[0, 1]`` for sub-normalized post-selection branches.
    """

    layout: SubsystemLayout
    matrix: np.ndarray
    weight: float = field(default=1.0)

    def __post_init__(self):
        n = self.layout.total_dim
        m = numerics.as_cmatrix(self.matrix)
        if m.shape != (n, n):
            raise DimensionError(f"matrix shape {m.shape} does not match layout dimension {n}")
        scale = max(1.0, numerics.frob(m))
        if numerics.frob(m - m.conj().T) > DEFAULT_TOL * scale:
            raise numerics.NotHermitianError("density matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        tr = float(np.trace(m).real)
        if not (-DEFAULT_TOL <= self.weight <= 1.0 + DEFAULT_TOL):
            raise ValueError(f"weight {self.weight} outside [0, 1]")
        if abs(tr - self.weight) > 1e-9 * max(1.0, n / 64):
            raise ValueError(f"trace {tr:.12g} does not match weight {self.weight:.12g}")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "weight", float(self.weight))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def to_dict(self) -> dict:
        return {
            "layout": self.layout.to_list(),
            "matrix": jsonio.encode_matrix(self.matrix),
            "weight": self.weight,
        }

    @classmethod
    def from_dict(cls, obj) -> "DensityMatrix":
        return cls(
            SubsystemLayout.from_list(obj["layout"]),
            jsonio.decode_matrix(obj["matrix"]),
            float(obj.get("weight", 1.0)),
        )


@dataclass(frozen=True)
class HermitianOperator:
    layout: SubsystemLayout
    matrix: np.ndarray
    support_labels: tuple = None

    def __post_init__(self):
        n = self.layout.total_dim
        m = numerics.check_hermitian(self.matrix)
        if m.shape != (n, n):
            raise DimensionError(f"operator shape {m.shape} does not match layout dimension {n}")
        sup = self.layout.labels if self.support_labels is None else tuple(self.support_labels)
        for lab in sup:
            self.layout.index(lab)
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "support_labels", sup)

    def to_dict(self) -> dict:
        return {
            "layout": self.layout.to_list(),
            "matrix": jsonio.encode_matrix(self.matrix),
            "support": list(self.support_labels),
        }

    @classmethod
    def from_dict(cls, obj) -> "HermitianOperator":
        return cls(
            SubsystemLayout.from_list(obj["layout"]),
            jsonio.decode_matrix(obj["matrix"]),
            tuple(obj.get("support", ())) or None,
        )


@dataclass(frozen=True)
class Triple:
    """Environment dimension, joint pure state on S⊗E⊗A and the S–E Hamiltonian.

    ``psi`` has factors ``S``, ``E`` and optionally ``A`` in that order.
    ``h_SE`` lives on the ``(S, E)`` layout and acts as identity on ``A``.
    """

    d_E: int
    psi: PureState
    h_SE: HermitianOperator

    def __post_init__(self):
        labels = self.psi.layout.labels
        if labels[:2] != ("S", "E") or len(labels) > 3 or (len(labels) == 3 and labels[2] != "A"):
            raise ValueError(f"triple state must have factors (S, E[, A]), got {labels}")
        if self.psi.layout.dim("E") != self.d_E:
            raise DimensionError(f"E factor has dim {self.psi.layout.dim('E')}, expected {self.d_E}")
        if self.h_SE.layout.factors != self.psi.layout.sub(["S", "E"]).factors:
            raise DimensionError("h_SE layout must be the (S, E) part of the state layout")
        total = self.psi.layout.total_dim
        if total > numerics.settings.max_dim:
            raise DimensionError(
                f"instance dimension {total} exceeds max_dim {numerics.settings.max_dim}"
            )

    @property
    def d_S(self) -> int:
        return self.psi.layout.dim("S")

    @property
    def d_A(self) -> int:
        return self.psi.layout.dim("A") if "A" in self.psi.layout else 1

    def psi_tensor(self) -> np.ndarray:
        """Amplitudes reshaped to ``(d_S, d_E, d_A)``."""
        return self.psi.amplitudes.reshape(self.d_S, self.d_E, self.d_A)

    def to_dict(self) -> dict:
        return {"d_E": self.d_E, "psi": self.psi.to_dict(), "h_SE": self.h_SE.to_dict()}

    @classmethod
    def from_dict(cls, obj) -> "Triple":
        return cls(int(obj["d_E"]), PureState.from_dict(obj["psi"]), HermitianOperator.from_dict(obj["h_SE"]))

    @classmethod
    def from_arrays(cls, h_se, psi, d_S: int, d_E: int, d_A: int = 1) -> "Triple":
        """Build a triple from a raw ``(d_S d_E)``-square matrix and a flat state vector."""
        se = SubsystemLayout([("S", d_S), ("E", d_E)])
        layout = se if d_A == 1 and np.size(psi) == d_S * d_E else se.append("A", d_A)
        return cls(d_E, PureState(layout, psi), HermitianOperator(se, h_se))


def _reduced_from_vector(vec: np.ndarray, dims: Sequence[int], keep_axes: Sequence[int]) -> np.ndarray:
    t = vec.reshape(dims)
    rest = [i for i in range(len(dims)) if i not in keep_axes]
    t = np.transpose(t, list(keep_axes) + rest)
    k = int(np.prod([dims[i] for i in keep_axes], dtype=np.int64))
    m = t.reshape(k, -1)
    return m @ m.conj().T


def partial_trace(rho, keep: Iterable[str]) -> DensityMatrix:
    """Reduce a pure state or density matrix onto the factors in ``keep``."""
    keep = set(keep)
    layout = rho.layout
    kept = layout.sub(keep)
    axes = [layout.index(lab) for lab in kept.labels]
    dims = layout.dims
    if isinstance(rho, PureState):
        red = _reduced_from_vector(rho.amplitudes, dims, axes)
        return DensityMatrix(kept, red)
    n = len(dims)
    t = np.asarray(rho.matrix).reshape(dims + dims)
    traced = [i for i in range(n) if i not in axes]
    # einsum with shared letters on traced axes performs the trace
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[i] if i in traced else letters[n + i].upper() for i in range(n)]
    out = "".join(row[i] for i in axes) + "".join(col[i] for i in axes)
    red = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    k = kept.total_dim
    return DensityMatrix(kept, red.reshape(k, k), rho.weight)


def embed(op: HermitianOperator, layout: SubsystemLayout) -> HermitianOperator:
    """Tensor ``op`` with identities so it acts on ``layout``."""
    for lab, d in op.layout.factors:
        if lab not in layout or layout.dim(lab) != d:
            raise ValueError(f"factor {lab!r} (dim {d}) missing from target layout")
    rest = layout.without(op.layout.labels)
    full = numerics.kron(op.matrix, np.eye(rest.total_dim))
    src_order = list(op.layout.labels) + list(rest.labels)
    src_dims = [layout.dim(lab) for lab in src_order]
    perm = [src_order.index(lab) for lab in layout.labels]
    n = len(src_order)
    t = full.reshape(src_dims + src_dims)
    t = np.transpose(t, perm + [p + n for p in perm])
    d = layout.total_dim
    return HermitianOperator(layout, t.reshape(d, d), op.support_labels)


def swap(state: PureState, a: str, b: str) -> PureState:
    """Exchange the contents of two equal-dimension factors."""
    lay = state.layout
    ia, ib = lay.index(a), lay.index(b)
    if lay.dims[ia] != lay.dims[ib]:
        raise DimensionError(f"cannot swap {a!r} (dim {lay.dims[ia]}) with {b!r} (dim {lay.dims[ib]})")
    perm = list(range(len(lay.dims)))
    perm[ia], perm[ib] = ib, ia
    t = np.transpose(state.tensor(), perm)
    return PureState(lay, t.ravel())


def mes(d: int, labels=("a1", "a2")) -> PureState:
    """Standard maximally entangled state ``d^{-1/2} sum_i |i>|i>``."""
    if d < 1:
        raise ValueError("dimension must be positive")
    x, y = labels
    v = np.eye(d, dtype=np.complex128).ravel() / np.sqrt(d)
    return PureState(SubsystemLayout([(x, d), (y, d)]), v)


def schmidt(state: PureState, left: Iterable[str], cutoff: float = 1e-12):
    """Schmidt decomposition across ``left | rest``.

    Returns ``(coefficients, left_vectors, right_vectors)`` with the vectors
    as columns, so ``state = sum_k c_k u_k ⊗ v_k`` with the left factors
    ordered first. Coefficients below ``cutoff`` are dropped.
    """
    left = set(left)
    lay = state.layout
    if not left or left >= set(lay.labels):
        raise ValueError("left must be a nonempty proper subset of the layout labels")
    axes = [lay.index(lab) for lab in lay.sub(left).labels]
    rest = [i for i in range(len(lay.dims)) if i not in axes]
    t = np.transpose(state.tensor(), axes + rest)
    k = int(np.prod([lay.dims[i] for i in axes], dtype=np.int64))
    u, s, v = numerics.svd(t.reshape(k, -1))
    keep = s > cutoff
    u, s, v = u[:, keep], s[keep], v[:, keep]
    fixed = numerics.fix_phases(u)
    # fixed = u * D with D diagonal, so M = fixed S (v D)^dagger
    d = np.sum(fixed * u.conj(), axis=0)
    right = np.conj(v * d)
    return s, fixed, right


def entropy_of_spectrum(w) -> float:
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -1e-10:
        raise ValueError(f"eigenvalue {w.min():.3e} below -1e-10: not a valid state")
    w = w[w > 0]
    return float(-np.sum(w * np.log(w)))


def entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy in nats."""
    return entropy_of_spectrum(np.linalg.eigvalsh(rho.matrix))


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix, tol: float = DEFAULT_TOL) -> float:
    """``Tr(rho ln rho - rho ln sigma)``; returns ``inf`` when supp(rho) ⊄ supp(sigma)."""
    if rho.layout.dims != sigma.layout.dims:
        raise DimensionError("layouts differ")
    ws, vs = np.linalg.eigh(sigma.matrix)
    on = ws > tol
    outside = vs[:, ~on]
    leak = float(np.trace(outside.conj().T @ rho.matrix @ outside).real) if outside.size else 0.0
    if leak > tol:
        return INFINITY
    wr, vr = np.linalg.eigh(rho.matrix)
    wr_pos = wr[wr > 0]
    term1 = float(np.sum(wr_pos * np.log(wr_pos)))
    log_sigma = (vs[:, on] * np.log(ws[on])) @ vs[:, on].conj().T
    term2 = float(np.trace(rho.matrix @ log_sigma).real)
    return term1 - term2


def evolve(triple: Triple, t: float) -> PureState:
    """Apply ``exp(-i H_SE t) ⊗ I_A`` to the triple's state."""
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    u = numerics.unitary_evolution(triple.h_SE.matrix, t)
    m = triple.psi.amplitudes.reshape(triple.d_S * triple.d_E, -1)
    return PureState(triple.psi.layout, (u @ m).ravel())


def _standard_pair_state(d_S: int, d_E: int) -> np.ndarray:
    ups = np.eye(d_S).ravel() / np.sqrt(d_S)
    phi = np.eye(d_E).ravel() / np.sqrt(d_E)
    # layout order S, E, A1, A2
    return np.einsum("ia,jb->ijab", ups.reshape(d_S, d_S), phi.reshape(d_E, d_E)).ravel()


def mirror_check(u_SE, psi: PureState, tol: float = DEFAULT_TOL) -> float:
    """Deviation between ``U ⊗ I |Ψ>`` and ``I ⊗ U^T |Ψ>``.

    ``psi`` must be the product of the standard maximally entangled states
    of S with A1 and of E with A2, on layout ``(S, E, A)`` with
    ``d_A = d_S d_E`` or ``(S, E, A1, A2)``. The transpose is taken in the
    computational basis of A1⊗A2.
    """
    lay = psi.layout
    d_S, d_E = lay.dim("S"), lay.dim("E")
    if lay.total_dim != (d_S * d_E) ** 2 or lay.labels[:2] != ("S", "E"):
        raise ValueError("state is not a product of two maximally entangled pairs")
    ref = _standard_pair_state(d_S, d_E)
    if abs(abs(np.vdot(ref, psi.amplitudes)) - 1.0) > tol:
        raise ValueError("state is not a product of two maximally entangled pairs")
    u = numerics.as_cmatrix(u_SE)
    n = d_S * d_E
    if u.shape != (n, n):
        raise DimensionError(f"unitary must be {n}x{n}")
    m = psi.amplitudes.reshape(n, n)
    lhs = u @ m
    rhs = m @ u
    # (I ⊗ U^T) acting on the A index of m[se, a]: m @ (U^T)^T = m @ U
    return float(np.linalg.norm(lhs - rhs))
