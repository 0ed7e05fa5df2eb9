"""Dynamical Lie algebra of a drift Hamiltonian plus controls on S."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .hilbert import HermitianOperator, SubsystemLayout, embed
from .scenarios import PAULI

__all__ = ["ControlProblem", "LieResult", "lie_closure", "controllability_report", "named_controls"]


@dataclass
class ControlProblem:
    """Drift on ``S ⊗ E`` plus control Hamiltonians supported on S."""

    drift: HermitianOperator
    controls: list = field(default_factory=list)

    def __post_init__(self):
        lay = self.drift.layout
        lifted = []
        for c in self.controls:
            if c.layout.factors != lay.factors:
                if "S" not in c.layout or c.layout.labels != ("S",):
                    raise numerics.DimensionError("controls must live on S or on the drift layout")
                c = embed(c, lay)
            lifted.append(c)
        self.controls = lifted

    @property
    def dim(self) -> int:
        return self.drift.layout.total_dim

    def generators(self) -> list:
        return [1j * self.drift.matrix] + [1j * c.matrix for c in self.controls]


@dataclass
class LieResult:
    dimension: int
    basis: list = field(repr=False)
    fully_controllable: bool
    iterations: int
    truncated: bool = False
    has_identity: bool = False

    def to_dict(self, full: bool = False) -> dict:
        d = {
            "dimension": self.dimension,
            "fully_controllable": self.fully_controllable,
            "has_identity": self.has_identity,
            "iterations": self.iterations,
            "truncated": self.truncated,
        }
        if full:
            d["basis"] = [{"re": b.real.tolist(), "im": b.imag.tolist()} for b in self.basis]
        return d


def named_controls(names, d_S: int) -> list:
    """Controls from the names ``X``, ``Y``, ``Z`` (qubit S only)."""
    lay = SubsystemLayout([("S", d_S)])
    out = []
    for name in names:
        if isinstance(name, str):
            if d_S != 2 or name not in PAULI or name == "I":
                raise ValueError(f"named control {name!r} needs a qubit S and one of X, Y, Z")
            out.append(HermitianOperator(lay, PAULI[name]))
        else:
            out.append(HermitianOperator(lay, numerics.as_cmatrix(name)))
    return out


class _Span:
    """Orthonormal real basis of a space of skew-Hermitian matrices."""

    def __init__(self, n: int, tol: float):
        self.n, self.tol = n, tol
        self.vecs = np.zeros((0, 2 * n * n))
        self.mats: list = []

    def add(self, m: np.ndarray) -> bool:
        v = np.concatenate([m.real.ravel(), m.imag.ravel()])
        norm = np.linalg.norm(v)
        if norm == 0:
            return False
        v = v / norm
        for _ in range(2):
            v = v - self.vecs.T @ (self.vecs @ v)
        resid = np.linalg.norm(v)
        if resid <= self.tol:
            return False
        v = v / resid
        self.vecs = np.vstack([self.vecs, v])
        half = self.n * self.n
        self.mats.append((v[:half] + 1j * v[half:]).reshape(self.n, self.n))
        return True


def lie_closure(problem: ControlProblem, tol: float = 1e-9, max_dim: int | None = None) -> LieResult:
    """Breadth-first commutator closure of ``{iH_drift, iH_controls}``.

    Every pair ``(j, k)`` of basis elements with ``j < k`` is commuted once;
    new directions are appended and paired in later sweeps. ``iterations``
    counts sweeps, that is the nesting depth of the longest commutator
    needed. Hitting ``max_dim`` stops the closure and flags the result.
    """
    n = problem.dim
    max_dim = n * n if max_dim is None else int(max_dim)
    span = _Span(n, tol)
    truncated = False
    for g in problem.generators():
        if len(span.mats) >= max_dim:
            truncated = True
            break
        span.add(g)
    done = 0  # elements [0, done) have been paired with each other
    sweeps = 0
    while not truncated and done < len(span.mats):
        sweeps += 1
        top = len(span.mats)
        for k in range(done, top):
            for j in range(k):
                if span.add(numerics.commutator(span.mats[j], span.mats[k])) and len(span.mats) >= max_dim:
                    truncated = True
                    break
            if truncated:
                break
        done = top
    basis = list(span.mats)
    has_identity = False
    if basis:
        ident = 1j * np.eye(n).ravel() / np.sqrt(n)
        flat = np.array([b.ravel() for b in basis])
        coef = (flat.conj() @ ident).real
        has_identity = bool(np.linalg.norm(ident - flat.T @ coef) < 1e-7)
    full = n > 1 and bool(basis) and _traceless_rank(basis, tol) == n * n - 1
    return LieResult(len(basis), basis, bool(full), sweeps, truncated, has_identity)


def _traceless_rank(basis: list, tol: float) -> int:
    n = basis[0].shape[0]
    vecs = []
    for b in basis:
        t = b - np.trace(b) / n * np.eye(n)
        vecs.append(np.concatenate([t.real.ravel(), t.imag.ravel()]))
    s = np.linalg.svd(np.array(vecs), compute_uv=False)
    return int(np.sum(s > tol * max(s[0], 1e-300)))


def controllability_report(problem: ControlProblem, full: bool = False) -> tuple:
    """``(LieResult, verdict)`` using default closure settings."""
    res = lie_closure(problem)
    n = problem.dim
    if res.fully_controllable:
        alg = "u" if res.has_identity else "su"
        verdict = f"fully controllable: the closure is {alg}({n}), dimension {res.dimension}"
    else:
        verdict = f"not fully controllable: closure has dimension {res.dimension} of {n * n - 1} (su({n}))"
        if full:
            verdict += "; orthonormal basis included"
    if res.truncated:
        verdict += " [truncated at max_dim]"
    return res, verdict
