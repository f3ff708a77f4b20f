"""Quantum states, observables and map representations.

Conventions (fixed once, used everywhere):

* ``vec`` stacks columns (Fortran order).
* The Choi matrix is the unnormalized one, Lambda = sum_{jk} |j><k| (x)
  N(|j><k|), with the input factor first; Tr Lambda = d for TP maps.
* Under these two choices the Kraus operator of an eigenpair (lam, v) of
  Lambda is exactly ``unvec(sqrt(|lam|) v)``, and a superoperator acts as
  ``vec(N(rho)) = S vec(rho)`` with ``S = sum_i sign_i conj(K_i) (x) K_i``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, NotHermitian, NotTracePreserving
from .numerics import (CMatrix, EigenSystem, asmatrix, eig_hermitian, sup_norm, unvec, vec)
from .tolerances import TOL


def _check_dim(mat, dim, who):
    if mat.shape != (dim, dim):
        raise DimensionMismatch(f"{who}: expected {dim}x{dim}, got {mat.shape}")


@dataclass(frozen=True)
class DensityMatrix:
    dim: int
    mat: CMatrix

    def __post_init__(self):
        m = asmatrix(self.mat)
        _check_dim(m, self.dim, "DensityMatrix")
        if sup_norm(m - m.conj().T) > 1e-10:
            raise NotHermitian("DensityMatrix: not Hermitian within 1e-10")
        if abs(np.trace(m) - 1.0) > 1e-10:
            raise ValueError(f"DensityMatrix: trace {np.trace(m):.6f} != 1")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -1e-10:
            raise ValueError("DensityMatrix: negative eigenvalue beyond 1e-10")
        object.__setattr__(self, "mat", m)

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(dim=psi.size, mat=np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, dim) -> "DensityMatrix":
        return cls(dim=dim, mat=np.eye(dim) / dim)


@dataclass(eq=False)
class Observable:
    dim: int
    mat: CMatrix

    def __post_init__(self):
        m = asmatrix(self.mat)
        _check_dim(m, self.dim, "Observable")
        if sup_norm(m - m.conj().T) > 1e-10:
            raise NotHermitian("Observable: not Hermitian within 1e-10")
        self.mat = (m + m.conj().T) / 2

    @cached_property
    def spectrum(self) -> EigenSystem:
        return eig_hermitian(self.mat)


@dataclass(eq=False)
class SignedKrausMap:
    """An HPTP map as Kraus operators with +-1 signs.

    N(rho) = sum_i sign_i K_i rho K_i†, with the trace-preserving
    condition sum_i sign_i K_i† K_i = I enforced at construction.
    """

    dim: int
    ops: list
    signs: list

    def __post_init__(self):
        if len(self.ops) != len(self.signs):
            raise DimensionMismatch("SignedKrausMap: ops/signs length mismatch")
        ops = [asmatrix(k) for k in self.ops]
        for k in ops:
            _check_dim(k, self.dim, "SignedKrausMap")
        signs = [int(s) for s in self.signs]
        if any(s not in (1, -1) for s in signs):
            raise ValueError("SignedKrausMap: signs must be +1 or -1")
        acc = sum(s * (k.conj().T @ k) for s, k in zip(signs, ops))
        defect = sup_norm(acc - np.eye(self.dim))
        if defect > TOL.tp:
            raise NotTracePreserving(f"SignedKrausMap: TP defect {defect:.3e} > {TOL.tp:.0e}")
        self.ops = ops
        self.signs = signs

    @property
    def rank(self) -> int:
        return len(self.ops)

    @classmethod
    def identity(cls, dim) -> "SignedKrausMap":
        return cls(dim=dim, ops=[np.eye(dim)], signs=[1])


@dataclass(frozen=True)
class ChoiMatrix:
    """The unnormalized Choi operator, Tr Lambda = d for TP maps."""

    dim: int
    mat: CMatrix

    def __post_init__(self):
        m = asmatrix(self.mat)
        d = self.dim
        _check_dim(m, d * d, "ChoiMatrix")
        if sup_norm(m - m.conj().T) > 1e-10:
            raise NotHermitian("ChoiMatrix: not Hermitian within 1e-10")
        tp = sup_norm(partial_trace_output(m, d) - np.eye(d))
        if tp > TOL.tp:
            raise NotTracePreserving(f"ChoiMatrix: TP defect {tp:.3e}")
        object.__setattr__(self, "mat", m)


@dataclass(frozen=True)
class Superoperator:
    """Matrix acting on vec(rho) under the column-stacking convention."""

    dim: int
    mat: CMatrix

    def __post_init__(self):
        m = asmatrix(self.mat)
        _check_dim(m, self.dim * self.dim, "Superoperator")
        object.__setattr__(self, "mat", m)


# ---------------------------------------------------------------------------
# map action
# ---------------------------------------------------------------------------

def apply(m: SignedKrausMap, rho: CMatrix) -> CMatrix:
    """Evaluate sum_i sign_i K_i rho K_i†."""
    rho = asmatrix(rho)
    _check_dim(rho, m.dim, "apply")
    out = np.zeros((m.dim, m.dim), dtype=complex)
    for s, k in zip(m.signs, m.ops):
        out += s * (k @ rho @ k.conj().T)
    return out


def map_on_identity(m: SignedKrausMap) -> CMatrix:
    return apply(m, np.eye(m.dim))


# ---------------------------------------------------------------------------
# representation conversions
# ---------------------------------------------------------------------------

def partial_trace_output(choi_mat: CMatrix, d: int) -> CMatrix:
    """Trace the output (second) tensor factor of a d^2 x d^2 Choi matrix."""
    return np.trace(choi_mat.reshape(d, d, d, d), axis1=1, axis2=3)


def partial_trace_input(choi_mat: CMatrix, d: int) -> CMatrix:
    """Trace the input (first) factor; equals N(I) for the represented map."""
    return np.trace(choi_mat.reshape(d, d, d, d), axis1=0, axis2=2)


def choi_from_map(m: SignedKrausMap) -> ChoiMatrix:
    lam = np.zeros((m.dim ** 2, m.dim ** 2), dtype=complex)
    for s, k in zip(m.signs, m.ops):
        v = vec(k)
        lam += s * np.outer(v, v.conj())
    return ChoiMatrix(dim=m.dim, mat=(lam + lam.conj().T) / 2)


def superop_from_map(m: SignedKrausMap) -> Superoperator:
    s_mat = np.zeros((m.dim ** 2, m.dim ** 2), dtype=complex)
    for s, k in zip(m.signs, m.ops):
        s_mat += s * np.kron(k.conj(), k)
    return Superoperator(dim=m.dim, mat=s_mat)


def _reshuffle(mat: CMatrix, d: int) -> CMatrix:
    # Involutive index shuffle relating Choi and superoperator layouts
    # under the column-stacking vec convention.
    return mat.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d * d, d * d)


def superop_from_choi(c: ChoiMatrix) -> Superoperator:
    return Superoperator(dim=c.dim, mat=_reshuffle(c.mat, c.dim))


def choi_from_superop(s: Superoperator) -> ChoiMatrix:
    return ChoiMatrix(dim=s.dim, mat=_reshuffle(s.mat, s.dim))


def signed_kraus_from_choi(c: ChoiMatrix) -> SignedKrausMap:
    """Extract signed Kraus operators from the Choi eigensystem.

    Eigenpairs with |lam| at or below the relative rank cutoff are
    dropped; the sign of each retained eigenvalue becomes the Kraus sign.
    """
    es = eig_hermitian(c.mat)
    scale = float(np.abs(es.values).max()) if es.values.size else 0.0
    cut = TOL.rank * scale
    ops, signs = [], []
    for lam, v in zip(es.values, es.vectors.T):
        if abs(lam) <= cut:
            continue
        # Fix the free global phase: largest-magnitude component real positive.
        pivot = int(np.argmax(np.abs(v)))
        phase = v[pivot] / abs(v[pivot])
        v = v * phase.conjugate()
        ops.append(unvec(np.sqrt(abs(lam)) * v))
        signs.append(1 if lam > 0 else -1)
    return SignedKrausMap(dim=c.dim, ops=ops, signs=signs)


def signed_kraus_from_superop(s: Superoperator) -> SignedKrausMap:
    return signed_kraus_from_choi(choi_from_superop(s))


def as_choi(obj) -> ChoiMatrix:
    if isinstance(obj, ChoiMatrix):
        return obj
    if isinstance(obj, SignedKrausMap):
        return choi_from_map(obj)
    if isinstance(obj, Superoperator):
        return choi_from_superop(obj)
    raise TypeError(f"not a map representation: {type(obj)!r}")


def as_superop(obj) -> Superoperator:
    if isinstance(obj, Superoperator):
        return obj
    if isinstance(obj, SignedKrausMap):
        return superop_from_map(obj)
    if isinstance(obj, ChoiMatrix):
        return superop_from_choi(obj)
    raise TypeError(f"not a map representation: {type(obj)!r}")


def as_signed_kraus(obj) -> SignedKrausMap:
    if isinstance(obj, SignedKrausMap):
        return obj
    return signed_kraus_from_choi(as_choi(obj))


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelFlags:
    is_hp: bool
    is_tp: bool
    is_cp: bool
    is_unital: bool
    diagnostics: dict = field(default_factory=dict)


def classify(obj) -> ChannelFlags:
    """HP/TP/CP/unital flags with the violating magnitudes as diagnostics."""
    if isinstance(obj, SignedKrausMap):
        lam = np.zeros((obj.dim ** 2, obj.dim ** 2), dtype=complex)
        for s, k in zip(obj.signs, obj.ops):
            v = vec(k)
            lam += s * np.outer(v, v.conj())
        d = obj.dim
    else:
        c = as_choi(obj)
        lam, d = c.mat, c.dim
    herm_defect = sup_norm(lam - lam.conj().T)
    lam_h = (lam + lam.conj().T) / 2
    tp_defect = sup_norm(partial_trace_output(lam_h, d) - np.eye(d))
    min_eig = float(np.linalg.eigvalsh(lam_h).min())
    scale = max(1.0, float(np.abs(np.linalg.eigvalsh(lam_h)).max()))
    unital_defect = sup_norm(partial_trace_input(lam_h, d) - np.eye(d))
    return ChannelFlags(
        is_hp=herm_defect <= 1e-10 * max(1.0, sup_norm(lam)),
        is_tp=tp_defect <= TOL.tp,
        is_cp=min_eig >= -TOL.psd * scale,
        is_unital=unital_defect <= TOL.tp,
        diagnostics={
            "hermiticity_defect": herm_defect,
            "tp_defect": tp_defect,
            "min_choi_eigenvalue": min_eig,
            "unital_defect": unital_defect,
        },
    )


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

def _drop_zero_ops(ops, signs):
    if not ops:
        return ops, signs
    scale = max(sup_norm(k) for k in ops)
    kept = [(k, s) for k, s in zip(ops, signs) if sup_norm(k) > TOL.rank * scale]
    return [k for k, _ in kept], [s for _, s in kept]


def compose(a: SignedKrausMap, b: SignedKrausMap) -> SignedKrausMap:
    """The map a∘b (b applied first). The result is a non-minimal
    representation with up to rank(a)*rank(b) operators."""
    if a.dim != b.dim:
        raise DimensionMismatch("compose: dimension mismatch")
    ops, signs = [], []
    for sa, ka in zip(a.signs, a.ops):
        for sb, kb in zip(b.signs, b.ops):
            ops.append(ka @ kb)
            signs.append(sa * sb)
    ops, signs = _drop_zero_ops(ops, signs)
    return SignedKrausMap(dim=a.dim, ops=ops, signs=signs)


def tensor(a: SignedKrausMap, b: SignedKrausMap) -> SignedKrausMap:
    ops, signs = [], []
    for sa, ka in zip(a.signs, a.ops):
        for sb, kb in zip(b.signs, b.ops):
            ops.append(np.kron(ka, kb))
            signs.append(sa * sb)
    ops, signs = _drop_zero_ops(ops, signs)
    return SignedKrausMap(dim=a.dim * b.dim, ops=ops, signs=signs)


# ---------------------------------------------------------------------------
# random-map corpus (test plumbing)
# ---------------------------------------------------------------------------

def random_hptp_map(dim: int, rng: np.random.Generator) -> SignedKrausMap:
    """A random HPTP map: random Hermitian Choi, projected to exact TP.

    The affine projection adds ((I - Tr_out Lambda0)/d) (x) I in the
    input factor, which fixes the partial trace without touching
    Hermiticity.
    """
    d2 = dim * dim
    g = rng.standard_normal((d2, d2)) + 1j * rng.standard_normal((d2, d2))
    lam0 = (g + g.conj().T) / 2
    corr = (np.eye(dim) - partial_trace_output(lam0, dim)) / dim
    lam = lam0 + np.kron(corr, np.eye(dim))
    return signed_kraus_from_choi(ChoiMatrix(dim=dim, mat=lam))
