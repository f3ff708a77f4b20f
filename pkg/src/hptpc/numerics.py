"""Dense complex-matrix kernel: decompositions, norms and reshaping.

All heavy lifting is delegated to LAPACK through numpy; this module pins
the conventions (eigenvalue ordering, vec direction, deterministic
unitary completion) that the rest of the package relies on.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, NonSquare, NotHermitian, NotIsometry, NotPsd
from .tolerances import TOL

# Raw storage for all operators: complex128 ndarray, row-major.
CMatrix = np.ndarray


def asmatrix(a) -> CMatrix:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN/Inf entries")
    return m


def sup_norm(a) -> float:
    """Largest entry magnitude."""
    a = np.asarray(a)
    return float(np.abs(a).max()) if a.size else 0.0


def _check_square(a, who):
    if a.shape[0] != a.shape[1]:
        raise NonSquare(f"{who}: matrix is {a.shape[0]}x{a.shape[1]}")


def _check_hermitian(a, who):
    # sup |entry| lower-bounds the operator norm, so this is at least as
    # strict as the relative-to-op-norm contract.
    scale = max(1.0, sup_norm(a))
    defect = sup_norm(a - a.conj().T)
    if defect > TOL.herm * scale:
        raise NotHermitian(f"{who}: Hermiticity defect {defect:.3e} (scale {scale:.3e})")


@dataclass
class EigenSystem:
    """Eigenvalues sorted descending with matching orthonormal columns."""

    values: np.ndarray
    vectors: CMatrix


def eig_hermitian(a: CMatrix) -> EigenSystem:
    """Full eigendecomposition of a Hermitian matrix.

    The input is symmetrized as (A + A†)/2 before the solve; callers
    guarantee Hermiticity up to tolerance and get NotHermitian otherwise.
    """
    a = asmatrix(a)
    _check_square(a, "eig_hermitian")
    _check_hermitian(a, "eig_hermitian")
    h = (a + a.conj().T) / 2.0
    try:
        vals, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise ConvergenceFailure(str(exc)) from exc
    order = np.argsort(vals)[::-1]
    return EigenSystem(values=vals[order], vectors=vecs[:, order])


def op_norm(a: CMatrix) -> float:
    """Largest eigenvalue magnitude (Hermitian input only)."""
    a = asmatrix(a)
    _check_square(a, "op_norm")
    _check_hermitian(a, "op_norm")
    vals = np.linalg.eigvalsh((a + a.conj().T) / 2.0)
    return float(np.abs(vals).max()) if vals.size else 0.0


def trace_norm(a: CMatrix) -> float:
    """Sum of eigenvalue magnitudes (Hermitian input only)."""
    a = asmatrix(a)
    _check_square(a, "trace_norm")
    _check_hermitian(a, "trace_norm")
    vals = np.linalg.eigvalsh((a + a.conj().T) / 2.0)
    return float(np.abs(vals).sum())


def psd_sqrt(a: CMatrix) -> CMatrix:
    """Hermitian square root of a PSD matrix.

    Eigenvalues within -psd_tol of zero are clamped to zero; anything
    below that raises NotPsd.
    """
    es = eig_hermitian(a)
    scale = max(1.0, float(np.abs(es.values).max()) if es.values.size else 0.0)
    floor = -TOL.psd * scale
    if es.values.size and es.values.min() < floor:
        raise NotPsd(f"psd_sqrt: eigenvalue {es.values.min():.3e} below {floor:.3e}")
    vals = np.clip(es.values, 0.0, None)
    v = es.vectors
    b = (v * np.sqrt(vals)) @ v.conj().T
    return (b + b.conj().T) / 2.0


def pinv_sqrt(a: CMatrix) -> CMatrix:
    """Pseudo-inverse square root of a PSD matrix, on its support.

    Eigenvalues at or below the relative rank cutoff are treated as zero.
    """
    es = eig_hermitian(a)
    top = float(es.values.max()) if es.values.size else 0.0
    cut = TOL.rank * max(top, 0.0)
    inv = np.where(es.values > cut, 1.0 / np.sqrt(np.clip(es.values, 1e-300, None)), 0.0)
    v = es.vectors
    b = (v * inv) @ v.conj().T
    return (b + b.conj().T) / 2.0


def support_basis(a: CMatrix) -> CMatrix:
    """Orthonormal columns spanning the support of a PSD matrix."""
    es = eig_hermitian(a)
    top = float(es.values.max()) if es.values.size else 0.0
    cut = TOL.rank * max(top, 0.0)
    keep = es.values > cut
    return es.vectors[:, keep]


def complete_isometry(b: CMatrix) -> CMatrix:
    """Extend an isometry (n x k, B†B = I_k) to an n x n unitary.

    The first k columns of the result equal B exactly. The complement is
    built by Gram-Schmidt over standard basis vectors in index order,
    skipping candidates whose residual falls below the skip threshold,
    which makes the completion deterministic.
    """
    b = asmatrix(b)
    n, k = b.shape
    if k > n:
        raise NotIsometry(f"complete_isometry: more columns ({k}) than rows ({n})")
    gram = b.conj().T @ b
    if sup_norm(gram - np.eye(k)) > 1e-9:
        raise NotIsometry(f"complete_isometry: B†B deviates from I by {sup_norm(gram - np.eye(k)):.3e}")
    cols = [b[:, j].copy() for j in range(k)]
    for j in range(n):
        if len(cols) == n:
            break
        v = np.zeros(n, dtype=complex)
        v[j] = 1.0
        for _ in range(2):  # re-orthogonalize once for stability
            for c in cols:
                v = v - c * np.vdot(c, v)
        nv = np.linalg.norm(v)
        if nv < TOL.gs_skip:
            continue
        cols.append(v / nv)
    if len(cols) != n:
        raise ConvergenceFailure("complete_isometry: could not complete the basis")
    return np.column_stack(cols)


def polar(k: CMatrix):
    """Polar decomposition K = V P with P = psd_sqrt(K†K) and V unitary.

    V is fixed on the support of P by K itself and completed
    deterministically on the orthogonal complement.
    """
    k = asmatrix(k)
    _check_square(k, "polar")
    d = k.shape[0]
    u, s, vh = np.linalg.svd(k)
    top = float(s[0]) if s.size else 0.0
    keep = s > TOL.rank * top
    p = (vh.conj().T * s) @ vh                   # psd_sqrt(K†K)
    p = (p + p.conj().T) / 2
    w = vh.conj().T[:, keep]                     # support basis of P
    c = u[:, keep]                               # matching image columns
    w_full = complete_isometry(w) if w.shape[1] < d else w
    c_full = complete_isometry(c) if c.shape[1] < d else c
    v = c_full @ w_full.conj().T
    return v, p


def vec(m: CMatrix) -> np.ndarray:
    """Column-stacking vectorization."""
    m = asmatrix(m)
    return m.flatten(order="F")


def unvec(v: np.ndarray) -> CMatrix:
    """Inverse of :func:`vec`; requires a perfect-square length."""
    v = np.asarray(v, dtype=complex).ravel()
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise DimensionMismatch(f"unvec: length {v.size} is not a perfect square")
    return v.reshape((d, d), order="F")
