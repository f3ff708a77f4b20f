"""Compile an HPTP map into one executable CPTP map plus reweighting.

The three steps:

1. Normalization: gamma = largest eigenvalue of sum_i K_i† K_i (the
   unsigned sum), rescale K_i -> K_i / sqrt(gamma).
2. Completion: if the rescaled set is not already complete, append the
   PSD square root of the completeness defect as one extra operator.
3. Post-processing weights: sign_i * gamma for the original branches,
   zero for the completion branch.

The binary-tree plan realizes the compiled Kraus set as a cascade of
two-outcome instruments, each dilated to a joint unitary with one
reusable ancilla qubit, plus a correction unitary at every leaf.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import channels as ch
from .errors import NotTracePreserving
from .numerics import (CMatrix, complete_isometry, eig_hermitian, op_norm, polar,
                       psd_sqrt, sup_norm)
from .tolerances import TOL


@dataclass(eq=False)
class CompiledCptp:
    """Executable CPTP map with classical post-processing weights."""

    dim: int
    kraus: list
    weights: list
    gamma: float
    completed: bool
    source_rank: int

    def __post_init__(self):
        acc = sum(k.conj().T @ k for k in self.kraus)
        defect = sup_norm(acc - np.eye(self.dim))
        if defect > TOL.tp:
            raise NotTracePreserving(f"CompiledCptp: completeness defect {defect:.3e}")
        if self.gamma < 1.0 - 1e-12:
            raise ValueError(f"CompiledCptp: gamma {self.gamma} < 1")
        if len(self.kraus) > self.source_rank + 1:
            raise ValueError("CompiledCptp: more than r+1 Kraus operators")

    @property
    def branch_count(self) -> int:
        return len(self.kraus)

    def reweighted_action(self, rho: CMatrix) -> CMatrix:
        """sum_i w_i K~_i rho K~_i†; equals the source HPTP map's action."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for w, k in zip(self.weights, self.kraus):
            if w != 0.0:
                out += w * (k @ rho @ k.conj().T)
        return out

    def as_channel(self) -> ch.SignedKrausMap:
        """The physically executed CPTP map (all signs +1)."""
        return ch.SignedKrausMap(dim=self.dim, ops=list(self.kraus), signs=[1] * len(self.kraus))


def compile_map(m: ch.SignedKrausMap) -> CompiledCptp:
    """Run the three-step construction on a signed Kraus map."""
    d = m.dim
    unsigned = sum(k.conj().T @ k for k in m.ops)
    gamma = op_norm(unsigned)
    if gamma < 1.0 and gamma > 1.0 - 1e-12:
        gamma = 1.0  # CPTP input with rounding noise
    scaled = [k / math.sqrt(gamma) for k in m.ops]
    defect = np.eye(d) - sum(k.conj().T @ k for k in scaled)
    completed = sup_norm(defect) > TOL.tp
    kraus = list(scaled)
    weights = [float(s) * gamma for s in m.signs]
    if completed:
        kraus.append(psd_sqrt(defect))
        weights.append(0.0)
    return CompiledCptp(dim=d, kraus=kraus, weights=weights, gamma=gamma,
                        completed=completed, source_rank=m.rank)


# ---------------------------------------------------------------------------
# binary-tree instrument plan
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class TreeLeaf:
    branch: int            # index into the compiled Kraus list
    correction: CMatrix    # unitary V with V * (path product) = K~_branch


@dataclass(eq=False)
class TreeNode:
    branches: list         # compiled-Kraus indices routed through this node
    m0: CMatrix
    m1: CMatrix
    dilation: CMatrix      # 2d x 2d unitary embedding [m0; m1] on the support
    support: CMatrix       # orthonormal basis (d x s) of the arrival operator
    left: object           # TreeNode | TreeLeaf
    right: object


@dataclass(eq=False)
class TreePlan:
    dim: int
    depth: int
    root: object           # TreeNode | TreeLeaf
    leaf_order: list = field(default_factory=list)


def _branch_order(c: CompiledCptp):
    # Descending weight magnitude, ties by index: deterministic plans.
    return sorted(range(c.branch_count), key=lambda i: (-abs(c.weights[i]), i))


def _gram_svd(c: CompiledCptp, branches):
    """SVD of the stacked Kraus block for a branch set.

    Working from the stacked block keeps the singular values of
    G_T = sum K† K first-order accurate; squaring first would turn
    rounding noise near zero into sqrt-amplified artifacts.
    """
    b = np.vstack([c.kraus[i] for i in branches])
    _, s, vh = np.linalg.svd(b, full_matrices=False)
    return s, vh


def _gram_sqrt(s, vh) -> CMatrix:
    g = (vh.conj().T * s) @ vh
    return (g + g.conj().T) / 2


def _gram_pinv_sqrt(s, vh) -> CMatrix:
    top = float(s[0]) if s.size else 0.0
    inv = np.where(s > TOL.rank * top, 1.0 / np.clip(s, 1e-300, None), 0.0)
    g = (vh.conj().T * inv) @ vh
    return (g + g.conj().T) / 2


def _gram_support(s, vh) -> CMatrix:
    top = float(s[0]) if s.size else 0.0
    keep = s > TOL.rank * top
    return vh.conj().T[:, keep]


def _gram(c: CompiledCptp, branches) -> CMatrix:
    g = np.zeros((c.dim, c.dim), dtype=complex)
    for i in branches:
        k = c.kraus[i]
        g += k.conj().T @ k
    return (g + g.conj().T) / 2


def _build(c: CompiledCptp, branches):
    if len(branches) == 1:
        i = branches[0]
        v, _ = polar(c.kraus[i])
        return TreeLeaf(branch=i, correction=v)
    half = (len(branches) + 1) // 2  # left-heavy split
    s0, s1 = branches[:half], branches[half:]
    sv, vh = _gram_svd(c, branches)
    g_inv_sqrt = _gram_pinv_sqrt(sv, vh)
    m0 = _gram_sqrt(*_gram_svd(c, s0)) @ g_inv_sqrt
    m1 = _gram_sqrt(*_gram_svd(c, s1)) @ g_inv_sqrt
    w = _gram_support(sv, vh)
    stacked = np.vstack([m0 @ w, m1 @ w])
    u = complete_isometry(stacked)
    return TreeNode(branches=list(branches), m0=m0, m1=m1, dilation=u,
                    support=w, left=_build(c, s0), right=_build(c, s1))


def build_tree_plan(c: CompiledCptp) -> TreePlan:
    order = _branch_order(c)
    root = _build(c, order)
    depth = math.ceil(math.log2(c.branch_count)) if c.branch_count > 1 else 0
    return TreePlan(dim=c.dim, depth=depth, root=root, leaf_order=order)


@dataclass
class TreeCheck:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


@dataclass
class TreeReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]


def verify_tree_plan(plan: TreePlan, c: CompiledCptp) -> TreeReport:
    """Check node completeness on support, dilation unitarity, path
    reconstruction of every compiled Kraus operator, and the depth."""
    checks = []
    d = c.dim

    def walk(node, prefix, level):
        if isinstance(node, TreeLeaf):
            k_rec = node.correction @ prefix
            res = sup_norm(k_rec - c.kraus[node.branch])
            checks.append(TreeCheck(f"leaf[{node.branch}] path reconstruction", res, 1e-9))
            checks.append(TreeCheck(
                f"leaf[{node.branch}] correction unitary",
                sup_norm(node.correction.conj().T @ node.correction - np.eye(d)), 1e-10))
            return level
        w = _gram_support(*_gram_svd(c, node.branches))
        proj = w @ w.conj().T
        comp = node.m0.conj().T @ node.m0 + node.m1.conj().T @ node.m1
        checks.append(TreeCheck(
            f"node{node.branches} completeness on support", sup_norm(comp - proj), 1e-9))
        u = node.dilation
        checks.append(TreeCheck(
            f"node{node.branches} dilation unitarity",
            sup_norm(u.conj().T @ u - np.eye(2 * d)), 1e-10))
        stacked = np.vstack([node.m0 @ node.support, node.m1 @ node.support])
        checks.append(TreeCheck(
            f"node{node.branches} dilation embeds instrument",
            sup_norm(u[:, : stacked.shape[1]] - stacked), 1e-12))
        lv0 = walk(node.left, node.m0 @ prefix, level + 1)
        lv1 = walk(node.right, node.m1 @ prefix, level + 1)
        return max(lv0, lv1)

    measured_depth = walk(plan.root, np.eye(d), 0)
    expected = math.ceil(math.log2(c.branch_count)) if c.branch_count > 1 else 0
    checks.append(TreeCheck("depth == ceil(log2(branches))",
                            float(abs(measured_depth - expected) + abs(plan.depth - expected)), 0.0))
    return TreeReport(checks=checks)


# ---------------------------------------------------------------------------
# two-CPTP positive/negative baseline
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class BaselinePart:
    eta: float
    channel: ch.SignedKrausMap      # completed CPTP map, all signs +1
    part_rank: int                  # Choi rank of the raw eigenvalue part
    completed: bool

    @property
    def rank(self) -> int:
        """Kraus rank of the completed CPTP map."""
        return self.channel.rank

    def scaled_action(self, rho: CMatrix) -> CMatrix:
        return self.eta * ch.apply(self.channel, rho)


def _complete_part(dim, lam_part, part_rank):
    trace_out = ch.partial_trace_output(lam_part, dim)
    eta = op_norm(trace_out)
    if eta <= TOL.rank:
        return BaselinePart(eta=0.0, channel=ch.SignedKrausMap.identity(dim),
                            part_rank=0, completed=False)
    # Tensor completion: fills the trace deficit with a maximally mixed
    # output block, keeping the part CP and making it exactly TP.
    filler = np.kron(eta * np.eye(dim) - trace_out, np.eye(dim) / dim)
    completed = sup_norm(filler) > TOL.tp
    choi = ch.ChoiMatrix(dim=dim, mat=(lam_part + filler) / eta)
    channel = ch.signed_kraus_from_choi(choi)
    return BaselinePart(eta=eta, channel=channel, part_rank=part_rank, completed=completed)


def positive_negative_baseline(m: ch.SignedKrausMap):
    """Canonical (non-SDP) two-CPTP split from the Choi eigenvalue signs.

    Lambda = Lambda_+ - Lambda_-; each part is scaled by the largest
    eigenvalue of its output partial trace and completed with the tensor
    filler above. Because Tr_out Lambda_+ = I + Tr_out Lambda_-, the two
    fillers coincide and eta_pos * cptp_pos - eta_neg * cptp_neg
    reproduces the map exactly. Returns (positive part, negative part).
    """
    lam = ch.choi_from_map(m).mat
    es = eig_hermitian(lam)
    cut = TOL.rank * float(np.abs(es.values).max())
    d2 = m.dim * m.dim
    lam_pos = np.zeros((d2, d2), dtype=complex)
    lam_neg = np.zeros((d2, d2), dtype=complex)
    n_pos = n_neg = 0
    for val, v in zip(es.values, es.vectors.T):
        if val > cut:
            lam_pos += val * np.outer(v, v.conj())
            n_pos += 1
        elif val < -cut:
            lam_neg += -val * np.outer(v, v.conj())
            n_neg += 1
    return (_complete_part(m.dim, lam_pos, n_pos),
            _complete_part(m.dim, lam_neg, n_neg))
