"""Noise-channel builders and their HPTP inverses.

Channel conventions:

* amplitude damping (qubit): K0 = diag(1, sqrt(1-delta)), K1 =
  sqrt(delta)|0><1|; delta is the excited-state decay probability.
* depolarizing (any d): rho -> (1-delta) rho + delta Tr[rho] I/d.
* dephasing (qubit): rho -> (1-delta) rho + delta Z rho Z; inversion
  requires delta < 1/2.
* photon loss (truncated Fock space of dimension d): each photon is
  independently lost with probability delta; <n-k|K_k|n> =
  sqrt(C(n,k) (1-delta)^k delta^k ...) with binomial weights, which is
  exactly trace preserving on the truncated space.
"""

from dataclasses import dataclass
from math import comb, sqrt

import numpy as np

from . import channels as ch
from .errors import InvalidDelta, SingularChannel

KINDS = ("amplitude_damping", "depolarizing", "dephasing", "photon_loss")

QUBIT_KINDS = ("amplitude_damping", "depolarizing", "dephasing")

#: reject inversion when the channel superoperator is worse conditioned
COND_LIMIT = 1e12


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    delta: float
    dim: int = 2
    qubits: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidDelta(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.delta < 1.0:
            raise InvalidDelta(f"delta {self.delta} outside [0, 1)")
        if self.kind in QUBIT_KINDS:
            if self.dim != 2 ** self.qubits:
                raise InvalidDelta(f"{self.kind}: dim must be 2**qubits")
        elif self.qubits != 1:
            raise InvalidDelta("photon_loss: qubits parameter does not apply")


def _amplitude_damping_qubit(delta):
    k0 = np.diag([1.0, sqrt(1.0 - delta)]).astype(complex)
    k1 = np.zeros((2, 2), dtype=complex)
    k1[0, 1] = sqrt(delta)
    return ch.SignedKrausMap(dim=2, ops=[k0, k1], signs=[1, 1])


def _depolarizing(dim, delta):
    d2 = dim * dim
    ident_vec = np.eye(dim).flatten(order="F")
    s = (1.0 - delta) * np.eye(d2) + (delta / dim) * np.outer(ident_vec, ident_vec)
    return ch.signed_kraus_from_choi(ch.choi_from_superop(ch.Superoperator(dim=dim, mat=s)))


def _dephasing_qubit(delta):
    z = np.diag([1.0, -1.0]).astype(complex)
    return ch.SignedKrausMap(dim=2, ops=[sqrt(1.0 - delta) * np.eye(2), sqrt(delta) * z],
                             signs=[1, 1])


def _photon_loss(dim, delta):
    ops = []
    for k in range(dim):
        kk = np.zeros((dim, dim), dtype=complex)
        for n in range(k, dim):
            kk[n - k, n] = sqrt(comb(n, k) * (1.0 - delta) ** (n - k) * delta ** k)
        ops.append(kk)
    # drop identically-zero operators (k > max photon number), delta=0 tail
    ops = [k for k in ops if np.abs(k).max() > 0.0]
    return ch.SignedKrausMap(dim=dim, ops=ops, signs=[1] * len(ops))


def build_channel(spec: NoiseSpec) -> ch.SignedKrausMap:
    """The (CPTP) noise channel for a spec; tensor power for multi-qubit."""
    if spec.kind == "amplitude_damping":
        single = _amplitude_damping_qubit(spec.delta)
    elif spec.kind == "depolarizing":
        single = _depolarizing(2, spec.delta)
    elif spec.kind == "dephasing":
        single = _dephasing_qubit(spec.delta)
    else:
        return _photon_loss(spec.dim, spec.delta)
    out = single
    for _ in range(spec.qubits - 1):
        out = ch.tensor(out, single)
    return out


def invert_channel(spec: NoiseSpec) -> ch.SignedKrausMap:
    """The HPTP inverse of the noise channel.

    Dense superoperator inversion with a condition-number guard, then
    conversion back through the Choi representation.
    """
    if spec.kind == "dephasing" and spec.delta >= 0.5:
        raise InvalidDelta("dephasing is not invertible for delta >= 1/2")
    channel = build_channel(spec)
    s = ch.superop_from_map(channel).mat
    cond = np.linalg.cond(s)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularChannel(f"channel condition number {cond:.3e} exceeds {COND_LIMIT:.0e}")
    s_inv = np.linalg.inv(s)
    return ch.signed_kraus_from_choi(ch.choi_from_superop(ch.Superoperator(dim=channel.dim, mat=s_inv)))
