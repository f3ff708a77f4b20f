import numpy as np
import pytest

from hptpc import channels as ch


SWAP = np.array([[1, 0, 0, 0],
                 [0, 0, 1, 0],
                 [0, 1, 0, 0],
                 [0, 0, 0, 1]], dtype=complex)


def transpose_map(d=2) -> ch.SignedKrausMap:
    """The qubit transpose map via its superoperator (the commutation
    matrix), used as the canonical non-CP HPTP example."""
    p = np.zeros((d * d, d * d))
    for a in range(d):
        for j in range(d):
            p[a * d + j, j * d + a] = 1.0
    return ch.signed_kraus_from_choi(ch.choi_from_superop(ch.Superoperator(dim=d, mat=p)))


def basis_matrices(d):
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1.0
            yield e


def max_action_diff(act_a, act_b, d):
    return max(float(np.abs(act_a(e) - act_b(e)).max()) for e in basis_matrices(d))


@pytest.fixture(scope="session")
def hptp_corpus():
    """200 seeded random HPTP maps with d in {2, 3, 4}."""
    rng = np.random.default_rng(20240817)
    maps = []
    for i in range(200):
        d = 2 + i % 3
        maps.append(ch.random_hptp_map(d, rng))
    return maps
