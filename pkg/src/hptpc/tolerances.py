"""Shared numerical tolerances.

Every module and every test reads these constants from here, so the
operations and the checks that gate them can never drift apart.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    #: sup-norm bound on V†V - I for eigenvector sets
    orth: float = 1e-10
    #: relative slack below zero tolerated (and clamped) for PSD spectra
    psd: float = 1e-9
    #: sup-norm residual of the trace-preservation condition
    tp: float = 1e-9
    #: relative eigenvalue cutoff deciding the Kraus rank
    rank: float = 1e-10
    #: relative Hermiticity defect accepted on input matrices
    herm: float = 1e-9
    #: Gram-Schmidt residual below which a candidate basis vector is skipped
    gs_skip: float = 1e-12


TOL = Tolerances()
