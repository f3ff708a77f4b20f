"""Experiment orchestration: desk-scale noise-mitigation sweeps.

``run_fig2`` sweeps noise kind and level for one- and two-qubit systems;
``run_fig3`` sweeps the system dimension for photon loss at fixed error
rate. Both emit a ResultTable whose CSV schema is frozen and versioned.
``run_verify`` executes the cross-module property suites.

Reproducibility: every grid task derives its own generator from
``(master seed, task tag)``, tasks are dispatched to a thread pool and
merged in task order, so outputs are byte-identical for any worker
count.
"""

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import channels as ch
from . import noise as nz
from . import sampler as sm
from .compiler import compile_map, build_tree_plan, verify_tree_plan, positive_negative_baseline
from .errors import NotTracePreserving

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "schema_version", "experiment", "kind", "delta", "dim",
    "empirical_var_mean", "eq6_var_mean", "haar_var_mean", "haar_var_single",
    "haar_mc_single", "gamma", "source_rank", "compiled_rank",
    "baseline_pos_rank", "baseline_neg_rank", "shots", "repetitions",
    "n_states", "n_observables", "seed",
]

FIG2_KINDS = ("amplitude_damping", "depolarizing", "dephasing")
FIG2_DELTAS = (0.05, 0.1, 0.2, 0.3)


@dataclass
class ExperimentConfig:
    experiment: str = "fig2"
    kinds: tuple = FIG2_KINDS
    deltas: tuple = FIG2_DELTAS
    dims: tuple = (2, 4)
    n_states: int = 10
    n_observables: int = 10
    shots: int = 1000
    repetitions: int = 2000
    haar_samples: int = 2000
    seed: int = 0
    out_dir: str = "."
    paired: bool = False
    poison: bool = False

    def __post_init__(self):
        for name in ("n_states", "n_observables", "shots", "repetitions", "haar_samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for delta in self.deltas:
            if not 0.0 <= delta < 1.0:
                raise ValueError(f"delta {delta} outside [0, 1)")

    @classmethod
    def quick(cls, **kw) -> "ExperimentConfig":
        base = dict(n_states=3, n_observables=3, shots=200, repetitions=200,
                    haar_samples=200)
        base.update(kw)
        return cls(**base)

    @classmethod
    def full_scale(cls, **kw) -> "ExperimentConfig":
        """Overnight-scale protocol: 10^4 repetitions of 10^3 shots per pair."""
        base = dict(repetitions=10_000, haar_samples=10_000)
        base.update(kw)
        return cls(**base)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        for key in ("kinds", "deltas", "dims"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("kinds", "deltas", "dims"):
            d[key] = list(d[key])
        return d


@dataclass
class ResultRow:
    experiment: str
    kind: str
    delta: float
    dim: int
    empirical_var_mean: float = None
    eq6_var_mean: float = None
    haar_var_mean: float = None
    haar_var_single: float = None
    haar_mc_single: float = None
    gamma: float = None
    source_rank: int = None
    compiled_rank: int = None
    baseline_pos_rank: int = None
    baseline_neg_rank: int = None
    shots: int = None
    repetitions: int = None
    n_states: int = None
    n_observables: int = None
    seed: int = None


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    #: per-row diagnostics that do not go to CSV (e.g. per-pair variances)
    details: dict = field(default_factory=dict)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            d = asdict(r)
            d["schema_version"] = SCHEMA_VERSION
            w.writerow([_cell(d[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "ResultTable":
        rows = []
        reader = csv.DictReader(io.StringIO(text))
        for rec in reader:
            kw = {}
            for f_ in ResultRow.__dataclass_fields__.values():
                raw = rec[f_.name]
                if raw == "":
                    kw[f_.name] = None
                elif f_.type is int or f_.name in ("dim", "source_rank"):
                    kw[f_.name] = int(raw)
                elif f_.name in ("experiment", "kind"):
                    kw[f_.name] = raw
                else:
                    kw[f_.name] = float(raw)
            for name in ("source_rank", "compiled_rank", "baseline_pos_rank",
                         "baseline_neg_rank", "shots", "repetitions",
                         "n_states", "n_observables", "seed"):
                if kw[name] is not None:
                    kw[name] = int(float(kw[name]))
            rows.append(ResultRow(**kw))
        return cls(rows=rows)


def worker_count() -> int:
    env = os.environ.get("HPTPC_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def _run_tasks(tasks):
    """Execute callables on the pool; merge results in task order."""
    n = worker_count()
    if n == 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def pauli_z(n_qubits: int) -> np.ndarray:
    z = np.diag([1.0, -1.0])
    out = np.array([[1.0]])
    for _ in range(n_qubits):
        out = np.kron(out, z)
    return out


def fock_parity_like(d: int) -> np.ndarray:
    """I_d - 2 |d-1><d-1|: identity minus twice the top Fock projector."""
    m = np.eye(d)
    m[d - 1, d - 1] = -1.0
    return m


def base_observable(kind: str, dim: int) -> ch.Observable:
    if kind == "photon_loss":
        return ch.Observable(dim=dim, mat=fock_parity_like(dim))
    n = int(round(math.log2(dim)))
    return ch.Observable(dim=dim, mat=pauli_z(n))


# ---------------------------------------------------------------------------
# fig. 2 style sweep: variance vs noise level
# ---------------------------------------------------------------------------

def _noise_spec(kind, delta, dim):
    if kind == "photon_loss":
        return nz.NoiseSpec(kind=kind, delta=delta, dim=dim)
    n = int(round(math.log2(dim)))
    return nz.NoiseSpec(kind=kind, delta=delta, dim=dim, qubits=n)


def _pair_indices(cfg):
    if cfg.paired:
        n = min(cfg.n_states, cfg.n_observables)
        return [(i, i) for i in range(n)]
    return [(i, j) for i in range(cfg.n_states) for j in range(cfg.n_observables)]


def _mitigation_pair(channel, dim, a_mat, rng):
    """One (random state, random observable) draw; the state fed to the
    compiled inverse is the channel output, noise applied exactly."""
    rho0 = sm.haar_state(dim, rng)
    u = sm.haar_unitary(dim, rng)
    obs = ch.Observable(dim=dim, mat=u @ a_mat @ u.conj().T)
    noisy = ch.apply(channel, rho0.mat)
    noisy = (noisy + noisy.conj().T) / 2
    rho_in = ch.DensityMatrix(dim=dim, mat=noisy / np.trace(noisy).real)
    return rho0, rho_in, obs


def _fig2_point(cfg, kind, delta, dim, task_idx):
    spec = _noise_spec(kind, delta, dim)
    channel = nz.build_channel(spec)
    inverse = nz.invert_channel(spec)
    compiled = compile_map(inverse)
    bp, bn = positive_negative_baseline(inverse)
    a = base_observable(kind, dim)
    emp, pred = [], []
    for pair_no, (si, oi) in enumerate(_pair_indices(cfg)):
        rng = np.random.default_rng((cfg.seed, task_idx, si, oi))
        _, rho_in, obs = _mitigation_pair(channel, dim, a.mat, rng)
        dist = sm.shot_distribution([compiled], rho_in, obs)
        vals = dist.sample_values(cfg.repetitions * cfg.shots, rng)
        means = vals.reshape(cfg.repetitions, cfg.shots).mean(axis=1)
        emp.append(float(means.var(ddof=1)))
        pred.append(sm.var_ours_mean(inverse, rho_in, obs, cfg.shots))
    haar_single = sm.var_haar(inverse, channel, a)
    row = ResultRow(
        experiment="fig2", kind=kind, delta=delta, dim=dim,
        empirical_var_mean=float(np.mean(emp)),
        eq6_var_mean=float(np.mean(pred)),
        haar_var_mean=haar_single / cfg.shots,
        haar_var_single=haar_single,
        gamma=compiled.gamma,
        source_rank=inverse.rank, compiled_rank=compiled.branch_count,
        baseline_pos_rank=bp.rank, baseline_neg_rank=bn.rank,
        shots=cfg.shots, repetitions=cfg.repetitions,
        n_states=cfg.n_states, n_observables=cfg.n_observables, seed=cfg.seed)
    return row, {"empirical": emp, "predicted": pred}


def run_fig2(cfg: ExperimentConfig) -> ResultTable:
    grid = [(kind, delta, dim)
            for kind in cfg.kinds
            for delta in sorted(cfg.deltas)
            for dim in cfg.dims
            if not (kind == "dephasing" and delta >= 0.5)]
    tasks = [(lambda k=k, dl=dl, dm=dm, i=i: _fig2_point(cfg, k, dl, dm, i))
             for i, (k, dl, dm) in enumerate(grid)]
    results = _run_tasks(tasks)
    table = ResultTable()
    for (kind, delta, dim), (row, detail) in zip(grid, results):
        table.rows.append(row)
        table.details[(kind, delta, dim)] = detail
    table.rows.sort(key=lambda r: (r.kind, r.delta, r.dim))
    return table


# ---------------------------------------------------------------------------
# fig. 3 style sweep: photon loss vs dimension
# ---------------------------------------------------------------------------

def _fig3_point(cfg, dim, delta, task_idx):
    spec = nz.NoiseSpec(kind="photon_loss", delta=delta, dim=dim)
    channel = nz.build_channel(spec)
    inverse = nz.invert_channel(spec)
    compiled = compile_map(inverse)
    bp, bn = positive_negative_baseline(inverse)
    a = base_observable("photon_loss", dim)
    haar_single = sm.var_haar(inverse, channel, a)
    rng = np.random.default_rng((cfg.seed, task_idx))
    mc = sm.var_haar_monte_carlo(inverse, channel, a, cfg.haar_samples, rng)
    return ResultRow(
        experiment="fig3", kind="photon_loss", delta=delta, dim=dim,
        haar_var_single=haar_single, haar_mc_single=mc,
        haar_var_mean=haar_single / cfg.shots,
        gamma=compiled.gamma,
        source_rank=inverse.rank, compiled_rank=compiled.branch_count,
        baseline_pos_rank=bp.rank, baseline_neg_rank=bn.rank,
        shots=cfg.shots, repetitions=cfg.repetitions,
        n_states=cfg.n_states, n_observables=cfg.n_observables, seed=cfg.seed)


def run_fig3(cfg: ExperimentConfig) -> ResultTable:
    dims = cfg.dims if cfg.dims != (2, 4) else tuple(range(2, 13))
    delta = cfg.deltas[0] if len(cfg.deltas) == 1 else 0.2
    grid = list(dims)
    tasks = [(lambda d=d, i=i: _fig3_point(cfg, d, delta, i)) for i, d in enumerate(grid)]
    rows = _run_tasks(tasks)
    table = ResultTable(rows=list(rows))
    table.rows.sort(key=lambda r: r.dim)
    return table


# ---------------------------------------------------------------------------
# cross-module verification suite
# ---------------------------------------------------------------------------

@dataclass
class VerifyCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class VerifyReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _check(name, residual, tol):
    return VerifyCheck(name=name, passed=residual <= tol,
                       detail=f"residual {residual:.3e} (tol {tol:.0e})")


def _basis_action_residual(act_a, act_b, dim):
    res = 0.0
    for a in range(dim):
        for b in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[a, b] = 1.0
            res = max(res, float(np.abs(act_a(e) - act_b(e)).max()))
    return res


def run_verify(cfg: ExperimentConfig) -> VerifyReport:
    checks = []
    rng = np.random.default_rng(cfg.seed)

    if cfg.poison:
        # Deliberate fault: flip one Kraus sign and show the TP guard fires.
        deph = nz.build_channel(nz.NoiseSpec(kind="dephasing", delta=0.1))
        try:
            ch.SignedKrausMap(dim=2, ops=deph.ops, signs=[deph.signs[0], -deph.signs[1]])
            checks.append(VerifyCheck("poison: flipped sign rejected", False,
                                      "TP violation was not detected"))
        except NotTracePreserving as exc:
            checks.append(VerifyCheck("poison: flipped sign rejected", False,
                                      f"detected as intended ({exc}); failing run on purpose"))
        return VerifyReport(checks=checks)

    quick = cfg.repetitions <= 500
    n_maps = 40 if quick else 200

    # representation round trips + compile identity + tree invariants
    worst_round = worst_compile = worst_tree = 0.0
    ranks_ok = True
    for _ in range(n_maps):
        d = int(rng.integers(2, 5))
        m = ch.random_hptp_map(d, rng)
        s_ref = ch.superop_from_map(m).mat
        m_cycle = ch.signed_kraus_from_choi(ch.choi_from_superop(
            ch.superop_from_choi(ch.choi_from_map(m))))
        worst_round = max(worst_round, float(np.abs(ch.superop_from_map(m_cycle).mat - s_ref).max()))
        c = compile_map(m)
        worst_compile = max(worst_compile, _basis_action_residual(
            c.reweighted_action, lambda e, m=m: ch.apply(m, e), d))
        ranks_ok &= c.branch_count <= m.rank + 1 and c.gamma >= 1.0 - 1e-12
        plan = build_tree_plan(c)
        rep = verify_tree_plan(plan, c)
        worst_tree = max(worst_tree, max(k.residual for k in rep.checks))
    checks.append(_check(f"representation round trip ({n_maps} maps)", worst_round, 1e-9))
    checks.append(_check(f"compile reweighted action ({n_maps} maps)", worst_compile, 1e-9))
    checks.append(VerifyCheck("compile rank/gamma bounds", ranks_ok, "r+1 and gamma>=1"))
    checks.append(_check(f"tree-plan invariants ({n_maps} maps)", worst_tree, 1e-9))

    # noise inversion identities
    worst_inv = 0.0
    for kind in nz.KINDS:
        for delta in (0.05, 0.1, 0.2, 0.3):
            dims = (4, 8) if kind == "photon_loss" else (2,)
            for d in dims:
                spec = _noise_spec(kind, delta, d)
                prod = (ch.superop_from_map(nz.invert_channel(spec)).mat
                        @ ch.superop_from_map(nz.build_channel(spec)).mat)
                worst_inv = max(worst_inv, float(np.abs(prod - np.eye(d * d)).max()))
    checks.append(_check("noise inversion identities", worst_inv, 1e-9))

    # Kraus-level vs tree-level sampling equivalence (multinomial 4 sigma)
    spec = nz.NoiseSpec(kind="depolarizing", delta=0.2)
    compiled = compile_map(nz.invert_channel(spec))
    plan = build_tree_plan(compiled)
    rho = sm.haar_state(2, rng)
    n_draw = 4000 if quick else 20000
    rng_a = np.random.default_rng((cfg.seed, 101))
    rng_b = np.random.default_rng((cfg.seed, 202))
    counts_a = np.zeros(compiled.branch_count)
    counts_b = np.zeros(compiled.branch_count)
    for _ in range(n_draw):
        counts_a[sm.sample_branch(compiled, rho, rng_a)[0]] += 1
        counts_b[sm.walk_tree(plan, rho, rng_b)[0]] += 1
    p = sm.branch_probabilities(compiled, rho.mat)
    sigma = np.sqrt(2 * n_draw * p * (1 - p))  # two independent multinomials
    dev = float(np.max(np.abs(counts_a - counts_b) / np.maximum(sigma, 1.0)))
    checks.append(_check("kraus vs tree sampling equivalence (sigmas)", dev, 4.0))

    # estimator unbiasedness (5 sigma) and gamma=1 reduction
    channel = nz.build_channel(spec)
    inverse = nz.invert_channel(spec)
    a = base_observable("depolarizing", 2)
    rng_c = np.random.default_rng((cfg.seed, 303))
    rho0, rho_in, obs = _mitigation_pair(channel, 2, a.mat, rng_c)
    exact = float(np.trace(rho0.mat @ obs.mat).real)
    n_shots = 20000 if quick else 100000
    res = sm.estimate([compiled], rho_in, obs, shots=n_shots, seed=cfg.seed + 17)
    bound = 5.0 * math.sqrt(sm.var_ours_mean(inverse, rho_in, obs, n_shots))
    checks.append(_check("estimator unbiasedness (abs dev)", abs(res.mean - exact), bound))

    cptp = compile_map(channel)
    checks.append(VerifyCheck("gamma=1 reduction for CPTP input",
                              cptp.gamma == 1.0 and all(w == 1.0 for w in cptp.weights),
                              f"gamma {cptp.gamma}, weights {cptp.weights}"))

    # Haar formula consistency
    vh = sm.var_haar(inverse, channel, a)
    vhu = sm.var_haar_unital(ch.choi_from_map(inverse), 2)
    checks.append(_check("haar formula vs unital shortcut", abs(vh - vhu), 1e-9))
    mc = sm.var_haar_monte_carlo(inverse, channel, a,
                                 cfg.haar_samples, np.random.default_rng((cfg.seed, 404)))
    checks.append(_check("haar formula vs Monte Carlo (relative)", abs(mc - vh) / vh, 0.05))

    return VerifyReport(checks=checks)
