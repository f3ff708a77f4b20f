"""End-to-end acceptance suite.

Each test covers one acceptance criterion, asserts the stated tolerance
and runtime budget, and prints a single pass/fail line.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from hptpc import channels as ch
from hptpc import harness as hz
from hptpc import noise as nz
from hptpc import sampler as sm
from hptpc.compiler import build_tree_plan, compile_map, verify_tree_plan
from hptpc.numerics import sup_norm

PAULI_Z = np.diag([1.0, -1.0])


class _Timer:
    def __init__(self, number, name, budget):
        self.number, self.name, self.budget = number, name, budget

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        status = "PASS" if exc_type is None and elapsed < self.budget else "FAIL"
        print(f"[{status}] criterion {self.number:2d}: {self.name} "
              f"({elapsed:.1f}s / budget {self.budget:.0f}s)")
        if exc_type is None:
            assert elapsed < self.budget, f"criterion {self.number} over budget: {elapsed:.1f}s"
        return False


def test_criterion_01_representation_round_trip(hptp_corpus):
    with _Timer(1, "representation round trip on 200 maps", 10.0):
        worst = 0.0
        for m in hptp_corpus:
            ref = ch.superop_from_map(m).mat
            cycle = ch.signed_kraus_from_choi(ch.choi_from_superop(
                ch.superop_from_choi(ch.choi_from_map(m))))
            worst = max(worst, sup_norm(ch.superop_from_map(cycle).mat - ref))
        assert worst < 1e-9, f"worst round-trip residual {worst:.3e}"


def test_criterion_02_compile_correctness(hptp_corpus):
    with _Timer(2, "compile correctness on 200 maps", 10.0):
        worst = 0.0
        for m in hptp_corpus:
            c = compile_map(m)
            assert c.gamma >= 1.0 - 1e-12
            assert c.branch_count <= m.rank + 1
            flags = ch.classify(c.as_channel())
            assert flags.is_hp and flags.is_tp and flags.is_cp
            for a in range(m.dim):
                for b in range(m.dim):
                    e = np.zeros((m.dim, m.dim), dtype=complex)
                    e[a, b] = 1.0
                    worst = max(worst, sup_norm(c.reweighted_action(e) - ch.apply(m, e)))
        assert worst < 1e-9, f"worst reweighted-action residual {worst:.3e}"


def test_criterion_03_inversion_identity():
    with _Timer(3, "noise inversion identities", 30.0):
        worst = 0.0
        for delta in (0.05, 0.1, 0.2, 0.3):
            for kind in ("amplitude_damping", "depolarizing", "dephasing"):
                spec = nz.NoiseSpec(kind=kind, delta=delta)
                prod = (ch.superop_from_map(nz.invert_channel(spec)).mat
                        @ ch.superop_from_map(nz.build_channel(spec)).mat)
                worst = max(worst, sup_norm(prod - np.eye(4)))
            for d in range(2, 13):
                spec = nz.NoiseSpec(kind="photon_loss", delta=delta, dim=d)
                prod = (ch.superop_from_map(nz.invert_channel(spec)).mat
                        @ ch.superop_from_map(nz.build_channel(spec)).mat)
                worst = max(worst, sup_norm(prod - np.eye(d * d)))
        assert worst < 1e-9, f"worst inversion residual {worst:.3e}"


def test_criterion_04_photon_loss_ranks():
    with _Timer(4, "photon-loss inverse rank scaling", 30.0):
        for d in range(2, 13):
            inv = nz.invert_channel(nz.NoiseSpec(kind="photon_loss", delta=0.2, dim=d))
            c = compile_map(inv)
            assert inv.rank == d, f"d={d}: source rank {inv.rank}"
            assert c.branch_count == d + 1, f"d={d}: compiled rank {c.branch_count}"


def test_criterion_05_estimator_unbiasedness():
    with _Timer(5, "estimator unbiasedness (20 pairs, 1e5 shots)", 60.0):
        spec = nz.NoiseSpec(kind="depolarizing", delta=0.2)
        channel = nz.build_channel(spec)
        inverse = nz.invert_channel(spec)
        compiled = compile_map(inverse)
        shots = 100_000
        for pair in range(20):
            rng = np.random.default_rng((2024, pair))
            rho0, rho_in, obs = hz._mitigation_pair(channel, 2, PAULI_Z, rng)
            exact = float(np.trace(rho0.mat @ obs.mat).real)
            res = sm.estimate([compiled], rho_in, obs, shots=shots, seed=1000 + pair)
            bound = 5.0 * math.sqrt(sm.var_ours_mean(inverse, rho_in, obs, shots))
            assert abs(res.mean - exact) < bound, (
                f"pair {pair}: |{res.mean:.5f} - {exact:.5f}| >= {bound:.5f}")


def test_criterion_06_variance_law_full_grid():
    with _Timer(6, "variance law on the full default grid", 900.0):
        cfg = hz.ExperimentConfig(seed=0)
        assert cfg.repetitions == 2000 and cfg.shots == 1000
        table = hz.run_fig2(cfg)
        m = cfg.repetitions
        for key, detail in table.details.items():
            emp = np.asarray(detail["empirical"])
            pred = np.asarray(detail["predicted"])
            # Satterthwaite-pooled chi-square band across the 100 pairs
            dof = (m - 1) * pred.sum() ** 2 / (pred ** 2).sum()
            stat = dof * emp.sum() / pred.sum()
            lo, hi = stats.chi2.ppf([0.005, 0.995], dof)
            assert lo < stat < hi, (
                f"{key}: pooled statistic {stat:.1f} outside [{lo:.1f}, {hi:.1f}]")


def test_criterion_07_haar_formula_consistency():
    with _Timer(7, "Haar-averaged variance consistency", 120.0):
        # (a) general formula vs unital trace-norm shortcut
        for kind in ("depolarizing", "dephasing"):
            for delta in (0.05, 0.1, 0.2, 0.3):
                spec = nz.NoiseSpec(kind=kind, delta=delta)
                inv = nz.invert_channel(spec)
                vh = sm.var_haar(inv, nz.build_channel(spec),
                                 ch.Observable(dim=2, mat=PAULI_Z))
                vhu = sm.var_haar_unital(ch.choi_from_map(inv), 2)
                assert abs(vh - vhu) < 1e-9
        # (b) closed-form value for the depolarizing inverse at delta=0.2
        spec = nz.NoiseSpec(kind="depolarizing", delta=0.2)
        inv = nz.invert_channel(spec)
        channel = nz.build_channel(spec)
        obs = ch.Observable(dim=2, mat=PAULI_Z)
        vh = sm.var_haar(inv, channel, obs)
        assert abs(vh - (1.890625 - 1.0 / 3.0)) < 1e-9
        # (c) Monte Carlo Haar average within 5 percent
        mc = sm.var_haar_monte_carlo(inv, channel, obs, samples=2000,
                                     rng=np.random.default_rng(77))
        assert abs(mc - vh) / vh < 0.05, f"MC {mc:.4f} vs formula {vh:.4f}"


def test_criterion_08_tree_plans(hptp_corpus):
    with _Timer(8, "tree plans on corpus and photon-loss inverses", 60.0):
        compiled = [compile_map(m) for m in hptp_corpus]
        for d in range(2, 9):
            inv = nz.invert_channel(nz.NoiseSpec(kind="photon_loss", delta=0.2, dim=d))
            compiled.append(compile_map(inv))
        for c in compiled:
            plan = build_tree_plan(c)
            assert plan.depth == (math.ceil(math.log2(c.branch_count))
                                  if c.branch_count > 1 else 0)
            report = verify_tree_plan(plan, c)
            assert report.passed, [f.name for f in report.failures()]


def test_criterion_09_successive_maps():
    with _Timer(9, "successive maps with end-stage post-processing", 60.0):
        spec = nz.NoiseSpec(kind="dephasing", delta=0.1)
        inv = nz.invert_channel(spec)
        compiled = compile_map(inv)
        rng = np.random.default_rng(90)
        rho = sm.haar_state(2, rng)
        u = sm.haar_unitary(2, rng)
        obs = ch.Observable(dim=2, mat=u @ PAULI_Z @ u.conj().T)
        exact = float(np.trace(ch.apply(ch.compose(inv, inv), rho.mat) @ obs.mat).real)
        shots = 100_000
        dist = sm.shot_distribution([compiled, compiled], rho, obs)
        var_single = float((dist.probs * dist.values ** 2).sum()
                           - (dist.probs * dist.values).sum() ** 2)
        res = sm.estimate([compiled, compiled], rho, obs, shots=shots, seed=91)
        bound = 5.0 * math.sqrt(var_single / shots)
        assert abs(res.mean - exact) < bound, (
            f"|{res.mean:.5f} - {exact:.5f}| >= {bound:.5f}")
        # single end-stage weights: the product gamma^2 = 1.5625 up to sign
        assert np.allclose(np.abs(dist.values), compiled.gamma ** 2)


def test_criterion_10_determinism_across_workers(tmp_path):
    with _Timer(10, "byte-identical CSV across worker counts", 120.0):
        texts = []
        for workers in ("1", "8"):
            out = tmp_path / f"w{workers}"
            env = dict(os.environ, HPTPC_THREADS=workers)
            proc = subprocess.run(
                [sys.executable, "-m", "hptpc.cli", "fig3", "--quick",
                 "--seed", "42", "--no-plot", "--out", str(out)],
                env=env, capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            texts.append((out / "results.csv").read_bytes())
        assert texts[0] == texts[1]
