import numpy as np
import pytest

from hptpc import channels as ch
from hptpc import harness as hz
from hptpc import noise as nz
from hptpc.numerics import sup_norm


def tiny_config(**kw):
    base = dict(kinds=("depolarizing",), deltas=(0.0, 0.2), dims=(2,),
                n_states=2, n_observables=2, shots=60, repetitions=60,
                haar_samples=100, seed=5)
    base.update(kw)
    return hz.ExperimentConfig(**base)


class TestExperimentConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            hz.ExperimentConfig(n_states=0)
        with pytest.raises(ValueError):
            hz.ExperimentConfig(deltas=(1.5,))

    def test_quick_and_full(self):
        q = hz.ExperimentConfig.quick()
        assert q.repetitions == 200 and q.n_states == 3
        f = hz.ExperimentConfig.full_scale()
        assert f.repetitions == 10_000 and f.shots == 1000

    def test_dict_round_trip(self):
        cfg = tiny_config()
        assert hz.ExperimentConfig.from_dict(cfg.to_dict()) == cfg


class TestResultTable:
    def test_csv_round_trip_lossless(self):
        row = hz.ResultRow(experiment="fig2", kind="dephasing", delta=0.1, dim=2,
                           empirical_var_mean=1.0 / 3.0, eq6_var_mean=0.1 + 0.2,
                           gamma=1.25, source_rank=2, compiled_rank=2,
                           shots=1000, repetitions=2000, seed=42)
        table = hz.ResultTable(rows=[row])
        back = hz.ResultTable.from_csv_text(table.to_csv_text())
        assert back.rows == [row]

    def test_empty_cells(self):
        row = hz.ResultRow(experiment="fig3", kind="photon_loss", delta=0.2, dim=5)
        back = hz.ResultTable.from_csv_text(hz.ResultTable(rows=[row]).to_csv_text())
        assert back.rows[0].empirical_var_mean is None

    def test_header(self):
        text = hz.ResultTable(rows=[]).to_csv_text()
        assert text.splitlines()[0].split(",") == hz.CSV_COLUMNS


class TestWorkerCount:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("HPTPC_THREADS", "3")
        assert hz.worker_count() == 3

    def test_floor_at_one(self, monkeypatch):
        monkeypatch.setenv("HPTPC_THREADS", "0")
        assert hz.worker_count() == 1


class TestObservables:
    def test_pauli_z(self):
        assert np.array_equal(hz.pauli_z(1), np.diag([1.0, -1.0]))
        zz = hz.pauli_z(2)
        assert np.array_equal(np.diag(zz), [1.0, -1.0, -1.0, 1.0])

    def test_fock_parity_like(self):
        m = hz.fock_parity_like(4)
        assert np.array_equal(np.diag(m), [1.0, 1.0, 1.0, -1.0])

    def test_base_observable_dispatch(self):
        assert hz.base_observable("photon_loss", 5).mat[4, 4] == -1.0
        assert hz.base_observable("dephasing", 4).mat.shape == (4, 4)


class TestPairing:
    def test_crossed_vs_paired(self):
        cfg = tiny_config(n_states=3, n_observables=2)
        assert len(hz._pair_indices(cfg)) == 6
        cfg_p = tiny_config(n_states=3, n_observables=2, paired=True)
        assert hz._pair_indices(cfg_p) == [(0, 0), (1, 1)]


@pytest.fixture(scope="module")
def fig2_table():
    return hz.run_fig2(tiny_config())


@pytest.fixture(scope="module")
def fig3_table():
    return hz.run_fig3(hz.ExperimentConfig(
        experiment="fig3", dims=(2, 3), deltas=(0.2,), haar_samples=200, seed=3))


class TestRunFig2:
    def test_gamma_column(self, fig2_table):
        by_delta = {r.delta: r for r in fig2_table.rows}
        assert abs(by_delta[0.0].gamma - 1.0) < 1e-9
        assert abs(by_delta[0.2].gamma - 1.375) < 1e-9

    def test_haar_prediction(self, fig2_table):
        by_delta = {r.delta: r for r in fig2_table.rows}
        assert abs(by_delta[0.2].haar_var_single - 1.5572916666666667) < 1e-4

    def test_variance_monotone_in_delta(self, fig2_table):
        rows = sorted(fig2_table.rows, key=lambda r: r.delta)
        preds = [r.eq6_var_mean for r in rows]
        assert preds == sorted(preds)

    def test_empirical_tracks_prediction(self, fig2_table):
        for r in fig2_table.rows:
            assert r.empirical_var_mean == pytest.approx(r.eq6_var_mean, rel=0.5)

    def test_rows_sorted_and_detailed(self, fig2_table):
        keys = [(r.kind, r.delta, r.dim) for r in fig2_table.rows]
        assert keys == sorted(keys)
        assert len(fig2_table.details[("depolarizing", 0.2, 2)]["empirical"]) == 4

    def test_deterministic(self):
        a = hz.run_fig2(tiny_config()).to_csv_text()
        b = hz.run_fig2(tiny_config()).to_csv_text()
        assert a == b


class TestRunFig3:
    def test_rank_columns(self, fig3_table):
        for r in fig3_table.rows:
            assert r.source_rank == r.dim
            assert r.compiled_rank == r.dim + 1

    def test_monte_carlo_tracks_formula(self, fig3_table):
        for r in fig3_table.rows:
            assert r.haar_mc_single == pytest.approx(r.haar_var_single, rel=0.2)

    def test_d2_photon_loss_is_amplitude_damping(self):
        pl = nz.build_channel(nz.NoiseSpec(kind="photon_loss", delta=0.2, dim=2))
        ad = nz.build_channel(nz.NoiseSpec(kind="amplitude_damping", delta=0.2))
        assert sup_norm(ch.superop_from_map(pl).mat - ch.superop_from_map(ad).mat) < 1e-12


class TestRunVerify:
    def test_quick_suite_passes(self):
        report = hz.run_verify(hz.ExperimentConfig.quick(experiment="verify"))
        failing = [c.name for c in report.checks if not c.passed]
        assert report.passed, failing

    def test_poison_fails(self):
        report = hz.run_verify(hz.ExperimentConfig.quick(experiment="verify", poison=True))
        assert not report.passed
        assert any("poison" in c.name for c in report.checks)
