import numpy as np
import pytest

from hptpc import channels as ch
from hptpc import noise as nz
from hptpc import serialize as sz
from hptpc.compiler import build_tree_plan, compile_map, verify_tree_plan
from hptpc.errors import InvalidMapFormat
from hptpc.numerics import sup_norm
from conftest import transpose_map


class TestMatrixFormat:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        assert np.array_equal(sz.matrix_from_json(sz.matrix_to_json(m)), m)

    def test_malformed(self):
        with pytest.raises(InvalidMapFormat):
            sz.matrix_from_json([[1.0, 2.0]])


class TestMapFormat:
    def test_kraus_round_trip(self):
        m = transpose_map()
        back = sz.map_from_dict(sz.map_to_dict(m))
        assert isinstance(back, ch.SignedKrausMap)
        assert back.signs == m.signs
        assert sup_norm(ch.superop_from_map(back).mat - ch.superop_from_map(m).mat) < 1e-12

    def test_choi_round_trip(self):
        c = ch.choi_from_map(transpose_map())
        back = sz.map_from_dict(sz.map_to_dict(c))
        assert isinstance(back, ch.ChoiMatrix)
        assert np.array_equal(back.mat, c.mat)

    def test_superop_round_trip(self):
        s = ch.superop_from_map(transpose_map())
        back = sz.map_from_dict(sz.map_to_dict(s))
        assert isinstance(back, ch.Superoperator)
        assert np.array_equal(back.mat, s.mat)

    def test_loader_names_failed_invariant(self):
        payload = sz.map_to_dict(transpose_map())
        payload["kraus"][0]["sign"] = -payload["kraus"][0]["sign"]
        with pytest.raises(InvalidMapFormat, match="invariant"):
            sz.map_from_dict(payload)

    def test_unknown_representation(self):
        with pytest.raises(InvalidMapFormat):
            sz.map_from_dict({"dim": 2, "representation": "ptm"})

    def test_missing_fields(self):
        with pytest.raises(InvalidMapFormat):
            sz.map_from_dict({"representation": "kraus"})


class TestCompiledFormat:
    def test_compiled_with_tree_round_trip(self):
        inv = nz.invert_channel(nz.NoiseSpec(kind="photon_loss", delta=0.2, dim=3))
        c = compile_map(inv)
        plan = build_tree_plan(c)
        c2, plan2 = sz.compiled_from_dict(sz.compiled_to_dict(c, plan))
        assert c2.gamma == c.gamma
        assert c2.weights == c.weights
        assert c2.completed == c.completed and c2.source_rank == c.source_rank
        assert all(np.array_equal(a, b) for a, b in zip(c2.kraus, c.kraus))
        assert plan2.depth == plan.depth
        assert plan2.leaf_order == plan.leaf_order
        assert verify_tree_plan(plan2, c2).passed

    def test_compiled_without_tree(self):
        c = compile_map(ch.SignedKrausMap.identity(2))
        c2, plan2 = sz.compiled_from_dict(sz.compiled_to_dict(c))
        assert plan2 is None and c2.gamma == 1.0

    def test_corrupted_compiled_rejected(self):
        c = compile_map(ch.SignedKrausMap.identity(2))
        payload = sz.compiled_to_dict(c)
        payload["kraus"][0]["matrix"][0][0] = [0.5, 0.0]
        with pytest.raises(InvalidMapFormat):
            sz.compiled_from_dict(payload)


class TestStateObservableFiles:
    def test_state_round_trip(self, tmp_path):
        rho = ch.DensityMatrix.pure([0.6, 0.8j])
        path = tmp_path / "rho.json"
        sz.save_json(path, sz.state_to_dict(rho))
        back = sz.state_from_dict(sz.load_json(path))
        assert sup_norm(back.mat - rho.mat) < 1e-15

    def test_observable_round_trip(self, tmp_path):
        obs = ch.Observable(dim=2, mat=np.diag([1.0, -1.0]))
        path = tmp_path / "obs.json"
        sz.save_json(path, sz.observable_to_dict(obs))
        back = sz.observable_from_dict(sz.load_json(path))
        assert np.array_equal(back.mat, obs.mat)

    def test_invalid_state_named(self):
        with pytest.raises(InvalidMapFormat, match="density"):
            sz.state_from_dict({"dim": 2, "matrix": sz.matrix_to_json(np.eye(2))})
