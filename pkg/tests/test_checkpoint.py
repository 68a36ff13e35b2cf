import numpy as np
import pytest

from conftest import make_model, weights_dict
from monostream.baseline import full_inference
from monostream.checkpoint import CheckpointStore, Stage, init_full_inference
from monostream.errors import DimensionError, NaNError
from monostream.graph import DynamicGraph
from monostream.model import Model, WeightSet, gcn_description, parse_model_description
from oracles import naive_inference

F32 = np.float32


def test_single_isolated_node_gcn():
    spec = parse_model_description(gcn_description(1))
    b = np.array([0.5, -1.0], F32)
    model = Model(spec, WeightSet({"conv0.weight": np.eye(2, dtype=F32), "conv0.bias": b}), 2)
    store = init_full_inference(DynamicGraph(1), np.array([[3, 4]], F32), model)
    assert store.alphas[0][0].tolist() == [0, 0]
    assert store.messages[1][0].tolist() == [0.5, 0]


def test_single_neighbor_selection():
    model = Model(parse_model_description("min\n"), WeightSet(), 3)
    feats = np.array([[1, 2, 3], [7, 8, 9]], F32)
    store = init_full_inference(DynamicGraph(2, [(0, 1)]), feats, model)
    assert store.alphas[0][1].tobytes() == feats[0].tobytes()
    assert not store.alphas[0][0].any()


@pytest.mark.parametrize("kind", ["gcn", "sage", "gin"])
def test_init_matches_naive_oracle_and_full(kind, small_world):
    edges, feats, _ = small_world
    model = make_model(kind, 16)
    g = DynamicGraph(100, edges)
    store = init_full_inference(g, feats, model)
    cfg = {"gcn": (2, "min"), "sage": (2, "min"), "gin": (5, "max")}[kind]
    msgs, alphas = naive_inference(kind, g.in_adj, feats, weights_dict(model), *cfg)
    full = full_inference(g, feats, model)
    for got, want, other in zip(store.messages + store.alphas, msgs + alphas, full.messages + full.alphas):
        assert got.tobytes() == want.tobytes()
        assert got.tobytes() == other.tobytes()


def test_nan_features_rejected():
    model = Model(parse_model_description("min\n"), WeightSet(), 2)
    with pytest.raises(NaNError):
        init_full_inference(DynamicGraph(1), np.array([[np.nan, 0]], F32), model)


def test_undo_log_and_dirty_sets():
    msgs = [np.arange(6, dtype=F32).reshape(3, 2), np.zeros((3, 2), F32)]
    store = CheckpointStore(msgs, [np.ones((3, 2), F32)])
    store.write_current(0, 1, Stage.AGGREGATED, np.array([5, 5], F32))
    store.write_current(0, 1, Stage.AGGREGATED, np.array([6, 6], F32))
    store.write_current(1, 2, Stage.MESSAGE, np.array([7, 7], F32))
    assert store.read_prev(0, 1, Stage.AGGREGATED).tolist() == [1, 1]
    assert store.read_current(0, 1, Stage.AGGREGATED).tolist() == [6, 6]
    assert store.read_prev(1, 2, Stage.MESSAGE).tolist() == [0, 0]
    assert store.dirty == [{1, 2}]
    with pytest.raises(DimensionError):
        store.write_current(0, 0, Stage.AGGREGATED, np.zeros(3, F32))
    store.commit_round()
    assert store.dirty == [set()]
    assert store.read_prev(0, 1, Stage.AGGREGATED).tolist() == [6, 6]


def test_reads_are_copies():
    store = CheckpointStore([np.zeros((2, 2), F32), np.zeros((2, 2), F32)], [np.zeros((2, 2), F32)])
    v = store.read_prev(0, 0, Stage.AGGREGATED)
    store.write_current(0, 0, Stage.AGGREGATED, np.ones(2, F32))
    assert v.tolist() == [0, 0]


def test_fetch_counter_matches_shadow_replay():
    rng = np.random.default_rng(2)
    store = CheckpointStore([np.zeros((5, 2), F32), np.zeros((5, 2), F32)], [np.zeros((5, 2), F32)])
    shadow = {"feature": 0, "checkpoint": 0}
    for _ in range(200):
        layer = int(rng.integers(0, 2))
        stage = Stage.MESSAGE if rng.random() < 0.5 or layer == 1 else Stage.AGGREGATED
        node = int(rng.integers(0, 5))
        if rng.random() < 0.5:
            store.read_prev(layer, node, stage)
        else:
            store.read_current(layer, node, stage)
        shadow["feature" if (stage is Stage.MESSAGE and layer == 0) else "checkpoint"] += 1
    assert store.feature_fetches == shadow["feature"]
    assert store.checkpoint_fetches == shadow["checkpoint"]


def test_save_load_round_trip(tmp_path, small_world):
    edges, feats, _ = small_world
    store = init_full_inference(DynamicGraph(100, edges), feats, make_model("gin", 16))
    store.save(tmp_path)
    again = CheckpointStore.load(tmp_path)
    assert again.num_layers == 5
    for a, b in zip(store.messages + store.alphas, again.messages + again.alphas):
        assert a.tobytes() == b.tobytes()
