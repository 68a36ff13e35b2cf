import inspect

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_model, rand_f32, weights_dict
from monostream.errors import HookError, ModelParseError, UnsupportedModel, WeightError
from monostream.kernels import Aggregator
from monostream.model import (
    HOOKS, HookContext, Model, OpKind, WeightSet, gcn_description, gin_description,
    load_weights, parse_model_description, run_combination, sage_description, save_weights,
)
from oracles import scalar_matvec, scalar_mlp, scalar_relu

F32 = np.float32


def test_gcn_with_input_projection_partitions():
    text = "lin proj\nmin\nlin w0 bias b0\nrelu\nmin\nlin w1 bias b1\nrelu\n"
    spec = parse_model_description(text)
    assert spec.num_layers == 2
    assert len(spec.partitions) == 2
    start, end = spec.partitions[0]
    assert start <= 0 < end
    assert spec.prefix_ops[0].kind is OpKind.LINEAR
    assert spec.partitions[1] == (4, 7)
    assert spec.aggregator is Aggregator.MIN


def test_only_aggregations_is_identity_model():
    spec = parse_model_description("min\nmin\nmin\n")
    assert spec.num_layers == 3
    model = Model(spec, WeightSet(), 4)
    a = np.array([1, -2, 3, 0], F32)
    assert run_combination(model, 1, a).tolist() == a.tolist()


@pytest.mark.parametrize("text,exc", [
    ("min\nmax\n", ModelParseError),
    ("relu\n", ModelParseError),
    ("min\nfrobnicate\n", ModelParseError),
    ("min\nsoftmax\n", UnsupportedModel),
    ("attention\nmax\n", UnsupportedModel),
    ("mean\n", UnsupportedModel),
    ("min\nbatchnorm\n", UnsupportedModel),
    ("", ModelParseError),
    ("user_apply sage_self w\nmin\n", ModelParseError),
    ("min\nlin\n", ModelParseError),
])
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse_model_description(text)


line = st.one_of(
    st.just("relu"),
    st.builds(lambda w: f"lin {w}", st.sampled_from(["a", "b.c", "conv0.weight"])),
    st.builds(lambda w, b: f"lin {w} bias {b}", st.sampled_from(["a", "b"]), st.sampled_from(["x", "y"])),
    st.builds(lambda h, a: f"user_apply {h} {a}".strip(), st.sampled_from(["sage_self", "gin_self"]),
              st.sampled_from(["", "w2"])),
)


@settings(max_examples=100, deadline=None)
@given(agg=st.sampled_from(["min", "max"]), body=st.lists(st.lists(line, max_size=4), min_size=1, max_size=4))
def test_reserialize_reparse_is_identical(agg, body):
    text = "".join(agg + "\n" + "".join(l + "\n" for l in layer) for layer in body)
    spec = parse_model_description(text)
    again = parse_model_description(spec.to_text())
    assert again == spec
    assert parse_model_description(text) == spec


def test_builtin_hook_bindings():
    assert parse_model_description(gcn_description()).hook_names == ()
    assert parse_model_description(sage_description()).hook_names == ("sage_self",)
    assert parse_model_description(gin_description()).hook_names == ("gin_self",)
    for name in ("sage_self", "gin_self"):
        hook = HOOKS[name]
        for fn in (hook.apply, hook.propagate, hook.grouping):
            assert len(inspect.getsource(fn).strip().splitlines()) < 10


def test_missing_hook_binding():
    spec = parse_model_description("min\nuser_apply nope\n")
    with pytest.raises(HookError):
        Model(spec, WeightSet(), 2)


def test_weights_round_trip(tmp_path):
    model = make_model("gin", 16, seed=42)
    path = save_weights(tmp_path, model.weights)
    again = load_weights(path, model.spec, 16)
    assert again.epsilon == model.weights.epsilon
    assert sorted(again.tensors) == sorted(model.weights.tensors)
    for name, arr in model.weights.tensors.items():
        assert again.tensors[name].tobytes() == arr.tobytes()
    path2 = save_weights(tmp_path / "again", again)
    assert open(path).read() == open(path2).read()


def test_weights_errors(tmp_path):
    spec = parse_model_description(gcn_description(1))
    ws = WeightSet({"conv0.weight": np.zeros((4, 3), F32), "conv0.bias": np.zeros(4, F32)})
    path = save_weights(tmp_path, ws)
    with pytest.raises(WeightError):
        load_weights(path, spec, input_len=5)
    ws.tensors["conv0.weight"][0, 0] = np.nan
    path = save_weights(tmp_path / "nan", ws)
    with pytest.raises(WeightError):
        load_weights(path)
    (tmp_path / "bad.txt").write_text("epsilon 1 inf\n")
    with pytest.raises(WeightError):
        load_weights(tmp_path / "bad.txt")


def test_gcn_identity_weights():
    spec = parse_model_description(gcn_description(1))
    ws = WeightSet({"conv0.weight": np.eye(3, dtype=F32), "conv0.bias": np.zeros(3, F32)})
    model = Model(spec, ws, 3)
    a = np.array([1.5, -2, 0], F32)
    assert run_combination(model, 0, a).tolist() == [1.5, 0, 0]


def test_sage_degenerate_weights():
    spec = parse_model_description("min\nlin w1\nuser_apply sage_self w2\n")
    ws = WeightSet({"w1": np.eye(2, dtype=F32), "w2": np.zeros((2, 2), F32)})
    model = Model(spec, ws, 2)
    a = np.array([3, -4], F32)
    ctx = HookContext(1, fetch_self=lambda: np.array([9, 9], F32))
    assert run_combination(model, 0, a, ctx).tolist() == [3, -4]


def test_gin_eps_zero_self_term():
    spec = parse_model_description("max\nuser_apply gin_self\n")
    model = Model(spec, WeightSet(epsilon={1: 0.0}), 2)
    h, a = np.array([0.25, 2], F32), np.array([1, -3], F32)
    out = run_combination(model, 0, a, HookContext(1, fetch_self=lambda: h))
    assert out.tobytes() == (h + a).tobytes()


def test_gin_matches_scalar_oracle():
    model = make_model("gin", 16)
    w = weights_dict(model)
    rng = np.random.default_rng(4)
    h, a = rand_f32(rng, 16), rand_f32(rng, 16)
    out = run_combination(model, 0, a, HookContext(1, fetch_self=lambda: h))
    scale = F32(F32(1) + F32(w["eps"][1]))
    z = np.array([F32(F32(scale * x) + y) for x, y in zip(h, a)], F32)
    layers = [(w[f"conv0.mlp{j}.weight"], w[f"conv0.mlp{j}.bias"]) for j in range(2)]
    assert out.tobytes() == scalar_relu(scalar_mlp(layers, z)).tobytes()


def test_layer_equations_hold():
    rng = np.random.default_rng(12)
    a, h = np.abs(rand_f32(rng, 16)), np.abs(rand_f32(rng, 16))
    gcn = make_model("gcn", 16)
    w = weights_dict(gcn)
    expect = scalar_relu(scalar_matvec(w["conv0.weight"], a, w["conv0.bias"]))
    assert run_combination(gcn, 0, a).tobytes() == expect.tobytes()
    sage = make_model("sage", 16)
    w = weights_dict(sage)
    left, right = scalar_matvec(w["conv0.lin_l"], a), scalar_matvec(w["conv0.lin_r"], h)
    expect = scalar_relu(np.array([F32(x + y) for x, y in zip(left, right)], F32))
    got = run_combination(sage, 0, a, HookContext(1, fetch_self=lambda: h))
    assert got.tobytes() == expect.tobytes()


def test_batch_and_single_row_agree():
    for kind in ("gcn", "sage", "gin"):
        model = make_model(kind, 16)
        rng = np.random.default_rng(1)
        A, H = rand_f32(rng, 10, 16), rand_f32(rng, 10, 16)
        batch = run_combination(model, 0, A, HookContext(1, fetch_self=lambda: H))
        for r in range(10):
            single = run_combination(model, 0, A[r], HookContext(1, fetch_self=lambda r=r: H[r]))
            assert single.tobytes() == batch[r].tobytes()


def test_dims_chain():
    assert make_model("gcn", 16).msg_dims == [16, 16, 16]
    assert make_model("gin", 16).msg_dims == [16, 8, 8, 8, 8, 8]
    with pytest.raises(WeightError):
        run_combination(make_model("gcn", 16), 0, np.zeros(5, F32))
