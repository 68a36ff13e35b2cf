"""Model descriptions, weights and the per-node combination step.

A model description is line oriented::

    lin <weight> [bias <bias>]
    min | max
    relu
    user_apply <hook> [args...]

Each ``min``/``max`` line starts an aggregation; the ops that follow it, up
to the next aggregation, turn the aggregated neighborhood into the message
for the next layer. Ops before the first aggregation form a prefix that maps
input features to the first layer's messages.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from monostream.errors import HookError, ModelParseError, UnsupportedModel, WeightError
from monostream.kernels import F32, Aggregator, affine, as_mat, relu
from monostream.tensorio import read_tensor, write_tensor

# operations that need information beyond a node's own message and its
# aggregated neighborhood, or aggregators that are not selective
UNSUPPORTED = {
    "norm", "normalize", "batchnorm", "batch_norm", "graphnorm", "graph_norm",
    "layernorm", "layer_norm", "softmax", "attention", "gat",
    "mean", "sum", "add", "std", "var",
}


class OpKind(Enum):
    AGGREGATE = "aggregate"
    LINEAR = "lin"
    RELU = "relu"
    USER_APPLY = "user_apply"


@dataclass(frozen=True)
class ModelOp:
    kind: OpKind
    aggregator: Aggregator | None = None
    weight: str | None = None
    bias: str | None = None
    hook: str | None = None
    args: tuple = ()

    def to_line(self):
        if self.kind is OpKind.AGGREGATE:
            return self.aggregator.value
        if self.kind is OpKind.LINEAR:
            return f"lin {self.weight}" + (f" bias {self.bias}" if self.bias else "")
        if self.kind is OpKind.RELU:
            return "relu"
        return " ".join(("user_apply", self.hook) + self.args)


@dataclass(frozen=True)
class ModelSpec:
    ops: tuple
    # partition p covers ops[start:end] and contains exactly one aggregation
    partitions: tuple
    aggregate_at: tuple

    @property
    def num_layers(self):
        return len(self.aggregate_at)

    @property
    def aggregator(self):
        return self.ops[self.aggregate_at[0]].aggregator

    @property
    def prefix_ops(self):
        return self.ops[: self.aggregate_at[0]]

    def combination_ops(self, p):
        return self.ops[self.aggregate_at[p] + 1 : self.partitions[p][1]]

    @property
    def hook_names(self):
        return tuple(dict.fromkeys(op.hook for op in self.ops if op.kind is OpKind.USER_APPLY))

    def to_text(self):
        return "".join(op.to_line() + "\n" for op in self.ops)


def _parse_line(tokens, lineno):
    head = tokens[0].lower()
    if head in ("min", "max"):
        if len(tokens) != 1:
            raise ModelParseError(f"line {lineno}: '{head}' takes no arguments")
        return ModelOp(OpKind.AGGREGATE, aggregator=Aggregator(head))
    if head == "relu":
        if len(tokens) != 1:
            raise ModelParseError(f"line {lineno}: 'relu' takes no arguments")
        return ModelOp(OpKind.RELU)
    if head == "lin":
        if len(tokens) == 2:
            return ModelOp(OpKind.LINEAR, weight=tokens[1])
        if len(tokens) == 4 and tokens[2] == "bias":
            return ModelOp(OpKind.LINEAR, weight=tokens[1], bias=tokens[3])
        raise ModelParseError(f"line {lineno}: expected 'lin <name> [bias <name>]'")
    if head == "user_apply":
        if len(tokens) < 2:
            raise ModelParseError(f"line {lineno}: 'user_apply' needs a hook name")
        return ModelOp(OpKind.USER_APPLY, hook=tokens[1], args=tuple(tokens[2:]))
    if head in UNSUPPORTED:
        raise UnsupportedModel(
            f"line {lineno}: '{head}' depends on more than a node's own message "
            "and aggregated neighborhood, or is not a selective aggregator"
        )
    raise ModelParseError(f"line {lineno}: unknown keyword {tokens[0]!r}")


def parse_model_description(text):
    ops = []
    for lineno, line in enumerate(text.splitlines(), 1):
        tokens = line.split("#", 1)[0].split()
        if tokens:
            ops.append(_parse_line(tokens, lineno))
    if not ops:
        raise ModelParseError("empty model description")
    aggs = [i for i, op in enumerate(ops) if op.kind is OpKind.AGGREGATE]
    if not aggs:
        raise ModelParseError("model has no min/max aggregation")
    kinds = {ops[i].aggregator for i in aggs}
    if len(kinds) > 1:
        raise ModelParseError("model mixes min and max aggregation")
    for op in ops[: aggs[0]]:
        if op.kind is OpKind.USER_APPLY:
            raise ModelParseError("user_apply is not allowed before the first aggregation")
    starts = [0] + aggs[1:]
    ends = aggs[1:] + [len(ops)]
    return ModelSpec(tuple(ops), tuple(zip(starts, ends)), tuple(aggs))


def load_model_description(path):
    with open(path, encoding="utf-8") as fh:
        return parse_model_description(fh.read())


# --------------------------------------------------------------------- weights

@dataclass
class WeightSet:
    tensors: dict = field(default_factory=dict)
    # keyed by 1-based layer number
    epsilon: dict = field(default_factory=dict)

    def __getitem__(self, name):
        try:
            return self.tensors[name]
        except KeyError:
            raise WeightError(f"missing weight {name!r}") from None

    def eps(self, layer):
        try:
            return self.epsilon[layer]
        except KeyError:
            raise WeightError(f"missing epsilon for layer {layer}") from None


def _tensor_filename(name):
    return name.replace("/", "_") + ".tnsr"


def save_weights(directory, weights, manifest="weights.txt"):
    os.makedirs(directory, exist_ok=True)
    lines = []
    for name in sorted(weights.tensors):
        fname = _tensor_filename(name)
        write_tensor(os.path.join(directory, fname), weights.tensors[name])
        lines.append(f"{name} {fname}")
    for layer in sorted(weights.epsilon):
        lines.append(f"epsilon {layer} {weights.epsilon[layer]!r}")
    path = os.path.join(directory, manifest)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def load_weights(manifest_path, model_spec=None, input_len=None):
    base = os.path.dirname(os.path.abspath(manifest_path))
    ws = WeightSet()
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            tokens = line.split("#", 1)[0].split()
            if not tokens:
                continue
            if tokens[0] == "epsilon":
                if len(tokens) != 3:
                    raise WeightError(f"{manifest_path}:{lineno}: expected 'epsilon <layer> <float>'")
                eps = float(tokens[2])
                if not math.isfinite(eps):
                    raise WeightError(f"{manifest_path}:{lineno}: epsilon must be finite")
                ws.epsilon[int(tokens[1])] = eps
                continue
            if len(tokens) != 2:
                raise WeightError(f"{manifest_path}:{lineno}: expected '<name> <path>'")
            name, rel = tokens
            arr = read_tensor(os.path.join(base, rel))
            if np.isnan(arr).any():
                raise WeightError(f"weight {name!r} contains NaN")
            ws.tensors[name] = arr
    if model_spec is not None:
        if input_len is None:
            raise WeightError("input_len is required to check weight shapes")
        infer_dims(model_spec, ws, input_len)
    return ws


# ------------------------------------------------------------------- hooks

class HookContext:
    """Per-node state visible to ``user_apply``.

    ``stash`` holds whatever ``user_grouping`` recorded for the node this
    round; ``fetch_self`` loads the node's own message from storage when no
    user event carried a fresh one.
    """

    __slots__ = ("layer", "stash", "_fetch")

    def __init__(self, layer, fetch_self=None, stash=None):
        self.layer = layer
        self.stash = stash
        self._fetch = fetch_self

    def self_message(self):
        if self.stash is not None and "self" in self.stash:
            return self.stash["self"]
        if self._fetch is None:
            raise HookError("no self message available")
        return self._fetch()


def propagate_to_self(node, message):
    return [(node, message)]


def stash_self_message(target, payloads, stash):
    stash["self"] = payloads[-1]


@dataclass(frozen=True)
class UserHook:
    apply: Callable
    out_dim: Callable
    propagate: Callable | None = None
    grouping: Callable | None = None


def _sage_apply(x, ctx, args, weights):
    return x + affine(weights[args[0]], ctx.self_message())


def _sage_dim(x_dim, self_dim, args, weights, layer):
    if len(args) != 1:
        raise ModelParseError("sage_self takes one weight name")
    w = weights[args[0]]
    if w.shape != (x_dim, self_dim):
        raise WeightError(f"{args[0]} has shape {w.shape}, expected {(x_dim, self_dim)}")
    return x_dim


def _gin_apply(x, ctx, args, weights):
    scale = F32(1) + F32(weights.eps(ctx.layer))
    return scale * ctx.self_message() + x


def _gin_dim(x_dim, self_dim, args, weights, layer):
    if x_dim != self_dim:
        raise WeightError(f"gin_self needs equal lengths, got {x_dim} and {self_dim}")
    weights.eps(layer)
    return x_dim


HOOKS = {
    "sage_self": UserHook(_sage_apply, _sage_dim, propagate_to_self, stash_self_message),
    "gin_self": UserHook(_gin_apply, _gin_dim, propagate_to_self, stash_self_message),
}


def register_hook(name, hook):
    HOOKS[name] = hook


def resolve_hooks(spec):
    out = {}
    for name in spec.hook_names:
        if name not in HOOKS:
            raise HookError(f"no hook bound to {name!r}")
        out[name] = HOOKS[name]
    return out


# ------------------------------------------------------------- combination

def _check_linear(op, weights, d):
    W = weights[op.weight]
    if W.ndim != 2 or W.shape[1] != d:
        raise WeightError(f"{op.weight} has shape {W.shape}, input length is {d}")
    if op.bias is not None:
        b = weights[op.bias]
        if b.shape != (W.shape[0],):
            raise WeightError(f"{op.bias} has shape {b.shape}, expected ({W.shape[0]},)")
    return W.shape[0]


def infer_dims(spec, weights, input_len, hooks=None):
    """Message lengths for layers 1..k+1 (the last one is the model output)."""
    hooks = resolve_hooks(spec) if hooks is None else hooks
    d = input_len
    for op in spec.prefix_ops:
        if op.kind is OpKind.LINEAR:
            d = _check_linear(op, weights, d)
    dims = [d]
    for p in range(spec.num_layers):
        self_dim = dims[p]
        for op in spec.combination_ops(p):
            if op.kind is OpKind.LINEAR:
                d = _check_linear(op, weights, d)
            elif op.kind is OpKind.USER_APPLY:
                d = hooks[op.hook].out_dim(d, self_dim, op.args, weights, p + 1)
        dims.append(d)
    return dims


class Model:
    """A parsed description bound to weights and hooks."""

    def __init__(self, spec, weights, input_len):
        self.spec = spec
        self.weights = weights
        self.input_len = input_len
        self.hooks = resolve_hooks(spec)
        self.msg_dims = infer_dims(spec, weights, input_len, self.hooks)
        self.propagators = tuple(
            dict.fromkeys(h.propagate for h in self.hooks.values() if h.propagate)
        )
        self.groupers = tuple(
            dict.fromkeys(h.grouping for h in self.hooks.values() if h.grouping)
        )

    @property
    def num_layers(self):
        return self.spec.num_layers

    @property
    def aggregator(self):
        return self.spec.aggregator

    @property
    def has_prefix(self):
        return bool(self.spec.prefix_ops)

    @property
    def uses_self_message(self):
        return bool(self.propagators)

    def _run(self, ops, x, ctx):
        for op in ops:
            if op.kind is OpKind.LINEAR:
                b = self.weights[op.bias] if op.bias else None
                x = affine(self.weights[op.weight], x, b)
            elif op.kind is OpKind.RELU:
                x = relu(x)
            elif op.kind is OpKind.USER_APPLY:
                x = self.hooks[op.hook].apply(x, ctx, op.args, self.weights)
        return x.astype(F32, copy=False)

    def prefix(self, features):
        return self._run(self.spec.prefix_ops, np.asarray(features, dtype=F32), None)

    def combine(self, p, a, ctx):
        return self._run(self.spec.combination_ops(p), a, ctx)


def run_combination(model, p, a, ctx=None):
    """Message of layer ``p + 2`` from the aggregated neighborhood of layer ``p + 1``."""
    if a.shape[-1] != model.msg_dims[p]:
        raise WeightError(f"partition {p} expects length {model.msg_dims[p]}, got {a.shape[-1]}")
    return model.combine(p, a, ctx)


# ---------------------------------------------------------------- built-ins

def gcn_description(num_layers=2, agg="min"):
    lines = []
    for i in range(num_layers):
        lines += [agg, f"lin conv{i}.weight bias conv{i}.bias", "relu"]
    return "\n".join(lines) + "\n"


def sage_description(num_layers=2, agg="min"):
    lines = []
    for i in range(num_layers):
        lines += [agg, f"lin conv{i}.lin_l", f"user_apply sage_self conv{i}.lin_r", "relu"]
    return "\n".join(lines) + "\n"


def gin_description(num_layers=5, agg="max", mlp_layers=2):
    lines = []
    for i in range(num_layers):
        lines += [agg, "user_apply gin_self"]
        for j in range(mlp_layers):
            lines.append(f"lin conv{i}.mlp{j}.weight bias conv{i}.mlp{j}.bias")
            if j < mlp_layers - 1:
                lines.append("relu")
        lines.append("relu")
    return "\n".join(lines) + "\n"


BUILTIN_DEFAULTS = {
    "gcn": dict(num_layers=2, hidden=16, agg="min"),
    "sage": dict(num_layers=2, hidden=16, agg="min"),
    "gin": dict(num_layers=5, hidden=8, agg="max", mlp_layers=2, eps=0.1),
}


def _uniform(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(F32)


def builtin_model(kind, input_len, seed=42, **overrides):
    """Description text and seeded random weights for gcn, sage or gin."""
    if kind not in BUILTIN_DEFAULTS:
        raise ValueError(f"unknown built-in model {kind!r}")
    cfg = {**BUILTIN_DEFAULTS[kind], **overrides}
    rng = np.random.default_rng(seed)
    k, hidden, agg = cfg["num_layers"], cfg["hidden"], cfg["agg"]
    ws = WeightSet()
    d = input_len
    for i in range(k):
        if kind == "gcn":
            ws.tensors[f"conv{i}.weight"] = _uniform(rng, (hidden, d), d)
            ws.tensors[f"conv{i}.bias"] = _uniform(rng, (hidden,), d)
        elif kind == "sage":
            ws.tensors[f"conv{i}.lin_l"] = _uniform(rng, (hidden, d), d)
            ws.tensors[f"conv{i}.lin_r"] = _uniform(rng, (hidden, d), d)
        else:
            fan = d
            for j in range(cfg["mlp_layers"]):
                ws.tensors[f"conv{i}.mlp{j}.weight"] = _uniform(rng, (hidden, fan), fan)
                ws.tensors[f"conv{i}.mlp{j}.bias"] = _uniform(rng, (hidden,), fan)
                fan = hidden
            ws.epsilon[i + 1] = float(cfg["eps"])
        d = hidden
    if kind == "gcn":
        text = gcn_description(k, agg)
    elif kind == "sage":
        text = sage_description(k, agg)
    else:
        text = gin_description(k, agg, cfg["mlp_layers"])
    return text, ws


def load_model(description_path, manifest_path, input_len):
    spec = load_model_description(description_path)
    weights = load_weights(manifest_path)
    return Model(spec, weights, input_len)


def check_features(features, num_nodes, input_len=None):
    feats = as_mat(features, "features")
    if feats.shape[0] != num_nodes:
        raise WeightError(f"features have {feats.shape[0]} rows, graph has {num_nodes} nodes")
    if input_len is not None and feats.shape[1] != input_len:
        raise WeightError(f"features have length {feats.shape[1]}, expected {input_len}")
    return feats


__all__ = [
    "OpKind", "ModelOp", "ModelSpec", "WeightSet", "Model", "HookContext", "UserHook",
    "HOOKS", "register_hook", "parse_model_description", "load_model_description",
    "load_weights", "save_weights", "infer_dims", "run_combination", "builtin_model",
    "gcn_description", "sage_description", "gin_description", "load_model", "check_features",
]
