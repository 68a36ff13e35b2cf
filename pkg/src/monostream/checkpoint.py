"""Per-layer checkpoints taken immediately before and after aggregation.

``messages[l]`` holds the input of aggregation ``l + 1`` for every node and
``alphas[l]`` its output; ``messages[k]`` is the model output. During an
update round rows are overwritten in place and their first pre-image is kept
in an undo log, which is what ``read_prev`` serves.
"""
from __future__ import annotations

import os
from enum import Enum

import numpy as np

from monostream.errors import DimensionError, TensorFormatError
from monostream.kernels import F32, reduce_rows
from monostream.model import HookContext, check_features
from monostream.tensorio import read_tensor, write_tensor


class Stage(Enum):
    MESSAGE = "msg"
    AGGREGATED = "agg"


class CheckpointStore:
    def __init__(self, messages, alphas, layer1_is_features=True):
        if len(messages) != len(alphas) + 1:
            raise DimensionError("need exactly one more message stage than aggregated stages")
        self.messages = [np.ascontiguousarray(m, dtype=F32) for m in messages]
        self.alphas = [np.ascontiguousarray(a, dtype=F32) for a in alphas]
        self.layer1_is_features = layer1_is_features
        self._undo = {}
        self.dirty = [set() for _ in self.alphas]
        self.checkpoint_fetches = 0
        self.feature_fetches = 0

    @property
    def num_layers(self):
        return len(self.alphas)

    @property
    def num_nodes(self):
        return self.messages[0].shape[0]

    def _table(self, layer, stage):
        return self.messages[layer] if stage is Stage.MESSAGE else self.alphas[layer]

    def _count(self, layer, stage, n=1):
        if stage is Stage.MESSAGE and layer == 0 and self.layer1_is_features:
            self.feature_fetches += n
        else:
            self.checkpoint_fetches += n

    @property
    def fetches(self):
        return self.checkpoint_fetches + self.feature_fetches

    def read_prev(self, layer, node, stage):
        """Value at the previous timestamp (0-based ``layer``)."""
        self._count(layer, stage)
        saved = self._undo.get((stage, layer, node))
        if saved is not None:
            return saved.copy()
        return self._table(layer, stage)[node].copy()

    def read_current(self, layer, node, stage):
        self._count(layer, stage)
        return self._table(layer, stage)[node].copy()

    def gather_current(self, layer, nodes, stage):
        """Current rows for ``nodes`` as a table, counted one fetch per row."""
        self._count(layer, stage, len(nodes))
        return self._table(layer, stage)

    def write_current(self, layer, node, stage, v):
        table = self._table(layer, stage)
        if v.shape != table.shape[1:]:
            raise DimensionError(f"{stage.value}[{layer}] rows have length {table.shape[1]}, got {v.shape}")
        key = (stage, layer, node)
        if key not in self._undo:
            self._undo[key] = table[node].copy()
        table[node] = v
        # messages[l+1] is produced while processing layer l
        self.dirty[layer if stage is Stage.AGGREGATED else layer - 1].add(node)

    def commit_round(self):
        self._undo.clear()
        self.dirty = [set() for _ in self.alphas]

    def reset_counters(self):
        self.checkpoint_fetches = 0
        self.feature_fetches = 0

    def snapshot(self):
        return [m.copy() for m in self.messages], [a.copy() for a in self.alphas]

    # ----------------------------------------------------------- persistence
    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        lines = [f"layers {self.num_layers}", f"layer1_is_features {int(self.layer1_is_features)}"]
        for l, m in enumerate(self.messages):
            name = f"msg_{l}.tnsr"
            write_tensor(os.path.join(directory, name), m)
            lines.append(f"msg {l} {name}")
        for l, a in enumerate(self.alphas):
            name = f"agg_{l}.tnsr"
            write_tensor(os.path.join(directory, name), a)
            lines.append(f"agg {l} {name}")
        with open(os.path.join(directory, "manifest.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, directory):
        msgs, aggs, k, feat = {}, {}, None, True
        with open(os.path.join(directory, "manifest.txt"), encoding="utf-8") as fh:
            for line in fh:
                tok = line.split()
                if not tok:
                    continue
                if tok[0] == "layers":
                    k = int(tok[1])
                elif tok[0] == "layer1_is_features":
                    feat = bool(int(tok[1]))
                elif tok[0] in ("msg", "agg") and len(tok) == 3:
                    target = msgs if tok[0] == "msg" else aggs
                    target[int(tok[1])] = read_tensor(os.path.join(directory, tok[2]))
                else:
                    raise TensorFormatError(f"bad checkpoint manifest line {line!r}")
        if k is None or sorted(msgs) != list(range(k + 1)) or sorted(aggs) != list(range(k)):
            raise TensorFormatError(f"{directory}: incomplete checkpoint manifest")
        return cls([msgs[i] for i in range(k + 1)], [aggs[i] for i in range(k)], feat)


def init_full_inference(g, features, model):
    """Initial checkpoints, computed node by node through the same
    per-node combination path the incremental engine uses."""
    feats = check_features(features, g.num_nodes, model.input_len)
    n, agg = g.num_nodes, model.aggregator
    m0 = model.prefix(feats) if model.has_prefix else feats.copy()
    messages = [m0] + [np.zeros((n, d), dtype=F32) for d in model.msg_dims[1:]]
    alphas = [np.zeros((n, d), dtype=F32) for d in model.msg_dims[:-1]]
    for p in range(model.num_layers):
        m = messages[p]
        for v in range(n):
            a = reduce_rows(agg, m, g.in_adj[v])
            ctx = HookContext(p + 1, fetch_self=lambda v=v, m=m: m[v])
            alphas[p][v] = a
            messages[p + 1][v] = model.combine(p, a, ctx)
    return CheckpointStore(messages, alphas, layer1_is_features=not model.has_prefix)
