"""Reference inference paths: the whole graph ("Full") and the k-hop
affected area only ("Affected"). Both ignore the checkpoint store and serve
as correctness oracles and memory-access references for the engine.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from monostream.graph import EdgeOp
from monostream.kernels import segment_reduce
from monostream.model import HookContext, check_features


@dataclass
class InferenceResult:
    # messages[l] is the input of aggregation l+1; messages[-1] is the output
    messages: list
    alphas: list
    feature_fetches: int = 0
    intermediate_fetches: int = 0
    computed: list = field(default_factory=list)

    @property
    def output(self):
        return self.messages[-1]

    @property
    def fetches(self):
        return self.feature_fetches + self.intermediate_fetches

    def copy(self):
        return InferenceResult([m.copy() for m in self.messages], [a.copy() for a in self.alphas])


def _layer_fetches(model, indptr, rows=None):
    deg = np.diff(indptr)
    n = len(deg) if rows is None else len(rows)
    total = int(deg.sum()) if rows is None else int(deg[rows].sum())
    return total + (n if model.uses_self_message else 0)


def full_inference(g, features, model):
    feats = check_features(features, g.num_nodes, model.input_len)
    indptr, indices = g.in_csr()
    agg = model.aggregator
    res = InferenceResult([], [])
    if model.has_prefix:
        res.messages.append(model.prefix(feats))
        res.feature_fetches += g.num_nodes
    else:
        res.messages.append(feats.copy())
    for p in range(model.num_layers):
        m = res.messages[p]
        reads = _layer_fetches(model, indptr)
        if p == 0 and not model.has_prefix:
            res.feature_fetches += reads
        else:
            res.intermediate_fetches += reads
        a = segment_reduce(agg, m, indptr, indices)
        ctx = HookContext(p + 1, fetch_self=lambda m=m: m)
        res.alphas.append(a)
        res.messages.append(model.combine(p, a, ctx))
    return res


def _union_out(g, delta):
    """Out-neighbor lookup over the current graph plus edges the delta removed."""
    extra = {}
    for d in delta:
        if d.op is EdgeOp.DELETE and not g.has_edge(d.src, d.dst):
            extra.setdefault(d.src, set()).add(d.dst)

    def out(u):
        if u in extra:
            return extra[u].union(g.out_adj[u])
        return g.out_adj[u]

    return out


def affected_area(g, delta, k):
    """Per layer l = 1..k, nodes reachable from a changed edge's source by a
    walk of 1..l edges, over the union of the old and new edge sets.

    ``g`` is the graph after the delta was applied.
    """
    out = _union_out(g, delta)
    sources = sorted({d.src for d in delta})
    areas = []
    reached = set()
    frontier = sources
    for _ in range(k):
        new = set()
        for u in frontier:
            for v in out(u):
                if v not in reached:
                    new.add(v)
        reached |= new
        areas.append(frozenset(reached))
        frontier = sorted(new)
    return areas


def compute_affected_ratio(g, delta, k):
    n = g.num_nodes
    return [len(a) / n for a in affected_area(g, delta, k)]


def affected_inference(g, delta, features, model, prev):
    """Recompute only what a k-hop affected area needs; copy the rest from ``prev``.

    Layer l recomputes the nodes of ``S_l``, where ``S_k`` is the layer-k
    affected area and ``S_{l-1}`` adds the in-neighbors of ``S_l``. Every row
    read while doing so is counted.
    """
    feats = check_features(features, g.num_nodes, model.input_len)
    k = model.num_layers
    agg = model.aggregator
    res = prev.copy()
    if not delta:
        return res
    areas = affected_area(g, delta, k)
    need = [None] * (k + 1)
    need[k] = set(areas[-1])
    for layer in range(k, 0, -1):
        s = set(need[layer])
        for v in need[layer]:
            s.update(g.in_adj[v])
        need[layer - 1] = s
    res.computed = [np.array(sorted(s), dtype=np.int64) for s in need]
    rows0 = res.computed[0]
    if model.has_prefix and len(rows0):
        res.messages[0][rows0] = model.prefix(feats[rows0])
        res.feature_fetches += len(rows0)
    for p in range(k):
        rows = res.computed[p + 1]
        if len(rows) == 0:
            continue
        m = res.messages[p]
        nbrs = [g.in_adj[v] for v in rows]
        counts = np.fromiter((len(r) for r in nbrs), dtype=np.int64, count=len(rows))
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.fromiter((u for r in nbrs for u in r), dtype=np.int64, count=int(indptr[-1]))
        if p == 0 and not model.has_prefix:
            # layer-1 messages are the raw features
            table = feats
            res.feature_fetches += _layer_fetches(model, indptr)
        else:
            table = m
            res.intermediate_fetches += _layer_fetches(model, indptr)
        a = segment_reduce(agg, table, indptr, indices)
        self_rows = table[rows]
        ctx = HookContext(p + 1, fetch_self=lambda s=self_rows: s)
        res.alphas[p][rows] = a
        res.messages[p + 1][rows] = model.combine(p, a, ctx)
    return res
