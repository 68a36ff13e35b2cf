"""Event-driven incremental update of the checkpoint store.

Each update round seeds events for the destinations of changed edges, then
walks the layers in order. Within a layer, events are grouped by target and
reduced per operation; each target is classified, updated incrementally or
recomputed from its current neighborhood, and, if its output changed,
propagates Del/Add events to the next layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from monostream.checkpoint import Stage
from monostream.errors import ContractViolation
from monostream.graph import Direction
from monostream.kernels import F32, bit_equal, classify_positions, ewise_reduce, reduce_rows
from monostream.model import HookContext


class EventOp(Enum):
    ADD = "add"
    DEL = "del"


@dataclass(frozen=True)
class Event:
    op: EventOp
    target: int
    msg_idx: int


class EventQueue:
    """Event list plus a shared message list for one layer.

    Native events carry an index into ``messages``; user events are kept
    apart as ``(target, payload)`` pairs.
    """

    def __init__(self):
        self.events = []
        self.messages = []
        self.user_events = []

    def push_message(self, vec):
        self.messages.append(vec)
        return len(self.messages) - 1

    def push(self, op, target, msg_idx):
        if not 0 <= msg_idx < len(self.messages):
            raise IndexError(f"message index {msg_idx} out of range")
        self.events.append(Event(op, target, msg_idx))

    def __len__(self):
        return len(self.events)


@dataclass
class GroupedEvents:
    target: int
    del_reduced: np.ndarray | None = None
    add_reduced: np.ndarray | None = None


class Condition(Enum):
    NO_DELETION = "no_deletion"
    DELETION_NO_EFFECT = "deletion_no_effect"
    COVERED_RESET = "covered_reset"
    EXPOSED_RESET = "exposed_reset"

    @property
    def incremental(self):
        return self is not Condition.EXPOSED_RESET


@dataclass(frozen=True)
class ConditionReport:
    kind: Condition
    reset_positions: frozenset = frozenset()


def group_and_reduce(queue, agg):
    """One GroupedEvents per distinct target, ascending by node id."""
    dels, adds = {}, {}
    for ev in queue.events:
        bucket = dels if ev.op is EventOp.DEL else adds
        bucket.setdefault(ev.target, []).append(queue.messages[ev.msg_idx])
    out = []
    for t in sorted(dels.keys() | adds.keys()):
        d = dels.get(t)
        a = adds.get(t)
        out.append(GroupedEvents(
            t,
            ewise_reduce(agg, d) if d else None,
            ewise_reduce(agg, a) if a else None,
        ))
    return out


def classify(alpha_prev, grp, agg):
    if grp.del_reduced is None:
        return ConditionReport(Condition.NO_DELETION)
    reset, covered = classify_positions(agg, alpha_prev, grp.del_reduced, grp.add_reduced)
    if not reset.any():
        return ConditionReport(Condition.DELETION_NO_EFFECT)
    positions = frozenset(np.flatnonzero(reset).tolist())
    kind = Condition.COVERED_RESET if covered else Condition.EXPOSED_RESET
    return ConditionReport(kind, positions)


def incremental_update(alpha_prev, grp, agg, report=None):
    if report is not None and report.kind is Condition.EXPOSED_RESET:
        raise ContractViolation("exposed reset cannot be updated incrementally")
    if grp.add_reduced is None:
        return alpha_prev.copy()
    return agg.pick(alpha_prev, grp.add_reduced).astype(F32, copy=False)


def recompute(store, g, layer, node, agg):
    """Aggregate the current messages of all current in-neighbors."""
    nbrs = g.in_adj[node]
    table = store.gather_current(layer, nbrs, Stage.MESSAGE)
    return reduce_rows(agg, table, nbrs)


@dataclass
class LayerStats:
    no_deletion: int = 0
    deletion_no_effect: int = 0
    covered_reset: int = 0
    exposed_reset: int = 0
    events: int = 0
    user_events: int = 0
    targets: int = 0
    recomputes: int = 0
    resilient: int = 0
    dirty: int = 0
    checkpoint_fetches: int = 0
    feature_fetches: int = 0

    def count(self, cond):
        setattr(self, cond.value, getattr(self, cond.value) + 1)

    @property
    def grouped(self):
        return self.no_deletion + self.deletion_no_effect + self.covered_reset + self.exposed_reset


@dataclass
class RoundStats:
    round: int = 0
    updates: int = 0
    layers: list = field(default_factory=list)
    baseline_fetches: int | None = None

    @property
    def fetches(self):
        return sum(l.checkpoint_fetches + l.feature_fetches for l in self.layers)

    def total(self, name):
        return sum(getattr(l, name) for l in self.layers)


class Engine:
    """Incremental inference over a graph, its checkpoints and a bound model.

    ``duplicate_edge_events`` pushes every seeded edge event twice; results
    must not change, which makes it a test knob rather than a feature.
    """

    def __init__(self, graph, store, model, duplicate_edge_events=False):
        self.graph = graph
        self.store = store
        self.model = model
        self.agg = model.aggregator
        self.duplicate_edge_events = duplicate_edge_events
        self.rounds = 0
        self.last_dirty = []

    @property
    def num_layers(self):
        return self.model.num_layers

    def seed_edge_events(self, queue, layer, inserted, deleted):
        s = self.store
        copies = 2 if self.duplicate_edge_events else 1
        for u, v in deleted:
            idx = queue.push_message(s.read_prev(layer, u, Stage.MESSAGE))
            for _ in range(copies):
                queue.push(EventOp.DEL, v, idx)
        for u, v in inserted:
            idx = queue.push_message(s.read_current(layer, u, Stage.MESSAGE))
            for _ in range(copies):
                queue.push(EventOp.ADD, v, idx)

    def _user_grouping(self, queue):
        if not queue.user_events:
            return {}
        payloads = {}
        for t, payload in queue.user_events:
            payloads.setdefault(t, []).append(payload)
        stashes = {}
        for t in sorted(payloads):
            stash = stashes[t] = {}
            for grouper in self.model.groupers:
                grouper(t, payloads[t], stash)
        return stashes

    def propagate_affected(self, queues, layer, node, alpha_prev, alpha_new, stash, stats):
        """Write the node's new state and emit events for the next layer.

        A node whose aggregate is bitwise unchanged and that received no user
        events is resilient and prunes its subtree.
        """
        s, g = self.store, self.graph
        alpha_changed = not bit_equal(alpha_new, alpha_prev)
        if not alpha_changed and stash is None:
            stats.resilient += 1
            return
        if alpha_changed:
            s.write_current(layer, node, Stage.AGGREGATED, alpha_new)
        ctx = HookContext(
            layer + 1,
            fetch_self=lambda: s.read_current(layer, node, Stage.MESSAGE),
            stash=stash,
        )
        m_new = self.model.combine(layer, alpha_new, ctx)
        m_old = s.read_prev(layer + 1, node, Stage.MESSAGE)
        if bit_equal(m_new, m_old):
            stats.resilient += 1
            return
        s.write_current(layer + 1, node, Stage.MESSAGE, m_new)
        if layer + 1 >= self.num_layers:
            return
        q = queues[layer + 1]
        i_old = q.push_message(m_old)
        i_new = q.push_message(m_new)
        for w in g.neighbors_prev(node, Direction.OUT):
            q.push(EventOp.DEL, w, i_old)
        for w in g.out_adj[node]:
            q.push(EventOp.ADD, w, i_new)
        for prop in self.model.propagators:
            q.user_events.extend(prop(node, m_new))

    def _process_layer(self, queues, layer, inserted, deleted, stats):
        s, g, agg = self.store, self.graph, self.agg
        q = queues[layer]
        self.seed_edge_events(q, layer, inserted, deleted)
        stats.events = len(q.events)
        stats.user_events = len(q.user_events)
        groups = {grp.target: grp for grp in group_and_reduce(q, agg)}
        stashes = self._user_grouping(q)
        targets = sorted(groups.keys() | stashes.keys())
        stats.targets = len(targets)
        for v in targets:
            grp = groups.get(v)
            alpha_prev = s.read_prev(layer, v, Stage.AGGREGATED)
            if grp is None:
                alpha_new = alpha_prev
            else:
                base = alpha_prev
                if g.in_degree_prev(v) == 0:
                    # the stored zero vector is a placeholder, not an aggregate
                    base = np.full_like(alpha_prev, agg.identity)
                report = classify(base, grp, agg)
                stats.count(report.kind)
                if report.kind is Condition.EXPOSED_RESET:
                    stats.recomputes += 1
                    alpha_new = recompute(s, g, layer, v, agg)
                else:
                    alpha_new = incremental_update(base, grp, agg, report)
            self.propagate_affected(queues, layer, v, alpha_prev, alpha_new, stashes.get(v), stats)
        stats.dirty = len(s.dirty[layer])

    def process_update_round(self, delta):
        g, s = self.graph, self.store
        g.apply_delta(delta)
        inserted, deleted = g.net_delta()
        k = self.num_layers
        queues = [EventQueue() for _ in range(k)]
        stats = RoundStats(round=self.rounds, updates=len(delta))
        for layer in range(k):
            ls = LayerStats()
            c0, f0 = s.checkpoint_fetches, s.feature_fetches
            self._process_layer(queues, layer, inserted, deleted, ls)
            ls.checkpoint_fetches = s.checkpoint_fetches - c0
            ls.feature_fetches = s.feature_fetches - f0
            stats.layers.append(ls)
        self.last_dirty = [frozenset(d) for d in s.dirty]
        g.commit()
        s.commit_round()
        self.rounds += 1
        return stats
