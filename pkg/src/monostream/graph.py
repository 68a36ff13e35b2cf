"""Directed dynamic graph with a one-round view of the previous snapshot."""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import Enum

import numpy as np

from monostream.errors import DuplicateEdge, MissingEdge, StaleDelta


class EdgeOp(Enum):
    INSERT = "+"
    DELETE = "-"


class Direction(Enum):
    OUT = "out"
    IN = "in"


@dataclass(frozen=True)
class EdgeDelta:
    op: EdgeOp
    src: int
    dst: int

    @classmethod
    def insert(cls, src, dst):
        return cls(EdgeOp.INSERT, src, dst)

    @classmethod
    def delete(cls, src, dst):
        return cls(EdgeOp.DELETE, src, dst)

    def inverted(self):
        op = EdgeOp.DELETE if self.op is EdgeOp.INSERT else EdgeOp.INSERT
        return EdgeDelta(op, self.src, self.dst)

    def __str__(self):
        return f"{self.op.value} {self.src} {self.dst}"


class DynamicGraph:
    """Sorted out/in adjacency lists plus the edge changes of the open round.

    ``apply_delta`` opens a round (or extends the open one); until ``commit``
    the previous snapshot stays queryable through ``neighbors_prev``.
    """

    def __init__(self, num_nodes, edges=()):
        self.num_nodes = int(num_nodes)
        self.out_adj = [[] for _ in range(self.num_nodes)]
        self.in_adj = [[] for _ in range(self.num_nodes)]
        self.pending_delta = []
        self._round_open = False
        # net change of the open round: (src, dst) -> EdgeOp
        self._net = {}
        for s, d in edges:
            self._insert(int(s), int(d))

    @classmethod
    def from_edges(cls, num_nodes, edges):
        return cls(num_nodes, edges)

    def _check_node(self, u):
        if not 0 <= u < self.num_nodes:
            raise IndexError(f"node {u} out of range [0, {self.num_nodes})")

    def has_edge(self, u, v):
        row = self.out_adj[u]
        i = bisect.bisect_left(row, v)
        return i < len(row) and row[i] == v

    def _insert(self, u, v):
        self._check_node(u)
        self._check_node(v)
        if self.has_edge(u, v):
            raise DuplicateEdge(f"edge ({u}, {v}) already present")
        bisect.insort(self.out_adj[u], v)
        bisect.insort(self.in_adj[v], u)

    def _delete(self, u, v):
        self._check_node(u)
        self._check_node(v)
        if not self.has_edge(u, v):
            raise MissingEdge(f"edge ({u}, {v}) not present")
        self.out_adj[u].remove(v)
        self.in_adj[v].remove(u)

    @property
    def num_edges(self):
        return sum(len(r) for r in self.out_adj)

    def edges(self):
        for u, row in enumerate(self.out_adj):
            for v in row:
                yield u, v

    def apply_delta(self, delta):
        self._round_open = True
        for i, d in enumerate(delta):
            try:
                if d.op is EdgeOp.INSERT:
                    self._insert(d.src, d.dst)
                else:
                    self._delete(d.src, d.dst)
            except (DuplicateEdge, MissingEdge, IndexError):
                # leave the graph as it was before this call
                for done in reversed(delta[:i]):
                    inv = done.inverted()
                    if inv.op is EdgeOp.INSERT:
                        self._insert(inv.src, inv.dst)
                    else:
                        self._delete(inv.src, inv.dst)
                    self._undo_net(done)
                if i:
                    del self.pending_delta[-i:]
                raise
            self.pending_delta.append(d)
            self._record_net(d)

    def _record_net(self, d):
        key = (d.src, d.dst)
        prev = self._net.pop(key, None)
        if prev is None:
            self._net[key] = d.op
        # an insert followed by a delete (or vice versa) cancels out

    def _undo_net(self, d):
        self._record_net(d.inverted())

    def net_delta(self):
        """Edges inserted and deleted relative to the previous snapshot, sorted."""
        ins = sorted(k for k, op in self._net.items() if op is EdgeOp.INSERT)
        dels = sorted(k for k, op in self._net.items() if op is EdgeOp.DELETE)
        return ins, dels

    def neighbors(self, u, direction=Direction.OUT):
        self._check_node(u)
        adj = self.out_adj if direction is Direction.OUT else self.in_adj
        return list(adj[u])

    def neighbors_prev(self, u, direction=Direction.OUT):
        if not self._round_open:
            raise StaleDelta("no open round: previous snapshot is not available")
        cur = self.neighbors(u, direction)
        if not self._net:
            return cur
        out = direction is Direction.OUT
        added, removed = set(), set()
        # _net is tiny relative to the graph; a scan is cheaper than an index
        for (s, d), op in self._net.items():
            if (s if out else d) != u:
                continue
            other = d if out else s
            if op is EdgeOp.INSERT:
                removed.add(other)
            else:
                added.add(other)
        if not added and not removed:
            return cur
        return sorted((set(cur) - removed) | added)

    def in_degree(self, u):
        return len(self.in_adj[u])

    def in_degree_prev(self, u):
        return len(self.neighbors_prev(u, Direction.IN))

    def commit(self):
        self.pending_delta = []
        self._net = {}
        self._round_open = False

    def copy(self):
        g = DynamicGraph(self.num_nodes)
        g.out_adj = [list(r) for r in self.out_adj]
        g.in_adj = [list(r) for r in self.in_adj]
        return g

    def in_csr(self):
        """(indptr, indices) of the in-adjacency, neighbors ascending."""
        counts = np.fromiter((len(r) for r in self.in_adj), dtype=np.int64, count=self.num_nodes)
        indptr = np.zeros(self.num_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.fromiter(
            (u for r in self.in_adj for u in r), dtype=np.int64, count=int(indptr[-1])
        )
        return indptr, indices


def symmetrize_delta(delta):
    out = []
    for d in delta:
        out.append(d)
        if d.src != d.dst:
            out.append(EdgeDelta(d.op, d.dst, d.src))
    return out


def read_edge_list(path, symmetrize=False):
    """Edges from a ``src dst`` text file. Blank lines and ``#`` comments are skipped."""
    edges = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'src dst', got {line!r}")
            s, d = int(parts[0]), int(parts[1])
            pairs = [(s, d), (d, s)] if symmetrize and s != d else [(s, d)]
            for e in pairs:
                if e in seen:
                    if symmetrize:
                        continue
                    raise DuplicateEdge(f"{path}:{lineno}: duplicate edge {e}")
                seen.add(e)
                edges.append(e)
    return edges


def load_graph(path, num_nodes=None, symmetrize=False):
    edges = read_edge_list(path, symmetrize=symmetrize)
    if num_nodes is None:
        num_nodes = 1 + max((max(e) for e in edges), default=-1)
    return DynamicGraph(num_nodes, edges)


def write_edge_list(path, edges):
    with open(path, "w", encoding="utf-8") as fh:
        for s, d in edges:
            fh.write(f"{s} {d}\n")


def read_update_stream(path):
    """Events from a ``<+|-> src dst`` text file, in file order."""
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] not in ("+", "-"):
                raise ValueError(f"{path}:{lineno}: expected '<+|-> src dst', got {line!r}")
            events.append(EdgeDelta(EdgeOp(parts[0]), int(parts[1]), int(parts[2])))
    return events


def write_update_stream(path, events):
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(f"{e}\n")


def batches(events, num_updates):
    if num_updates < 1:
        raise ValueError("num_updates must be >= 1")
    for i in range(0, len(events), num_updates):
        yield events[i:i + num_updates]
