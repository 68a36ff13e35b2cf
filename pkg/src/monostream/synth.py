"""Seeded synthetic graphs, features and mixed insert/delete streams."""
import numpy as np

from monostream.graph import EdgeDelta


def random_edges(num_nodes, avg_degree, rng):
    """``num_nodes * avg_degree`` distinct directed edges, no self loops."""
    target = int(round(num_nodes * avg_degree))
    max_edges = num_nodes * (num_nodes - 1)
    if target > max_edges:
        raise ValueError(f"cannot place {target} edges on {num_nodes} nodes")
    edges = set()
    while len(edges) < target:
        batch = rng.integers(0, num_nodes, size=(2 * (target - len(edges)) + 16, 2))
        for s, d in batch.tolist():
            if s != d:
                edges.add((s, d))
                if len(edges) == target:
                    break
    return sorted(edges)


def random_features(num_nodes, feature_len, rng):
    return rng.random((num_nodes, feature_len), dtype=np.float32)


def random_stream(num_nodes, edges, stream_len, rng, insert_fraction=0.6):
    """Mixed stream; deletes always hit a live edge, inserts a missing one."""
    live = list(edges)
    pos = {e: i for i, e in enumerate(live)}
    events = []
    for _ in range(stream_len):
        if live and rng.random() >= insert_fraction:
            i = int(rng.integers(len(live)))
            e = live[i]
            last = live.pop()
            if i < len(live):
                live[i] = last
                pos[last] = i
            del pos[e]
            events.append(EdgeDelta.delete(*e))
            continue
        while True:
            s, d = (int(x) for x in rng.integers(0, num_nodes, size=2))
            if s != d and (s, d) not in pos:
                break
        pos[(s, d)] = len(live)
        live.append((s, d))
        events.append(EdgeDelta.insert(s, d))
    return events


def generate(num_nodes, avg_degree, feature_len, stream_len, seed, insert_fraction=0.6):
    rng = np.random.default_rng(seed)
    edges = random_edges(num_nodes, avg_degree, rng)
    feats = random_features(num_nodes, feature_len, rng)
    stream = random_stream(num_nodes, edges, stream_len, rng, insert_fraction)
    return edges, feats, stream
