"""Command line harness: ``gen``, ``init``, ``stream``, ``verify``, ``report``.

Exit status is 0 on success, 2 when a verification finds a mismatch and 1 on
I/O or format errors.
"""
from __future__ import annotations

import argparse
import os
import sys
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from monostream.baseline import affected_inference, full_inference
from monostream.checkpoint import CheckpointStore, init_full_inference
from monostream.engine import Engine
from monostream.errors import MonostreamError
from monostream.graph import (
    batches, load_graph, read_update_stream, symmetrize_delta, write_edge_list,
    write_update_stream,
)
from monostream.model import builtin_model, load_model, save_weights
from monostream.stats import format_record, format_report, read_records, summarize
from monostream.synth import generate
from monostream.tensorio import read_tensor, write_tensor

EXIT_OK, EXIT_IO, EXIT_MISMATCH = 0, 1, 2


class VerifyMismatch(Exception):
    def __init__(self, where):
        super().__init__(where)
        self.where = where


@dataclass
class RunConfig:
    graph: str
    features: str
    model: str
    weights: str
    stream: str | None = None
    checkpoints: str | None = None
    num_updates: int = 1
    symmetrize: bool = False
    verify: str = "off"
    seed: int = 0

    def __post_init__(self):
        if self.num_updates < 1:
            raise ValueError("num_updates must be >= 1")
        for p in (self.graph, self.features, self.model, self.weights, self.stream):
            if p is not None and not os.path.exists(p):
                raise FileNotFoundError(p)


def _setup(cfg):
    feats = read_tensor(cfg.features)
    if feats.ndim != 2:
        raise MonostreamError(f"{cfg.features}: features must be rank 2")
    g = load_graph(cfg.graph, num_nodes=feats.shape[0], symmetrize=cfg.symmetrize)
    model = load_model(cfg.model, cfg.weights, feats.shape[1])
    return g, feats, model


def first_difference(store, reference):
    """(stage, layer, node, index) of the first mismatch, or None."""
    pairs = [("msg", l, a, b) for l, (a, b) in enumerate(zip(store.messages, reference.messages))]
    pairs += [("agg", l, a, b) for l, (a, b) in enumerate(zip(store.alphas, reference.alphas))]
    for stage, layer, a, b in pairs:
        if a.shape != b.shape:
            return stage, layer, -1, -1
        diff = a.view(np.uint32) != b.view(np.uint32)
        if diff.any():
            node, idx = np.argwhere(diff)[0]
            return stage, layer, int(node), int(idx)
    return None


def _check(store, g, feats, model):
    where = first_difference(store, full_inference(g, feats, model))
    if where is not None:
        raise VerifyMismatch(where)


def _model_name(path):
    return os.path.splitext(os.path.basename(path))[0]


def cmd_gen(args):
    edges, feats, stream = generate(args.nodes, args.avg_degree, args.feature_len,
                                    args.stream_len, args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_edge_list(os.path.join(args.out, "edges.txt"), edges)
    write_tensor(os.path.join(args.out, "features.tnsr"), feats)
    write_update_stream(os.path.join(args.out, "stream.txt"), stream)
    for kind in args.model or []:
        text, weights = builtin_model(kind, args.feature_len, seed=args.seed)
        with open(os.path.join(args.out, f"{kind}.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
        save_weights(os.path.join(args.out, f"{kind}_weights"), weights)
    return EXIT_OK


def cmd_init(args):
    cfg = RunConfig(args.graph, args.features, args.model, args.weights, symmetrize=args.symmetrize)
    g, feats, model = _setup(cfg)
    init_full_inference(g, feats, model).save(args.out)
    return EXIT_OK


def cmd_stream(args):
    cfg = RunConfig(args.graph, args.features, args.model, args.weights, stream=args.stream,
                    checkpoints=args.checkpoints, num_updates=args.num_updates,
                    symmetrize=args.symmetrize, verify=args.verify)
    g, feats, model = _setup(cfg)
    store = CheckpointStore.load(cfg.checkpoints)
    engine = Engine(g, store, model)
    events = read_update_stream(cfg.stream)
    name = args.name or _model_name(cfg.model)
    stream_name = os.path.basename(cfg.stream)
    prev = full_inference(g, feats, model) if args.compare else None
    out = open(args.stats, "w", encoding="utf-8") if args.stats else sys.stdout
    try:
        for batch in batches(events, cfg.num_updates):
            delta = symmetrize_delta(batch) if cfg.symmetrize else batch
            stats = engine.process_update_round(delta)
            if prev is not None:
                res = affected_inference(g, delta, feats, model, prev)
                stats.baseline_fetches = res.fetches
                prev = res
            out.write(format_record(stats, name, stream_name) + "\n")
            if cfg.verify == "every-round":
                _check(store, g, feats, model)
        if cfg.verify == "final":
            _check(store, g, feats, model)
    finally:
        if out is not sys.stdout:
            out.close()
    if args.out:
        store.save(args.out)
        write_edge_list(os.path.join(args.out, "edges.txt"), g.edges())
    return EXIT_OK


def cmd_verify(args):
    cfg = RunConfig(args.graph, args.features, args.model, args.weights, stream=args.stream,
                    symmetrize=args.symmetrize)
    g, feats, model = _setup(cfg)
    if cfg.stream:
        events = read_update_stream(cfg.stream)
        g.apply_delta(symmetrize_delta(events) if cfg.symmetrize else events)
        g.commit()
    store = CheckpointStore.load(args.checkpoints)
    _check(store, g, feats, model)
    print("ok")
    return EXIT_OK


def cmd_report(args):
    groups = defaultdict(list)
    for path in args.stats:
        for rec in read_records(path):
            groups[(str(rec.get("model", "-")), str(rec.get("stream", "-")))].append(rec)
    print(format_report(groups))
    if args.verbose:
        for key, recs in sorted(groups.items()):
            s = summarize(recs)
            print(f"{key[0]} {key[1]}: " + " ".join(f"{c}={n}" for c, n in s["counts"].items()))
    return EXIT_OK


def _add_run_args(p, stream=False):
    p.add_argument("--graph", required=True, help="edge list, one 'src dst' per line")
    p.add_argument("--features", required=True, help="rank-2 TNSR feature tensor")
    p.add_argument("--model", required=True, help="model description file")
    p.add_argument("--weights", required=True, help="weight manifest")
    p.add_argument("--symmetrize", action="store_true",
                   help="treat every edge as two directed edges")
    if stream:
        p.add_argument("--stream", required=True, help="update stream, '<+|-> src dst' lines")


def build_parser():
    parser = argparse.ArgumentParser(prog="monostream", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a seeded synthetic graph, features and stream")
    p.add_argument("--nodes", type=int, default=1000)
    p.add_argument("--avg-degree", type=float, default=8.0)
    p.add_argument("--feature-len", type=int, default=16)
    p.add_argument("--stream-len", type=int, default=200)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--model", action="append", choices=["gcn", "sage", "gin"],
                   help="also write a built-in model description and random weights")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("init", help="full inference on the base graph, write checkpoints")
    _add_run_args(p)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("stream", help="apply an update stream incrementally")
    _add_run_args(p, stream=True)
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--num-updates", type=int, default=1)
    p.add_argument("--verify", choices=["off", "every-round", "final"], default="off")
    p.add_argument("--compare", action="store_true",
                   help="run the affected-area baseline and record its fetch count")
    p.add_argument("--stats", help="write round records here instead of stdout")
    p.add_argument("--name", help="model label used in the records")
    p.add_argument("--out", help="write final checkpoints and edge list here")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("verify", help="compare checkpoints with full inference")
    _add_run_args(p)
    p.add_argument("--stream", help="apply this whole stream to the graph first")
    p.add_argument("--checkpoints", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="summarize round records")
    p.add_argument("stats", nargs="+")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VerifyMismatch as exc:
        stage, layer, node, idx = exc.where
        print(f"mismatch: stage={stage} layer={layer + 1} node={node} index={idx}", file=sys.stderr)
        return EXIT_MISMATCH
    except (OSError, ValueError, KeyError, MonostreamError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
