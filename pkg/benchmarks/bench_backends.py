"""Compare the compiled and numpy kernel backends.

Kernel timings run in-process against each backend module. The end-to-end
timing replays a single-edge stream in a fresh interpreter per backend, with
MONOSTREAM_PURE_PYTHON selecting the fallback, and checks that both runs
leave byte-identical checkpoints.

    python3 benchmarks/bench_backends.py --nodes 1000 --rounds 200
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from monostream import kernels

_STREAM_SCRIPT = """
import hashlib, sys, time
from monostream import kernels
from monostream.checkpoint import init_full_inference
from monostream.engine import Engine
from monostream.graph import DynamicGraph
from monostream.model import Model, builtin_model, parse_model_description
from monostream.synth import generate

nodes, rounds, kind, seed = int(sys.argv[1]), int(sys.argv[2]), sys.argv[3], int(sys.argv[4])
edges, feats, stream = generate(nodes, 8, 16, rounds, seed)
text, weights = builtin_model(kind, 16, seed=seed)
model = Model(parse_model_description(text), weights, 16)
g = DynamicGraph(nodes, edges)
t0 = time.perf_counter()
store = init_full_inference(g, feats, model)
t1 = time.perf_counter()
eng = Engine(g, store, model)
for ev in stream:
    eng.process_update_round([ev])
t2 = time.perf_counter()
h = hashlib.sha256(b"".join(a.tobytes() for a in store.messages + store.alphas)).hexdigest()
print(kernels.BACKEND, t1 - t0, t2 - t1, h)
"""


def kernel_cases(rng, nodes, dim):
    table = rng.standard_normal((nodes, dim)).astype(np.float32)
    deg = rng.integers(0, 16, nodes)
    indptr = np.zeros(nodes + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    indices = rng.integers(0, nodes, int(indptr[-1]))
    W = rng.standard_normal((dim, dim)).astype(np.float32)
    b = rng.standard_normal(dim).astype(np.float32)
    rows = rng.integers(0, nodes, 12)
    x = table[0]
    return {
        "segment_reduce": lambda k: k.segment_reduce(False, table, indptr, indices),
        "reduce_rows": lambda k: k.reduce_rows(True, table, rows),
        "matmul_rows": lambda k: k.matmul_rows(table, W, b),
        "matvec": lambda k: k.matvec(W, x, b),
        "classify_positions": lambda k: k.classify_positions(False, x, table[1], table[2]),
    }


def bench_kernels(nodes, dim, repeat):
    cases = kernel_cases(np.random.default_rng(0), nodes, dim)
    out = {}
    for name, fn in cases.items():
        out[name] = {}
        for backend, mod in kernels.backends().items():
            timer = timeit.Timer(lambda: fn(mod))
            loops, _ = timer.autorange()
            best = min(timer.repeat(repeat, loops)) / loops
            out[name][backend] = best
    return out


def bench_stream(nodes, rounds, kind, seed):
    out = {}
    for backend in kernels.backends():
        env = dict(os.environ)
        if backend == "python":
            env["MONOSTREAM_PURE_PYTHON"] = "1"
        else:
            env.pop("MONOSTREAM_PURE_PYTHON", None)
        proc = subprocess.run(
            [sys.executable, "-c", _STREAM_SCRIPT, str(nodes), str(rounds), kind, str(seed)],
            env=env, capture_output=True, text=True, check=True)
        used, init_s, stream_s, digest = proc.stdout.split()
        out[backend] = {"used": used, "init": float(init_s), "stream": float(stream_s), "digest": digest}
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=1000)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--rounds", type=int, default=200)
    ap.add_argument("--model", choices=["gcn", "sage", "gin"], default="gcn")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print raw results as JSON")
    args = ap.parse_args(argv)

    results = {"kernels": bench_kernels(args.nodes, args.dim, args.repeat),
               "stream": bench_stream(args.nodes, args.rounds, args.model, args.seed)}
    if args.json:
        print(json.dumps(results, indent=2))
        return 0

    names = sorted(kernels.backends())
    print(f"{'kernel':<20}" + "".join(f"{n + ' us':>14}" for n in names) + f"{'speedup':>10}")
    for name, row in results["kernels"].items():
        cells = "".join(f"{row[n] * 1e6:>14.1f}" for n in names)
        speed = f"{row['python'] / row['cython']:>9.1f}x" if "cython" in row else ""
        print(f"{name:<20}{cells}{speed}")
    print()
    stream = results["stream"]
    for n in names:
        s = stream[n]
        print(f"{args.model} stream on {s['used']:<7} init {s['init']:.3f}s  "
              f"{args.rounds} rounds {s['stream']:.3f}s")
    digests = {s["digest"] for s in stream.values()}
    print("checkpoints identical across backends:", len(digests) == 1)
    return 0 if len(digests) == 1 else 1


if __name__ == "__main__":
    sys.exit(main())
