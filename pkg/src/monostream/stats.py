"""Line-delimited ``key=value`` round records and the summary report."""
from __future__ import annotations

import statistics
from dataclasses import fields

from monostream.engine import Condition, LayerStats

CONDITIONS = [c.value for c in Condition]
_LAYER_FIELDS = [f.name for f in fields(LayerStats)]


def format_record(stats, model="", stream=""):
    parts = [f"round={stats.round}", f"model={model or '-'}", f"stream={stream or '-'}",
             f"updates={stats.updates}", f"layers={len(stats.layers)}"]
    for i, ls in enumerate(stats.layers, 1):
        for name in _LAYER_FIELDS:
            parts.append(f"L{i}.{name}={getattr(ls, name)}")
    parts.append(f"fetches={stats.fetches}")
    if stats.baseline_fetches is not None:
        parts.append(f"baseline_fetches={stats.baseline_fetches}")
    return " ".join(parts)


def parse_record(line):
    rec = {}
    for tok in line.split():
        key, _, value = tok.partition("=")
        rec[key] = int(value) if value.lstrip("-").isdigit() else value
    return rec


def read_records(path):
    with open(path, encoding="utf-8") as fh:
        return [parse_record(line) for line in fh if line.strip() and not line.startswith("#")]


def condition_counts(records):
    counts = dict.fromkeys(CONDITIONS, 0)
    for rec in records:
        for i in range(1, rec["layers"] + 1):
            for c in CONDITIONS:
                counts[c] += rec[f"L{i}.{c}"]
    return counts


def summarize(records):
    """Condition distribution and fetch reduction over a set of round records."""
    counts = condition_counts(records)
    total = sum(counts.values())
    pct = {c: (100.0 * v / total if total else 0.0) for c, v in counts.items()}
    incremental = sum(pct[c] for c in CONDITIONS if c != Condition.EXPOSED_RESET.value)
    out = {
        "rounds": len(records),
        "grouped_targets": total,
        "counts": counts,
        "percent": pct,
        "incremental_percent": incremental,
        "exposed_percent": pct[Condition.EXPOSED_RESET.value],
        "fetches": sum(r["fetches"] for r in records),
    }
    with_base = [r for r in records if "baseline_fetches" in r]
    if with_base:
        base = sum(r["baseline_fetches"] for r in with_base)
        eng = sum(r["fetches"] for r in with_base)
        out["baseline_fetches"] = base
        out["reduction"] = base / eng if eng else float("inf")
        ratios = [r["fetches"] / r["baseline_fetches"] for r in with_base if r["baseline_fetches"]]
        out["median_fetch_ratio"] = statistics.median(ratios) if ratios else 0.0
    return out


def format_report(groups):
    """Human-readable table; ``groups`` maps (model, stream) to record lists."""
    header = (f"{'model':<8} {'stream':<16} {'rounds':>6} {'no_del%':>8} {'del_ne%':>8} "
              f"{'covered%':>9} {'exposed%':>9} {'incr%':>7} {'reduction':>10}")
    lines = [header, "-" * len(header)]
    for (model, stream), recs in sorted(groups.items()):
        s = summarize(recs)
        p = s["percent"]
        red = f"{s['reduction']:.1f}x" if "reduction" in s else "-"
        lines.append(
            f"{model:<8} {stream:<16} {s['rounds']:>6} {p['no_deletion']:>8.1f} "
            f"{p['deletion_no_effect']:>8.1f} {p['covered_reset']:>9.1f} "
            f"{p['exposed_reset']:>9.1f} {s['incremental_percent']:>7.1f} {red:>10}"
        )
    return "\n".join(lines)
