"""Benchmark harness: run a corpus program under a sharing policy and report
garbage collection, sharing and heap statistics.

Usage::

    python -m sharewam.bench run --name tails --size 1000 --policy r1 \
        --heap-cells 1048576 --report csv
    python -m sharewam.bench run --name blid --size 14 -r2

Times are wall-clock milliseconds; heap figures are in cells.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from dataclasses import dataclass

from .corpus import source
from .engine import Engine
from .sharer import Policy

BENCHMARKS = ("tails", "tree", "blid", "best", "worst", "examples")
FINDALL_VARIANTS = ("classic", "sharing", "copy-once")

DEFAULT_SIZE = {"tails": 1000, "tree": 3, "blid": 12, "best": 12, "worst": 12, "examples": 0}

_TAILS_PRED = {"classic": "findall_tails", "sharing": "sharing_findall_tails",
               "copy-once": "copy_once_findall_tails"}
_TREE_PRED = {"classic": "f1", "sharing": "f1_sharing", "copy-once": "f1_copy_once"}

COLUMNS = ("bench", "policy", "gc_time_ms", "share_time_ms", "total_runtime_ms", "gc_count",
           "initial_heap_cells", "final_heap_cells", "collected_cells", "at_end_cells")


@dataclass
class BenchReport:
    bench: str
    policy: str
    gc_time_ms: float
    share_time_ms: float
    total_runtime_ms: float
    gc_count: int
    initial_heap_cells: int
    final_heap_cells: int
    collected_cells: int
    at_end_cells: int
    # not part of the printed table
    size: int = 0
    findall: str = ""
    absorptions: int = 0
    expansions: int = 0
    result_cells: int | None = None

    def row(self) -> list:
        return [getattr(self, c) for c in COLUMNS]


def bench_program(name: str) -> str:
    if name in ("best", "worst"):
        return source("bestworst")
    return source(name)


def bench_query(name: str, size: int, findall: str = "sharing") -> str:
    """The top-level query that ``run_bench`` executes."""
    if findall not in FINDALL_VARIANTS:
        raise ValueError(f"unknown findall variant {findall!r}")
    if name == "tails":
        return (f"mk_list({size}, L), heap_used(H0), {_TAILS_PRED[findall]}(L, T), "
                f"heap_used(H1), R is H1 - H0")
    if name == "tree":
        return f"{_TREE_PRED[findall]}({size})"
    if name == "blid":
        return f"blid({size})"
    if name in ("best", "worst"):
        return f"{name}({size}, T)"
    if name == "examples":
        return "main3, main4, main5, main6"
    raise ValueError(f"unknown benchmark {name!r}; expected one of {', '.join(BENCHMARKS)}")


def run_bench(name: str, policy: str | Policy = "r0", size: int | None = None,
              heap_cells: int = 1 << 16, findall: str = "sharing",
              max_heap_cells: int = 1 << 28, seed: int | None = None) -> BenchReport:
    """Load the program for ``name`` into a fresh machine and run its query once."""
    if size is None:
        size = DEFAULT_SIZE.get(name, 0)
    query = bench_query(name, size, findall)
    pol = policy if isinstance(policy, Policy) else Policy.parse(policy)
    engine = Engine(heap_cells=heap_cells, policy=pol, max_heap_cells=max_heap_cells, seed=seed)
    engine.consult(bench_program(name))
    t0 = time.perf_counter()
    sols = engine.solutions(query, limit=1)
    elapsed = time.perf_counter() - t0
    if not sols:
        raise RuntimeError(f"benchmark query failed: {query}")
    g, s = engine.gc_stats, engine.share_stats
    return BenchReport(
        bench=name,
        policy=pol.value,
        gc_time_ms=round(g.gc_time * 1000, 3),
        share_time_ms=round(s.share_time * 1000, 3),
        total_runtime_ms=round(elapsed * 1000, 3),
        gc_count=g.collections,
        initial_heap_cells=heap_cells,
        final_heap_cells=engine.state.heap.capacity,
        collected_cells=g.collected_cells,
        at_end_cells=engine.state.heap.top,
        size=size,
        findall=findall,
        absorptions=s.absorptions,
        expansions=g.expansions,
        result_cells=int(sols[0]["R"]) if "R" in sols[0] else None,
    )


def report(runs: list[BenchReport], fmt: str = "table") -> str:
    if fmt not in ("table", "csv"):
        raise ValueError(f"unknown report format {fmt!r} (expected table or csv)")
    if not runs:
        raise ValueError("no completed runs to report")
    rows = [list(COLUMNS)] + [[str(v) for v in r.row()] for r in runs]
    if fmt == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        return buf.getvalue()
    widths = [max(len(row[k]) for row in rows) for k in range(len(COLUMNS))]
    lines = ["  ".join(v.rjust(w) if k >= 2 else v.ljust(w) for k, (v, w) in enumerate(zip(row, widths))).rstrip()
             for row in rows]
    return "\n".join(lines) + "\n"


def _split(values: list[str], allowed: tuple) -> list[str]:
    out: list[str] = []
    for v in values:
        for part in v.split(","):
            part = part.strip()
            if part == "all":
                out.extend(allowed)
            elif part:
                out.append(part)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sharewam-bench", description="Run sharing/GC benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run benchmarks and print a report")
    run.add_argument("--name", action="append", required=True,
                     help=f"benchmark ({', '.join(BENCHMARKS)}, comma list or 'all'); repeatable")
    run.add_argument("--size", type=int, default=None,
                     help="list length, tree depth or N (default depends on the benchmark)")
    run.add_argument("--policy", action="append", default=None,
                     help="sharing policy r0, r1, r2 (comma list or 'all'); repeatable")
    for p in ("r0", "r1", "r2"):
        run.add_argument(f"-{p}", dest="policy", action="append_const", const=p,
                         help=f"same as --policy {p}")
    run.add_argument("--heap-cells", type=int, default=1 << 16, help="initial heap capacity in cells")
    run.add_argument("--max-heap-cells", type=int, default=1 << 28, help="expansion limit in cells")
    run.add_argument("--findall", choices=FINDALL_VARIANTS, default="sharing",
                     help="findall flavour used by tails and tree")
    run.add_argument("--report", choices=("table", "csv"), default="table")
    run.add_argument("--seed", type=int, default=None, help="hash seed (default: $SHAREWAM_SEED or 0)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    names = _split(args.name, BENCHMARKS)
    for n in names:
        if n not in BENCHMARKS:
            parser.error(f"unknown benchmark {n!r}")
    policies = _split(args.policy or ["r0"], ("r0", "r1", "r2"))
    try:
        policies = [Policy.parse(p) for p in policies]
    except ValueError as exc:
        parser.error(str(exc))
    runs = [run_bench(n, p, args.size, args.heap_cells, args.findall, args.max_heap_cells, args.seed)
            for n in names for p in policies]
    sys.stdout.write(report(runs, args.report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
