"""The blid program under the three sharing policies: without sharing the
heap doubles per step, sharing after each collection keeps it flat, and an
extra collection right after sharing makes the heap grow again."""

from sharewam.bench import report, run_bench

runs = [run_bench("blid", p, n, heap_cells=4096) for p in ("r0", "r1", "r2") for n in (10, 12, 14)]
for r in runs:
    r.bench = f"blid{r.size}"
print(report(runs))
