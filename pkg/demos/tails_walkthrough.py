"""Collect every suffix of a list with the three findall flavours and compare
how many heap cells each result costs."""

from sharewam import Engine
from sharewam.corpus import source

e = Engine(heap_cells=1 << 20)
e.consult(source("tails"))

print("Answers for a list with variables:")
for pred in ("findall_tails", "sharing_findall_tails", "copy_once_findall_tails", "all_tails"):
    print(f"  {pred:26} {e.solutions(f'{pred}([X,Y,Z], T)')[0]['T']}")

print("\nHeap cells used by the result:")
print(f"  {'N':>5} {'classic':>10} {'sharing':>10} {'copy-once':>10}")
for n in (100, 200, 400, 800):
    row = []
    for pred in ("findall_tails", "sharing_findall_tails", "copy_once_findall_tails"):
        q = f"mk_list({n}, L), heap_used(H0), {pred}(L, T), heap_used(H1), R is H1 - H0"
        row.append(e.solutions(q)[0]["R"])
    print(f"  {n:>5} " + " ".join(f"{v:>10}" for v in row))
