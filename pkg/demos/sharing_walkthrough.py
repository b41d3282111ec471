"""Build duplicated terms on a raw machine state, run the sharer, and watch
the collector reclaim the copies.  A trailed binding keeps its term apart."""

from sharewam import MachineState, collect, run_sharer
from sharewam.terms import TermWriter, Var, put

state = MachineState(1024)
roots: list[int] = []
state.root_providers.append(lambda: [(roots, i) for i in range(len(roots))])

env: dict = {}
for _ in range(3):
    roots.append(put(state, ("point", 1, ("color", "red"), [1, 2, 3]), env))
# X is older than the choicepoint and bound after it, so its binding is trailed
roots.append(put(state, ("point", Var("X")), env))
x = env["X"]
state.push_choicepoint()
state.bind(x >> 4, put(state, 1))
roots.append(put(state, ("point", 1), env))

w = TermWriter(state)
print("terms:", [w.format(c) for c in roots])
print("heap cells before:", state.heap.top)
collect(state)
print("after a plain collection:", state.heap.top)
stats = run_sharer(state)
collect(state)
print(f"after sharing ({stats.absorptions} absorptions) and collecting:", state.heap.top)
print("struct bodies:", sorted({c >> 4 for c in roots}))
print("terms still read:", [w.format(c) for c in roots])
state.backtrack()
print("after backtracking the binding:", [w.format(c) for c in roots])
