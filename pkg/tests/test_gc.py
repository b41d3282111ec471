from sharewam import gc
from sharewam.store import MachineState, payload_of
from sharewam.terms import Var, put
from sharewam.unify import unify


def test_dead_terms_are_reclaimed_and_order_kept(state, roots):
    state.allocate(3)  # garbage before
    i = roots.add(("f", "a"))
    put(state, ("g", "b"))  # dead
    j = roots.add(("h", "c"))
    stats = gc.collect(state)
    assert state.heap.top == 4
    assert stats.collected_cells == 5
    assert payload_of(roots[i]) == 0 and payload_of(roots[j]) == 2
    assert roots.shown() == ["f(a)", "h(c)"]


def test_empty_root_set_empties_heap(state):
    put(state, ("f", ("g", 1)))
    gc.collect(state)
    assert state.heap.top == 0


def test_second_collection_reclaims_nothing(state, roots):
    roots.add(("f", ["x", "y"], Var("V")))
    put(state, ("junk", 1))
    gc.collect(state)
    assert gc.collect(state).collected_cells == 0


def test_choicepoint_hb_and_trail_remapped(state, roots):
    put(state, ("dead", 1, 2))  # 3 cells of garbage below
    env = {}
    i = roots.add(("f", Var("X")), env)
    cp = state.push_choicepoint()
    x_addr = payload_of(env["X"])
    state.bind(x_addr, put(state, ("g", 1)))
    gc.collect(state)
    assert cp.hb == 2
    assert state.trail_addr == [1]
    state.backtrack()
    assert roots.shown()[i] == "f(A)"


def test_trail_entries_of_dead_cells_are_dropped(state):
    x = state.heap.new_var()
    state.push_choicepoint()
    state.bind(x, put(state, ("g", 1)))
    gc.collect(state)
    assert state.trail_addr == []


def test_value_trail_old_values_are_roots(state):
    t = put(state, ("box", "a"))
    old = put(state, ("old", 1))
    state.heap.cells[payload_of(t) + 1] = old
    r = [t]
    state.root_providers.append(lambda: [(r, 0)])
    state.push_choicepoint()
    state.set_value(payload_of(r[0]) + 1, put(state, "new"))
    gc.collect(state)
    state.backtrack()
    from sharewam.terms import format_term
    assert format_term(state, r[0]) == "box(old(1))"


def test_barriers_are_remapped(state, roots):
    put(state, ("dead", 1))
    roots.add(("live", 1))
    tok = state.new_barrier()
    gc.collect(state)
    assert state.barriers[tok] == 2


def test_expansion_threshold_is_strict():
    st = MachineState(100)
    st.heap.top = 80
    assert gc.maybe_expand(st) and st.heap.capacity == 200
    st = MachineState(100)
    st.heap.top = 10
    assert not gc.maybe_expand(st)
    st = MachineState(100)
    st.heap.top = 75
    assert not gc.maybe_expand(st) and st.heap.capacity == 100


def test_collect_expands_full_heap():
    st = MachineState(16)
    r = [put(st, ("f", 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12))]
    st.root_providers.append(lambda: [(r, 0)])
    stats = gc.collect(st)
    assert stats.expansions == 1 and st.heap.capacity == 32


def test_cyclic_live_term_survives(state, roots):
    env = {}
    x = put(state, Var("X"), env)
    assert unify(state, x, put(state, ("f", 1, Var("X")), env))
    roots.push(x)
    put(state, ("dead",  1))
    gc.collect(state)
    assert roots.shown() == ["f(1,...)"]
