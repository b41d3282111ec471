import pytest

from sharewam import gc
from sharewam.sharer import (
    BUSY,
    CYCLE_HASH,
    IMPOSSIBLE,
    NO_INFO,
    Policy,
    Sharer,
    can_absorb,
    run_sharer,
    terms_can_absorb,
)
from sharewam.store import MachineState, atom_cell, payload_of, struct_cell
from sharewam.terms import Var, put
from sharewam.unify import term_equal, unify


def put_at(state, addr, value):
    """Build ``value`` so that its body starts exactly at ``addr``."""
    if state.heap.top < addr:
        state.allocate(addr - state.heap.top)
    assert state.heap.top == addr
    return put(state, value)


def fresh_sharer(state, **kw):
    s = Sharer(state, seed=0, **kw)
    s.init_tables()
    return s


@pytest.mark.parametrize("text,expected", [("r0", Policy.OFF), ("-r1", Policy.AFTER_GC),
                                           ("r2", Policy.BETWEEN_GC), ("off", Policy.OFF)])
def test_policy_names(text, expected):
    assert Policy.parse(text) is expected


def test_policy_unknown():
    with pytest.raises(ValueError):
        Policy.parse("r7")


def test_init_tables_with_empty_trail(state):
    put(state, ("f", "a"))
    s = fresh_sharer(state)
    assert s.cached == [NO_INFO, NO_INFO]


def test_init_tables_marks_trailed_entries(state):
    for _ in range(10):
        state.heap.new_var()
    state.push_choicepoint()
    state.bind(7, atom_cell("a"))
    s = fresh_sharer(state)
    assert s.cached[7] == IMPOSSIBLE
    assert all(e == NO_INFO for i, e in enumerate(s.cached) if i != 7)


def test_equal_terms_hash_alike(state):
    a = put(state, ("f", "a", "b"))
    b = put(state, ("f", "a", "b"))
    s = fresh_sharer(state)
    assert s.compute_hash(a) == s.compute_hash(b)


def test_cyclic_term_terminates_with_back_edge_constant(state):
    env = {}
    x = put(state, Var("X"), env)
    unify(state, x, put(state, ("f", 1, Var("X")), env))
    s = fresh_sharer(state)
    seen = []
    orig = s._save_hash

    def spy(h, key):
        # the body is still busy when its own argument loops back to it
        seen.append(s.cached[key])
        orig(h, key)

    s._save_hash = spy
    h = s.compute_hash(x)
    assert h is not None
    assert seen == [BUSY]
    assert s.bucket_of(payload_of(state.deref(x))) is not None
    assert CYCLE_HASH == 17


def test_trailed_cell_poisons_enclosing_terms(state):
    env = {}
    outer = put(state, ("g", ("f", Var("X"))), env)
    state.push_choicepoint()
    state.bind(payload_of(env["X"]), atom_cell("a"))
    s = fresh_sharer(state)
    assert s.compute_hash(outer) is None
    q = payload_of(outer)
    inner = payload_of(state.heap.cells[q + 1])
    assert s.cached[q] == IMPOSSIBLE and s.cached[inner] == IMPOSSIBLE


def test_oldest_representative_wins_in_treatment_order(state):
    t10 = put_at(state, 10, ("f", "a", "b"))
    t30 = put_at(state, 30, ("f", "a", "b"))
    t50 = put_at(state, 50, ("f", "a", "b"))
    s = fresh_sharer(state)
    for t in (t30, t10, t50):
        s.compute_hash(t)
    assert s.buckets_used == 1
    assert s.representative(30) == 10
    assert s.representative(50) == 10


def test_collision_keeps_unequal_terms_apart(state):
    a = put(state, ("f", "a"))
    b = put(state, ("g", "b"))
    s = Sharer(state, table_size=1, seed=0)
    s.init_tables()
    s.build()
    assert s.buckets_used == 2
    assert s.heads[0] != -1 and s.bucket_next[s.heads[0]] != -1
    assert s.representative(payload_of(a)) == payload_of(a)
    assert s.representative(payload_of(b)) == payload_of(b)


def test_singleton_is_its_own_representative(state):
    t = put(state, ("f", "a"))
    s = fresh_sharer(state)
    s.build()
    assert s.representative(payload_of(t)) == payload_of(t)
    assert s.absorb() == 0


def test_build_counts(state):
    put(state, ("f", "a"))
    s = fresh_sharer(state)
    s.build()
    assert s.buckets_used == 1
    st = MachineState(64)
    st.allocate(4)
    for i in range(4):
        st.heap.cells[i] = atom_cell("x")
    s = fresh_sharer(st)
    s.build()
    assert s.buckets_used == 0


def test_build_does_not_touch_heap(state, roots):
    roots.add(("f", ["a", "b"], ("f", ["a", "b"])))
    before = list(state.heap.cells[: state.heap.top])
    s = fresh_sharer(state)
    s.build()
    assert state.heap.cells[: state.heap.top] == before


def test_build_can_be_abandoned(state):
    for _ in range(10):
        put(state, ("f", "a"))
    s = fresh_sharer(state)
    before = list(state.heap.cells)
    assert s.build(abandon=lambda: True, check_every=1) is False
    assert state.heap.cells == before


def test_absorb_then_gc_drops_duplicates(state, roots):
    for _ in range(3):
        roots.add(("f", "a", "b"))
    stats = run_sharer(state)
    assert stats.absorptions == 2
    assert len(set(roots.cells)) == 1
    gc.collect(state)
    assert state.heap.top == 3
    assert roots.shown() == ["f(a,b)"] * 3


def test_absorb_on_duplicate_free_heap_is_noop(state, roots):
    roots.add(("f", "a"))
    roots.add(("g", ["a"]))
    before = (list(state.heap.cells[: state.heap.top]), list(roots.cells))
    assert run_sharer(state).absorptions == 0
    assert (list(state.heap.cells[: state.heap.top]), list(roots.cells)) == before


def test_lists_are_shared_through_heap_holders(state, roots):
    roots.add(("h", ["a", "b"], ["a", "b"]))
    q = payload_of(roots[0])
    assert state.heap.cells[q + 1] != state.heap.cells[q + 2]
    run_sharer(state)
    assert state.heap.cells[q + 1] == state.heap.cells[q + 2]


def test_second_run_absorbs_nothing(state, roots):
    for _ in range(4):
        roots.add(("f", ["x", ("g", 1)], "y"))
    assert run_sharer(state).absorptions > 0
    assert run_sharer(state).absorptions == 0


def test_mutable_bodies_never_shared(state, roots):
    from sharewam.store import SYMBOLS
    state.mutable_functors.add(SYMBOLS.functor("box", 1))
    roots.add(("box", "a"))
    roots.add(("box", "a"))
    roots.add(("w", ("box", "a")))
    roots.add(("w", ("box", "a")))
    assert run_sharer(state).absorptions == 0


def test_can_absorb_cells(state):
    state.allocate(3)
    cells = state.heap.cells
    cells[0] = cells[1] = atom_cell("a")
    cells[2] = atom_cell("b")
    assert can_absorb(state, 0, 1)
    assert not can_absorb(state, 1, 0)
    assert not can_absorb(state, 0, 2)


def test_terms_can_absorb(state):
    a = put(state, ("f", "a"))
    b = put(state, ("f", "a"))
    assert terms_can_absorb(state, a, b)
    assert not terms_can_absorb(state, b, a)
    env = {}
    c = put(state, ("f", Var("X")), env)
    d = put(state, ("f", Var("X")), env)
    state.push_choicepoint()
    state.bind(payload_of(env["X"]), atom_cell("a"))
    assert term_equal(state, c, a)
    assert not terms_can_absorb(state, a, d)
    assert not terms_can_absorb(state, c, d)


def test_struct_roots_are_rewritten(state):
    a = put(state, ("f", 1))
    b = put(state, ("f", 1))
    r = [b]
    state.root_providers.append(lambda: [(r, 0)])
    run_sharer(state)
    assert r[0] == a == struct_cell(payload_of(a))
