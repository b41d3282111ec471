"""Randomized properties of the store, collector, copier and sharer."""

import random

from hypothesis import given, settings
from hypothesis import strategies as st

from machines import RandomMachine, duplicate_pairs
from sharewam import Engine, gc
from sharewam.corpus import source
from sharewam.sharer import Sharer, run_sharer
from sharewam.store import LIST, REF, STRUCT, TAG_MASK, MachineState
from sharewam.terms import TermWriter, Var, format_term, put
from sharewam.unify import copy_term, term_equal, unify

seeds = st.integers(min_value=0, max_value=2**32 - 1)
FAST = settings(max_examples=60, deadline=None)


@FAST
@given(seeds)
def test_backtracking_is_an_exact_inverse(seed):
    m = RandomMachine(seed).run(15)
    st_ = m.state
    before = m.shown()
    depth = len(st_.choicepoints)
    st_.push_choicepoint()
    for _ in range(25):
        m.step(m.rng.choice(["term", "garbage", "var", "bind", "bind", "setarg", "box"]))
    st_.backtrack()
    m._drop_dead_roots()
    assert len(st_.choicepoints) == depth
    assert m.shown() == before


@FAST
@given(seeds)
def test_trail_is_minimal_after_cut(seed):
    m = RandomMachine(seed).run(40)
    st_ = m.state
    st_.cut_to(len(st_.choicepoints) // 2)
    if st_.choicepoints:
        hb = st_.choicepoints[-1].hb
        start = st_.choicepoints[-1].trail_top
        assert all(a < hb for a in st_.trail_addr[start:])
    else:
        assert st_.trail_addr == []


def pointer_order(cells):
    ptrs = [i for i, c in enumerate(cells) if c & TAG_MASK in (REF, STRUCT, LIST)]
    return sorted(ptrs, key=lambda i: (cells[i] >> 4, i))


@FAST
@given(seeds)
def test_gc_preserves_semantics_order_and_is_idempotent(seed):
    m = RandomMachine(seed).run(50)
    st_ = m.state
    before = m.shown()
    order = pointer_order(m.cells)
    gc.collect(st_)
    assert m.shown() == before
    # relative order of root targets is unchanged
    assert pointer_order(m.cells) == order
    assert gc.collect(st_).collected_cells == 0
    # and backtracking still restores the same views
    while st_.choicepoints:
        st_.backtrack()
        m._drop_dead_roots()
        view = m.shown()
        gc.collect(st_)
        assert m.shown() == view


@FAST
@given(seeds)
def test_sharing_never_changes_what_the_program_sees(seed):
    plain = RandomMachine(seed, sharing=False)
    shared = RandomMachine(seed, sharing=True)
    ops = random.Random(seed ^ 0x5EED)
    for _ in range(80):
        op = ops.choice(["term", "term", "garbage", "var", "bind", "bind", "box", "setarg",
                         "push", "push", "cut", "backtrack", "maintain"])
        plain.step(op)
        shared.step(op)
        assert shared.shown() == plain.shown()


@FAST
@given(seeds)
def test_sharer_is_idempotent(seed):
    m = RandomMachine(seed).run(60)
    run_sharer(m.state)
    assert run_sharer(m.state).absorptions == 0


@FAST
@given(seeds)
def test_perfect_dedup_after_absorb(seed):
    m = RandomMachine(seed).run(60)
    run_sharer(m.state)
    gc.collect(m.state)
    assert duplicate_pairs(m.state) == []


@FAST
@given(seeds)
def test_absorb_only_moves_references_to_older_bodies(seed):
    m = RandomMachine(seed).run(60)
    st_ = m.state
    before = list(st_.heap.cells[: st_.heap.top])
    s = Sharer(st_, seed=0)
    s.init_tables()
    s.build()
    s.absorb()
    for p, (old, new) in enumerate(zip(before, st_.heap.cells)):
        if old != new:
            assert new >> 4 <= old >> 4
            assert term_equal(st_, old, new)


@FAST
@given(seeds)
def test_sharing_does_not_increase_live_cells(seed):
    a = RandomMachine(seed).run(60)
    b = RandomMachine(seed).run(60)
    gc.collect(a.state)
    run_sharer(b.state)
    gc.collect(b.state)
    assert b.state.heap.top <= a.state.heap.top


@FAST
@given(seeds)
def test_hash_congruence(seed):
    m = RandomMachine(seed).run(60)
    st_ = m.state
    s = Sharer(st_, seed=0)
    s.init_tables()
    terms = [c for c, k in zip(m.cells, m.kinds) if k == "term"]
    hashes = [s.compute_hash(c) for c in terms]
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            if hashes[i] is not None and hashes[j] is not None and term_equal(st_, terms[i], terms[j]):
                assert hashes[i] == hashes[j]


@FAST
@given(seeds, st.permutations(range(3)))
def test_absorption_order_does_not_matter(seed, order):
    rng = random.Random(seed)
    value = ("g", rng.choice(["a", 1]), [rng.choice(["b", 2]), ("f", "c")])
    state = MachineState(1 << 10)
    terms = []
    for _ in range(3):
        put(state, ("pad",) + tuple(range(rng.randint(1, 4))))
        terms.append(put(state, value))
    s = Sharer(state, seed=0)
    s.init_tables()
    for k in order:
        s.compute_hash(terms[k])
    reps = {s.representative(t >> 4) for t in terms}
    assert reps == {terms[0] >> 4}


@FAST
@given(seeds)
def test_term_equal_is_an_equivalence(seed):
    m = RandomMachine(seed).run(40)
    st_ = m.state
    ts = m.cells[:8]
    for x in ts:
        assert term_equal(st_, x, x)
        for y in ts:
            assert term_equal(st_, x, y) == term_equal(st_, y, x)
            if term_equal(st_, x, y):
                for z in ts:
                    if term_equal(st_, y, z):
                        assert term_equal(st_, x, z)


@FAST
@given(seeds)
def test_copy_is_a_variant(seed):
    m = RandomMachine(seed).run(40)
    st_ = m.state
    for c in m.cells:
        before = format_term(st_, c)
        k = copy_term(st_, c)
        assert format_term(st_, k) == before
        if "A" not in before and "box(" not in before:
            # ground and immutable
            assert term_equal(st_, k, c)


@FAST
@given(seeds)
def test_barrier_copy_only_points_below_barrier(seed):
    m = RandomMachine(seed).run(30)
    st_ = m.state
    barrier = st_.heap.top
    new_root = put(st_, ("w", Var("X"), "a"), {})
    from sharewam.unify import copy_to_buffer
    for c in m.cells + [new_root]:
        buf, root = copy_to_buffer(st_, c, barrier)
        for x in buf + [root]:
            t = x & TAG_MASK
            if t <= 2:  # a heap pointer left in the copy
                assert x & TAG_MASK in (STRUCT, 2) and (x >> 4) < barrier


ground = st.recursive(
    st.sampled_from(["a", "b", "[]"]) | st.integers(-3, 3),
    lambda inner: st.lists(inner, max_size=3) | st.tuples(st.sampled_from(["f", "g"]), inner, inner),
    max_leaves=8,
)


def to_prolog(v) -> str:
    if isinstance(v, list):
        return "[" + ",".join(to_prolog(x) for x in v) + "]"
    if isinstance(v, tuple):
        return f"{v[0]}({to_prolog(v[1])},{to_prolog(v[2])})"
    return str(v) if not isinstance(v, int) or v >= 0 else f"({v})"


@settings(max_examples=40, deadline=None)
@given(st.lists(ground, max_size=6))
def test_findall_flavours_agree(items):
    e = Engine(heap_cells=512)
    e.consult(source("tails"))
    lst = to_prolog(items)
    outs = set()
    for pred in ("findall_tails", "sharing_findall_tails", "copy_once_findall_tails"):
        outs.add(e.solutions(f"{pred}({lst}, T)")[0]["T"])
    outs.add(e.solutions(f"all_tails({lst}, T)")[0]["T"])
    assert len(outs) == 1


@settings(max_examples=25, deadline=None)
@given(st.lists(ground, min_size=1, max_size=8), st.integers(min_value=200, max_value=600))
def test_policy_transparency_under_memory_pressure(items, heap):
    lst = to_prolog(items)
    queries = [f"sharing_findall_tails({lst}, T), findall(X-Y, (member(X, {lst}), member(Y, T)), P)",
               f"copy_once_findall(Z, (member(Z, {lst}) ; member(Z, {lst})), L), share, gc"]
    results = []
    for policy in ("r0", "r1", "r2"):
        e = Engine(heap_cells=heap, policy=policy)
        e.consult(source("tails"))
        results.append([e.solutions(q) for q in queries])
    assert results[0] == results[1] == results[2]
