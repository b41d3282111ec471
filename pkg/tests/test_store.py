import pytest

from sharewam.store import (
    INT,
    NIL,
    REF,
    HeapOverflow,
    MachineState,
    atom_cell,
    functor_cell,
    int_cell,
    payload_of,
    ref_cell,
    struct_cell,
    tag_of,
)
from sharewam.terms import Var, format_term, put


def test_first_allocation_is_address_zero(state):
    assert state.allocate(1) == 0


def test_allocation_is_monotone(state):
    state.allocate(3)
    assert state.allocate(2) == 3
    assert state.heap.top == 5


def test_allocate_past_capacity_overflows():
    st = MachineState(4)
    st.allocate(4)
    with pytest.raises(HeapOverflow):
        st.allocate(1)


def test_negative_integers_round_trip():
    for v in (-1, -(1 << 40), 0, 7):
        c = int_cell(v)
        assert tag_of(c) == INT and payload_of(c) == v


def test_deref_atom_is_fixpoint(state):
    a = atom_cell("a")
    assert state.deref(a) == a


def test_deref_one_hop(state):
    state.allocate(6)
    cells = state.heap.cells
    cells[3] = atom_cell("b")
    cells[5] = ref_cell(3)
    assert state.deref(ref_cell(5)) == atom_cell("b")


def test_deref_unbound_self_reference(state):
    state.allocate(5)
    state.heap.cells[4] = ref_cell(4)
    assert state.deref(ref_cell(4)) == ref_cell(4)
    assert tag_of(state.deref(ref_cell(4))) == REF


def test_bind_without_choicepoint_is_not_trailed(state):
    for _ in range(3):
        state.heap.new_var()
    state.bind(2, atom_cell("a"))
    assert state.trail_addr == []


def test_bind_older_than_hb_is_trailed(state):
    for _ in range(12):
        state.heap.new_var()
    cp = state.push_choicepoint()
    cp.hb = 10
    state.bind(4, atom_cell("a"))
    state.bind(11, atom_cell("a"))
    assert state.trail_addr == [4]
    assert state.trail_old == [None]


def test_bind_requires_unbound(state):
    state.heap.new_var()
    state.bind(0, atom_cell("a"))
    with pytest.raises(ValueError):
        state.bind(0, atom_cell("b"))


def test_backtrack_recovers_heap_segment(state):
    state.allocate(7)
    state.push_choicepoint()
    state.allocate(5)
    state.backtrack()
    assert state.heap.top == 7


def test_backtrack_untrails_binding(state):
    for _ in range(3):
        state.heap.new_var()
    state.push_choicepoint()
    state.bind(2, atom_cell("x"))
    state.backtrack()
    assert state.heap.cells[2] == ref_cell(2)


def test_backtrack_restores_value_entry(state):
    base = state.allocate(10)
    state.heap.cells[base + 9] = atom_cell("a")
    state.push_choicepoint()
    state.set_value(9, atom_cell("b"))
    assert state.trail_old == [atom_cell("a")]
    state.backtrack()
    assert state.heap.cells[9] == atom_cell("a")


def test_backtrack_on_empty_stack_signals_failure(state):
    with pytest.raises(IndexError):
        state.backtrack()


def test_cut_tidies_entries_that_became_unconditional(state):
    for _ in range(25):
        state.heap.new_var()
    state.push_choicepoint().hb = 10
    state.push_choicepoint().hb = 20
    state.bind(15, atom_cell("a"))
    state.bind(4, atom_cell("a"))
    assert state.trail_addr == [15, 4]
    state.cut_to(1)
    # 15 now lies above the remaining HB=10; 4 is still conditional
    assert state.trail_addr == [4]


def test_cut_with_empty_trail_is_identity(state):
    state.push_choicepoint()
    state.push_choicepoint()
    state.cut_to(1)
    assert len(state.choicepoints) == 1
    assert state.trail_addr == []


def test_cut_to_zero_clears_trail(state):
    for _ in range(3):
        state.heap.new_var()
    state.push_choicepoint().hb = 3
    state.bind(1, NIL)
    state.cut_to(0)
    assert state.trail_addr == [] and state.trail_old == []


def test_freeze_raises_every_hb(state):
    state.push_choicepoint()
    state.allocate(4)
    state.push_choicepoint()
    state.allocate(4)
    state.freeze_heap()
    assert [cp.hb for cp in state.choicepoints] == [8, 8]


def test_put_and_format(state):
    c = put(state, ("f", 1, Var("X"), ["a", Var("X")]))
    assert format_term(state, c) == "f(1,A,[a,A])"


def test_struct_layout(state):
    c = put(state, ("g", "a", 2))
    q = payload_of(c)
    assert c == struct_cell(q)
    assert state.heap.cells[q] == functor_cell("g", 2)
    assert state.heap.cells[q + 1] == atom_cell("a")
    assert state.heap.cells[q + 2] == int_cell(2)
