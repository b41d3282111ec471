from sharewam.store import LIST, STRUCT, payload_of, tag_of
from sharewam.terms import Var, format_term, put
from sharewam.unify import copy_size, copy_term, term_equal, unify


def test_unify_identical_terms_adds_no_bindings(state):
    env = {}
    a = put(state, ("f", 1, 2, Var("Z")), env)
    b = put(state, ("f", 1, 2, Var("Z")), env)
    before = list(state.heap.cells[: state.heap.top])
    assert unify(state, a, b)
    assert state.heap.cells[: state.heap.top] == before


def test_unify_binds_variable(state):
    env = {}
    x = put(state, Var("X"), env)
    t = put(state, ("f", "a"))
    assert unify(state, x, t)
    assert state.deref(x) == t


def test_unify_functor_clash(state):
    assert not unify(state, put(state, ("f", "a")), put(state, ("g", "a")))


def test_failed_unify_undoes_its_bindings(state):
    env = {}
    a = put(state, ("f", Var("X"), "b"), env)
    b = put(state, ("f", "a", "c"))
    assert not unify(state, a, b)
    assert format_term(state, a) == "f(A,b)"


def cyclic(state, n=1):
    """X = f(n, X), returned as the variable cell."""
    env = {}
    x = put(state, Var("X"), env)
    assert unify(state, x, put(state, ("f", n, Var("X")), env))
    return x


def test_unify_builds_cyclic_term(state):
    assert format_term(state, cyclic(state)) == "f(1,...)"


def test_equal_ground_terms(state):
    assert term_equal(state, put(state, ("f", "a", "b")), put(state, ("f", "a", "b")))


def test_distinct_variables_are_not_equal(state):
    assert not term_equal(state, put(state, ("f", Var("X"))), put(state, ("f", Var("Y"))))


def test_equal_is_cycle_safe(state):
    x, y, z = cyclic(state), cyclic(state), cyclic(state, 2)
    assert term_equal(state, x, y)
    assert not term_equal(state, x, z)


def test_copy_is_a_fresh_variant(state):
    env = {}
    t = put(state, ("f", "a", Var("X"), Var("X")), env)
    c = copy_term(state, t)
    assert format_term(state, c) == "f(a,A,A)"
    assert not term_equal(state, t, c)
    # the copy's variable is not the original's
    assert unify(state, c, put(state, ("f", "a", 1, 1)))
    assert format_term(state, t) == "f(a,A,A)"


def test_copy_below_barrier_shares_body(state):
    state.allocate(5)
    t = put(state, ("f", 1, 2, 3))
    assert payload_of(t) == 5
    state.allocate(20)
    c = copy_term(state, t, barrier=20)
    assert c == t
    assert copy_size(state, t, barrier=20) == 0


def test_copy_above_barrier_copies(state):
    t = put(state, ["a", "b"])
    c = copy_term(state, t, barrier=0)
    assert tag_of(c) == LIST and c != t
    assert term_equal(state, c, t)


def test_copy_preserves_internal_sharing(state):
    env = {}
    unify(state, put(state, Var("L"), env), put(state, ("node", 0, "[]")))
    L = Var("L")
    tree = put(state, ("node", 1, [L, L, L, L]), env)
    assert copy_size(state, tree) == 3 + 8 + 3
    c = copy_term(state, tree)
    cells = state.heap.cells
    spine = cells[payload_of(c) + 2]
    heads = []
    while tag_of(spine) == LIST:
        heads.append(cells[payload_of(spine)])
        spine = cells[payload_of(spine) + 1]
    assert len(set(heads)) == 1 and tag_of(heads[0]) == STRUCT


def test_copy_of_deep_list_is_not_recursion_bound(state):
    from sharewam.store import MachineState
    st = MachineState(1 << 18)
    t = put(st, list(range(20000)))
    c = copy_term(st, t)
    assert term_equal(st, c, t)


def test_copy_of_cyclic_term(state):
    x = cyclic(state)
    c = copy_term(state, x)
    assert term_equal(state, c, x)
