"""Clause compiler: parsed terms to argument templates and goal sequences.

A clause activation owns a *frame* (a Python list of cells, ``None`` when not
yet initialized).  Terms are compiled into templates that either unify
against an existing cell (head) or build a new heap term (body arguments).

Every goal sequence carries, per position, the frame slots that are both
initialized on every path reaching that position and still used from there
on.  The interpreter hands exactly these slots to the collector and the
sharer as roots; all other slots are dead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .store import LIST, atom_cell, functor_cell, int_cell
from .terms import Var

# template kinds
T_CONST, T_VAR, T_FVAR, T_STRUCT, T_LIST, T_VOID = range(6)

# goal kinds
(G_CALL, G_BUILTIN, G_CUT, G_DISJ, G_ITE, G_INIT, G_RESET, G_CALL1,
 G_COMMIT, G_FAIL, G_BIND) = range(11)

LIST_KEY = LIST  # first-argument index key of a list cell (never a functor/atom/int cell)

CONTROL = {(",", 2), (";", 2), ("->", 2), ("\\+", 1), ("call", 1), ("!", 0),
           ("true", 0), ("fail", 0), ("false", 0)}


class CompileError(Exception):
    pass


class Seq:
    """A compiled goal sequence.

    ``roots[i]`` lists the live frame slots when execution is about to run
    goal ``i`` (``roots[n]`` is for the end of the sequence).  ``roots`` is
    None for meta-call sequences, whose slots are all live.
    """

    __slots__ = ("goals", "n", "roots")

    def __init__(self, goals: list, roots: list | None) -> None:
        self.goals = tuple(goals)
        self.n = len(goals)
        self.roots = roots

    def __repr__(self) -> str:
        return f"Seq({len(self.goals)} goals)"


COMMIT_SEQ = Seq([(G_COMMIT,)], [(), ()])


@dataclass(eq=False)
class Clause:
    head: tuple
    body: Seq
    nvars: int
    key: int | None  # first-argument index key
    source: object = None


@dataclass(eq=False)
class Pred:
    name: str
    arity: int
    clauses: list[Clause] = field(default_factory=list)
    library: bool = False
    defined: bool = False
    _index: dict | None = None
    _all: tuple = ()
    _var_only: tuple = ()

    def add(self, clause: Clause) -> None:
        self.clauses.append(clause)
        self.defined = True
        self._index = None

    def reset(self) -> None:
        self.clauses.clear()
        self._index = None

    def build_index(self) -> None:
        clauses = self.clauses
        self._all = tuple(clauses)
        self._var_only = tuple(c for c in clauses if c.key is None)
        keys = {c.key for c in clauses if c.key is not None}
        self._index = {k: tuple(c for c in clauses if c.key is None or c.key == k) for k in keys}


def template_size(t: tuple) -> int:
    """Upper bound on the heap cells building ``t`` allocates."""
    k = t[0]
    if k == T_FVAR or k == T_VOID:
        return 1
    if k == T_STRUCT:
        return 1 + len(t[2]) + sum(template_size(a) for a in t[2])
    if k == T_LIST:
        return 2 + template_size(t[1]) + template_size(t[2])
    return 0


def conj_list(t) -> list:
    out = []
    stack = [t]
    while stack:
        g = stack.pop()
        if isinstance(g, tuple) and len(g) == 3 and g[0] == ",":
            stack.append(g[2])
            stack.append(g[1])
        else:
            out.append(g)
    return out


def term_vars(t, acc: dict[str, int]) -> None:
    """Count variable occurrences of a parsed term into ``acc``."""
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, Var):
            acc[x.name] = acc.get(x.name, 0) + 1
        elif isinstance(x, tuple):
            stack.extend(x[1:])


class ClauseCompiler:
    """Compiles one clause; ``is_builtin(name, arity)`` returns a builtin
    function or None, ``lookup(name, arity)`` returns the :class:`Pred`."""

    def __init__(self, is_builtin: Callable, lookup: Callable) -> None:
        self.is_builtin = is_builtin
        self.lookup = lookup
        self.slots: dict[str, int] = {}
        self.max_goal = 0

    # -- templates ----------------------------------------------------------

    def tmpl(self, t, init: set[int]) -> tuple:
        if isinstance(t, Var):
            s = self.slots.get(t.name)
            if s is None:
                return (T_VOID,)
            if s in init:
                return (T_VAR, s)
            init.add(s)
            return (T_FVAR, s)
        if isinstance(t, bool):
            raise CompileError("booleans are not terms")
        if isinstance(t, int):
            return (T_CONST, int_cell(t))
        if isinstance(t, str):
            return (T_CONST, atom_cell(t))
        if isinstance(t, tuple):
            if t[0] == "." and len(t) == 3:
                h = self.tmpl(t[1], init)
                return (T_LIST, h, self.tmpl(t[2], init))
            args = tuple(self.tmpl(a, init) for a in t[1:])
            return (T_STRUCT, functor_cell(t[0], len(args)), args)
        raise CompileError(f"cannot compile {t!r}")

    def vars_of(self, t) -> set[int]:
        acc: dict[str, int] = {}
        term_vars(t, acc)
        return {self.slots[v] for v in acc if v in self.slots}

    # -- clauses ------------------------------------------------------------

    def compile_clause(self, head, body) -> Clause:
        counts: dict[str, int] = {}
        term_vars(head, counts)
        term_vars(body, counts)
        self.slots = {}
        for name, c in counts.items():
            if c > 1:
                self.slots[name] = len(self.slots)
        init: set[int] = set()
        if isinstance(head, str):
            head_args: tuple = ()
        elif isinstance(head, tuple):
            head_args = head[1:]
        else:
            raise CompileError(f"clause head must be callable: {head!r}")
        htmpl = tuple(self.tmpl(a, init) for a in head_args)
        key = None
        if htmpl:
            f = htmpl[0]
            if f[0] == T_CONST:
                key = f[1]
            elif f[0] == T_STRUCT:
                key = f[1]
            elif f[0] == T_LIST:
                key = LIST_KEY
        self.max_goal = 0
        goals, roots = self.compile_seq(conj_list(body), init, frozenset())
        body_seq = Seq(goals, roots + [()])
        self.head_size = sum(template_size(t) for t in htmpl)
        return Clause(htmpl, body_seq, len(self.slots), key)

    # -- goal sequences -----------------------------------------------------

    def compile_seq(self, terms: list, init: set[int], later: frozenset) -> tuple[list, list]:
        n = len(terms)
        suffix: list[set[int]] = [set() for _ in range(n + 1)]
        for k in range(n - 1, -1, -1):
            suffix[k] = suffix[k + 1] | self.vars_of(terms[k])
        goals: list = []
        roots: list = []
        for k, g in enumerate(terms):
            live_here = suffix[k] | later
            later_k = frozenset(suffix[k + 1] | later)
            for cg in self.compile_goal(g, init, later_k, live_here):
                goals.append(cg[0])
                roots.append(cg[1])
        return goals, roots

    def _emit(self, goal: tuple, init_before: set[int], live: set[int]) -> tuple:
        return goal, tuple(sorted(init_before & live))

    def compile_goal(self, g, init: set[int], later: frozenset, live: set[int]) -> list:
        before = set(init)
        if isinstance(g, Var):
            t = self.tmpl(g, init)
            return [self._emit((G_CALL1, t), before, live)]
        if isinstance(g, int):
            raise CompileError(f"integer {g} is not callable")
        if isinstance(g, str):
            name, args = g, ()
        else:
            name, args = g[0], g[1:]
        arity = len(args)
        if name == "!" and arity == 0:
            return [self._emit((G_CUT,), before, live)]
        if name == "true" and arity == 0:
            return []
        if name in ("fail", "false") and arity == 0:
            return [self._emit((G_FAIL,), before, live)]
        if name == "," and arity == 2:
            goals, roots = self.compile_seq(conj_list(g), init, later)
            return list(zip(goals, roots))
        if name == ";" and arity == 2:
            c = args[0]
            if isinstance(c, tuple) and c[0] == "->" and len(c) == 3:
                return self.compile_ite(c[1], c[2], args[1], init, later, before, live)
            return self.compile_disj(args[0], args[1], init, later, before, live)
        if name == "->" and arity == 2:
            return self.compile_ite(args[0], args[1], "fail", init, later, before, live)
        if name == "\\+" and arity == 1:
            return self.compile_ite(args[0], "fail", "true", init, later, before, live)
        if name == "call" and arity == 1:
            t = self.tmpl(args[0], init)
            self.max_goal = max(self.max_goal, template_size(t))
            return [self._emit((G_CALL1, t), before, live)]
        if name == "=" and arity == 2:
            for a, b in ((args[0], args[1]), (args[1], args[0])):
                if isinstance(a, Var) and a.name in self.slots and self.slots[a.name] not in init:
                    s = self.slots[a.name]
                    if s not in self.vars_of(b):
                        t = self.tmpl(b, init)
                        init.add(s)
                        self.max_goal = max(self.max_goal, template_size(t))
                        return [self._emit((G_BIND, s, t), before, live)]
        tmpls = tuple(self.tmpl(a, init) for a in args)
        self.max_goal = max(self.max_goal, sum(template_size(t) for t in tmpls))
        fn = self.is_builtin(name, arity)
        if fn is not None:
            # a builtin may collect after its arguments exist, so slots it
            # initializes count as live roots too
            return [self._emit((G_BUILTIN, fn, tmpls, f"{name}/{arity}"), init, live)]
        return [self._emit((G_CALL, self.lookup(name, arity), tmpls), before, live)]

    def _branch(self, term, init: set[int], later: frozenset, reset: bool = False) -> tuple[list, list]:
        return self.compile_seq(conj_list(term), init, later)

    def _finish(self, goals: list, roots: list, pad: set[int], init: set[int],
                reset_slots: tuple, later: frozenset) -> Seq:
        if pad:
            roots.append(tuple(sorted(init & later)))
            goals.append((G_INIT, tuple(sorted(pad))))
            self.max_goal = max(self.max_goal, len(pad))
        if reset_slots:
            goals.insert(0, (G_RESET, reset_slots))
            roots.insert(0, roots[0] if roots else tuple(sorted(init & later)))
        return Seq(goals, roots + [()])

    def compile_disj(self, a, b, init, later, before, live) -> list:
        e0 = set(init)
        init_a = set(e0)
        ga, ra = self._branch(a, init_a, later)
        init_b = set(e0)
        gb, rb = self._branch(b, init_b, later)
        union = init_a | init_b
        reset = tuple(sorted(union - e0))
        sa = self._finish(ga, ra, (union - init_a) & later, init_a, (), later)
        sb = self._finish(gb, rb, (union - init_b) & later, init_b, reset, later)
        init.clear()
        init.update((init_a & init_b) | (union & later))
        return [self._emit((G_DISJ, sa, sb, reset), before, live)]

    def compile_ite(self, c, t, e, init, later, before, live) -> list:
        e0 = set(init)
        init_t = set(e0)
        then_terms = conj_list(t)
        then_vars: set[int] = set()
        for x in then_terms:
            then_vars |= self.vars_of(x)
        gc_, rc = self._branch(c, init_t, frozenset(then_vars | later))
        cond = Seq(gc_, rc + [()])
        gt, rt = self.compile_seq(then_terms, init_t, later)
        init_e = set(e0)
        ge, re_ = self._branch(e, init_e, later)
        union = init_t | init_e
        reset = tuple(sorted(union - e0))
        st = self._finish(gt, rt, (union - init_t) & later, init_t, (), later)
        se = self._finish(ge, re_, (union - init_e) & later, init_e, reset, later)
        init.clear()
        init.update((init_t & init_e) | (union & later))
        return [self._emit((G_ITE, cond, st, se, reset), before, live)]
