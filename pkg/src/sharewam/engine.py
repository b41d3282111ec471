"""Structure-walking Prolog interpreter wired to the memory subsystem.

The interpreter runs compiled goal sequences with explicit continuations
``(seq, index, frame, cut_barrier, parent)``.  Choicepoints live in the
store; their HB values delimit real heap segments, so backtracking reclaims
heap and the trail behaves as in the WAM.

Garbage collection happens only at safe points: before dispatching a goal
when the heap is within ``margin`` cells of its capacity, inside builtins
that allocate an unbounded amount, and in gc/0.  At a safe point the live
frame slots of every reachable continuation are the roots.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterator

from . import gc as gcmod
from .compiler import (
    COMMIT_SEQ,
    CONTROL,
    G_BIND,
    G_BUILTIN,
    G_CALL,
    G_CALL1,
    G_COMMIT,
    G_CUT,
    G_DISJ,
    G_FAIL,
    G_INIT,
    G_ITE,
    G_RESET,
    LIST_KEY,
    T_CONST,
    T_FVAR,
    T_STRUCT,
    T_VAR,
    T_VOID,
    ClauseCompiler,
    CompileError,
    Pred,
    Seq,
    conj_list,
)
from .findall import FindallZones
from .reader import parse_term, parse_terms
from .sharer import Policy, ShareStats, run_sharer
from .store import (
    ATOM,
    INT,
    LIST,
    NIL,
    REF,
    STRUCT,
    SYMBOLS,
    TAG_BITS,
    TAG_MASK,
    Choicepoint,
    MachineState,
    atom_cell,
    functor_cell,
)
from .terms import TermWriter, Var
from .unify import copy_to_buffer, materialize, term_equal, unify

ATOM_TRUE = atom_cell("true")


class PrologError(Exception):
    """A runtime error signal (existence, type, instantiation, permission,
    resource, evaluation or domain error)."""

    def __init__(self, kind: str, detail: str) -> None:
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind}: {detail}")


def clause_key(head) -> tuple[str, int]:
    if isinstance(head, str):
        return head, 0
    if isinstance(head, tuple):
        return head[0], len(head) - 1
    raise CompileError(f"clause head must be callable: {head!r}")


@dataclass
class Program:
    """Parsed source: clauses in order plus the declared mutable functors."""

    clauses: list = field(default_factory=list)  # (head, body) pairs
    mutable: set = field(default_factory=set)  # (name, arity) pairs

    def predicates(self) -> dict[tuple[str, int], list]:
        out: dict[tuple[str, int], list] = {}
        for head, body in self.clauses:
            out.setdefault(clause_key(head), []).append((head, body))
        return out


def _mutable_specs(specs) -> list:
    if isinstance(specs, tuple) and specs[0] == ".":
        items = _py_list(specs)
    else:
        items = conj_list(specs)
    for s in items:
        if not (isinstance(s, tuple) and s[0] == "/" and len(s) == 3
                and isinstance(s[1], str) and isinstance(s[2], int)):
            raise CompileError(f"bad mutable declaration {s!r}")
    return [(s[1], s[2]) for s in items]


def parse_program(text: str) -> Program:
    """Parse clauses and ``:- mutable F/N.`` directives; other directives
    are rejected."""
    prog = Program()
    for term in parse_terms(text):
        if isinstance(term, tuple) and term[0] == ":-" and len(term) == 2:
            d = term[1]
            if isinstance(d, tuple) and d[0] == "mutable" and len(d) == 2:
                prog.mutable.update(_mutable_specs(d[1]))
                continue
            raise CompileError(f"unknown directive {d!r}")
        if isinstance(term, tuple) and term[0] == ":-" and len(term) == 3:
            head, body = term[1], term[2]
        else:
            head, body = term, "true"
        clause_key(head)
        prog.clauses.append((head, body))
    return prog


class Engine:
    """One Prolog machine.

    Parameters
    ----------
    heap_cells:
        Initial heap capacity in cells.
    policy:
        Sharing policy, ``"r0"`` (off), ``"r1"`` (after each collection) or
        ``"r2"`` (after each collection, followed by another collection).
    max_heap_cells:
        Expansion limit; exceeding it raises a resource error.
    """

    def __init__(self, heap_cells: int = 1 << 16, policy: str | Policy = "r0",
                 max_heap_cells: int = 1 << 26, output=None, seed: int | None = None,
                 share_table_size: int | None = None, library: bool = True) -> None:
        self.state = MachineState(heap_cells)
        self.initial_heap = heap_cells
        self.policy = policy if isinstance(policy, Policy) else Policy.parse(policy)
        self.max_heap_cells = max(max_heap_cells, heap_cells)
        self.out = output if output is not None else io.StringIO()
        self.seed = seed
        self.share_table_size = share_table_size
        self.preds: dict[tuple[str, int], Pred] = {}
        self.mutable: set[tuple[str, int]] = set()
        self.findall = FindallZones(self.state)
        self.gc_stats = gcmod.GcStats()
        self.share_stats = ShareStats()
        self.margin = 64
        self._max_head = 0
        self._max_goal = 0
        self._ctx = None
        self._query_args: list[int] = []
        self.state.root_providers.append(self._frame_roots)
        if library:
            from .library import LIBRARY
            self.consult(LIBRARY, library=True)

    # -- program loading ----------------------------------------------------

    def lookup(self, name: str, arity: int) -> Pred:
        key = (name, arity)
        p = self.preds.get(key)
        if p is None:
            p = self.preds[key] = Pred(name, arity)
        return p

    def consult(self, text: str, library: bool = False) -> None:
        """Add the clauses and directives of ``text`` to the program."""
        self.load(parse_program(text), library)

    def load(self, program: "Program", library: bool = False) -> None:
        for name, arity in program.mutable:
            self.mutable.add((name, arity))
            self.state.mutable_functors.add(SYMBOLS.functor(name, arity))
        touched: set[tuple[str, int]] = set()
        for head, body in program.clauses:
            name, arity = clause_key(head)
            key = (name, arity)
            if key in BUILTINS or key in CONTROL:
                raise PrologError("permission_error", f"cannot modify builtin {name}/{arity}")
            pred = self.lookup(name, arity)
            if pred.library and not library and key not in touched:
                pred.reset()
                pred.library = False
            touched.add(key)
            pred.library = library
            self.add_clause(pred, head, body)

    def add_clause(self, pred: Pred, head, body) -> None:
        comp = ClauseCompiler(self._builtin_fn, self.lookup)
        clause = comp.compile_clause(head, body)
        clause.source = (head, body)
        pred.add(clause)
        pred.defined = True
        self._max_head = max(self._max_head, comp.head_size)
        self._max_goal = max(self._max_goal, comp.max_goal)
        self.margin = 64 + self._max_head + self._max_goal

    @staticmethod
    def _builtin_fn(name: str, arity: int):
        return BUILTINS.get((name, arity))

    # -- memory management --------------------------------------------------

    def reset_machine(self) -> None:
        """Forget all heap data (between top-level queries)."""
        st = self.state
        st.heap.top = 0
        del st.trail_addr[:]
        del st.trail_old[:]
        del st.choicepoints[:]
        del st.barriers[:]
        st.copy_barrier = None
        self.findall.clear()
        self._ctx = None
        self._query_args = []

    def collect(self, extra_roots=()) -> None:
        """One collection, followed by sharing according to the policy."""
        self._gc(extra_roots)
        if self.policy is not Policy.OFF:
            self.share(extra_roots)
            if self.policy is Policy.BETWEEN_GC:
                self._gc(extra_roots)

    def _gc(self, extra_roots) -> None:
        stats = gcmod.collect(self.state, extra_roots, expand=False)
        heap = self.state.heap
        if heap.capacity * 2 <= self.max_heap_cells and gcmod.maybe_expand(self.state):
            stats.expansions = 1
            stats.heap_size_after = heap.capacity
        self.gc_stats.add(stats)

    def share(self, extra_roots=()) -> ShareStats:
        s = run_sharer(self.state, extra_roots, table_size=self.share_table_size, seed=self.seed)
        self.share_stats.add(s)
        return s

    def ensure_space(self, n: int, extra_roots=()) -> None:
        """Make room for ``n`` more cells plus the safety margin."""
        heap = self.state.heap
        need = n + self.margin
        if heap.top + need <= heap.capacity:
            return
        self.collect(extra_roots)
        while heap.top + need > heap.capacity:
            if heap.capacity * 2 > self.max_heap_cells:
                raise PrologError("resource_error", f"heap exhausted ({heap.capacity} cells)")
            heap.capacity *= 2
            self.gc_stats.expansions += 1
        self.gc_stats.heap_size_after = heap.capacity

    def _frame_roots(self) -> list:
        """Live frame slots of every continuation the machine can resume."""
        conts = [self._ctx] if self._ctx is not None else []
        for cp in self.state.choicepoints:
            alt = cp.alternative
            conts.append(alt if alt.__class__ is tuple else cp.continuation)
        seen: set[int] = set()
        frames: dict[int, list] = {}
        stack = conts
        while stack:
            c = stack.pop()
            if c is None or id(c) in seen:
                continue
            seen.add(id(c))
            seq, i, frame, _, parent = c
            ent = frames.get(id(frame))
            if ent is None:
                ent = frames[id(frame)] = [frame, set()]
            if seq.roots is None:
                ent[1].update(range(len(frame)))
            else:
                ent[1].update(seq.roots[i])
            stack.append(parent)
        out = []
        for frame, live in frames.values():
            for s in range(len(frame)):
                if s in live:
                    if frame[s] is not None:
                        out.append((frame, s))
                else:
                    frame[s] = None
        qa = self._query_args
        for k in range(len(qa)):
            out.append((qa, k))
        return out

    # -- term construction --------------------------------------------------

    def _build(self, t: tuple, frame: list) -> int:
        k = t[0]
        if k == T_CONST:
            return t[1]
        if k == T_VAR:
            return frame[t[1]]
        heap = self.state.heap
        if k == T_FVAR:
            a = heap.allocate(1)
            c = (a << TAG_BITS) | REF
            heap.cells[a] = c
            frame[t[1]] = c
            return c
        if k == T_VOID:
            a = heap.allocate(1)
            c = (a << TAG_BITS) | REF
            heap.cells[a] = c
            return c
        if k == T_STRUCT:
            args = t[2]
            base = heap.allocate(1 + len(args))
            cells = heap.cells
            cells[base] = t[1]
            for j, a in enumerate(args):
                cells[base + 1 + j] = self._build_arg(a, frame, base + 1 + j)
            return (base << TAG_BITS) | STRUCT
        base = heap.allocate(2)
        cells = heap.cells
        cells[base] = self._build_arg(t[1], frame, base)
        cells[base + 1] = self._build_arg(t[2], frame, base + 1)
        return (base << TAG_BITS) | LIST

    def _build_arg(self, t: tuple, frame: list, addr: int) -> int:
        k = t[0]
        if k == T_FVAR:
            c = (addr << TAG_BITS) | REF
            frame[t[1]] = c
            return c
        if k == T_VOID:
            return (addr << TAG_BITS) | REF
        return self._build(t, frame)

    def _get(self, t: tuple, cell: int, frame: list) -> bool:
        """Head unification of template ``t`` against ``cell``."""
        k = t[0]
        if k == T_FVAR:
            frame[t[1]] = cell
            return True
        if k == T_VOID:
            return True
        if k == T_VAR:
            return unify(self.state, frame[t[1]], cell)
        state = self.state
        cells = state.heap.cells
        while cell & TAG_MASK == REF:
            nxt = cells[cell >> TAG_BITS]
            if nxt == cell:
                break
            cell = nxt
        tag = cell & TAG_MASK
        if tag == REF:
            v = t[1] if k == T_CONST else self._build(t, frame)
            a = cell >> TAG_BITS
            state.heap.cells[a] = v
            cps = state.choicepoints
            if cps and a < cps[-1].hb:
                state.trail_addr.append(a)
                state.trail_old.append(None)
            return True
        if k == T_CONST:
            return cell == t[1]
        if k == T_STRUCT:
            if tag != STRUCT:
                return False
            q = cell >> TAG_BITS
            if cells[q] != t[1]:
                return False
            get = self._get
            for j, a in enumerate(t[2]):
                if not get(a, cells[q + 1 + j], frame):
                    return False
            return True
        if tag != LIST:
            return False
        q = cell >> TAG_BITS
        return self._get(t[1], cells[q], frame) and self._get(t[2], cells[q + 1], frame)

    # -- meta-call ----------------------------------------------------------

    def _decompile(self, cell: int) -> tuple[Seq, list]:
        frame: list[int] = []
        goals = self._meta_goals(cell, frame)
        return Seq(goals, None), frame

    def _meta_goals(self, cell: int, frame: list) -> list:
        state = self.state
        cells = state.heap.cells
        c = state.deref(cell)
        tag = c & TAG_MASK
        if tag == REF:
            frame.append(c)
            return [(G_CALL1, (T_VAR, len(frame) - 1))]
        if tag == ATOM:
            name, args = SYMBOLS.atom_names[c >> TAG_BITS], []
        elif tag == STRUCT:
            q = c >> TAG_BITS
            name, n = SYMBOLS.functors[cells[q] >> TAG_BITS]
            args = [cells[q + 1 + j] for j in range(n)]
        else:
            raise PrologError("type_error", f"callable expected, got {TermWriter(state).format(c)}")
        arity = len(args)
        if arity == 0:
            if name == "!":
                return [(G_CUT,)]
            if name == "true":
                return []
            if name in ("fail", "false"):
                return [(G_FAIL,)]
        if name == "," and arity == 2:
            return self._meta_goals(args[0], frame) + self._meta_goals(args[1], frame)
        if name == ";" and arity == 2:
            a = state.deref(args[0])
            if a & TAG_MASK == STRUCT and cells[a >> TAG_BITS] == functor_cell("->", 2):
                q = a >> TAG_BITS
                return [self._meta_ite(cells[q + 1], cells[q + 2], args[1], frame)]
            sa = Seq(self._meta_goals(args[0], frame), None)
            sb = Seq(self._meta_goals(args[1], frame), None)
            return [(G_DISJ, sa, sb, ())]
        if name == "->" and arity == 2:
            return [self._meta_ite(args[0], args[1], None, frame)]
        if name == "\\+" and arity == 1:
            cond = Seq(self._meta_goals(args[0], frame), None)
            return [(G_ITE, cond, Seq([(G_FAIL,)], None), Seq([], None), ())]
        if name == "call" and arity == 1:
            frame.append(args[0])
            return [(G_CALL1, (T_VAR, len(frame) - 1))]
        tmpls = []
        for a in args:
            frame.append(a)
            tmpls.append((T_VAR, len(frame) - 1))
        fn = BUILTINS.get((name, arity))
        if fn is not None:
            return [(G_BUILTIN, fn, tuple(tmpls), f"{name}/{arity}")]
        return [(G_CALL, self.lookup(name, arity), tuple(tmpls))]

    def _meta_ite(self, c, t, e, frame) -> tuple:
        cond = Seq(self._meta_goals(c, frame), None)
        then = Seq(self._meta_goals(t, frame), None)
        els = Seq(self._meta_goals(e, frame) if e is not None else [(G_FAIL,)], None)
        return (G_ITE, cond, then, els, ())

    # -- queries ------------------------------------------------------------

    def solve(self, query: str, limit: int | None = None) -> Iterator[dict[str, str]]:
        """Yield the solutions of ``query`` as ``{name: printed value}``.

        Variables are printed numbervars-style, named in order of first
        appearance across the whole solution.  Only one query may be active
        on an engine at a time; the machine is reset when a query starts.
        """
        term = parse_term(query)
        if isinstance(term, tuple) and term[0] == "?-" and len(term) == 2:
            term = term[1]
        names: list[str] = []
        stack = [term]
        while stack:
            x = stack.pop()
            if isinstance(x, Var):
                if x.name not in names and not x.name.startswith("_#"):
                    names.append(x.name)
            elif isinstance(x, tuple):
                stack.extend(reversed(x[1:]))
        head = ("$query", *[Var(n) for n in names]) if names else "$query"
        comp = ClauseCompiler(self._builtin_fn, self.lookup)
        clause = comp.compile_clause(head, term)
        self._max_goal = max(self._max_goal, comp.max_goal)
        self.margin = 64 + self._max_head + self._max_goal
        self.reset_machine()
        self.ensure_space(len(names))
        heap = self.state.heap
        qargs = []
        for _ in names:
            a = heap.allocate(1)
            heap.cells[a] = (a << TAG_BITS) | REF
            qargs.append(heap.cells[a])
        self._query_args = qargs
        shown = [n for n in names if not n.startswith("_")]
        count = 0
        gen = self._run(clause, qargs)
        try:
            for _ in gen:
                writer = TermWriter(self.state)
                yield {n: writer.format(qargs[names.index(n)]) for n in shown}
                count += 1
                if limit is not None and count >= limit:
                    break
        finally:
            gen.close()
            self._ctx = None

    def solutions(self, query: str, limit: int | None = None) -> list[dict[str, str]]:
        return list(self.solve(query, limit))

    def succeeds(self, query: str) -> bool:
        return bool(self.solutions(query, limit=1))

    def output(self) -> str:
        return self.out.getvalue() if isinstance(self.out, io.StringIO) else ""

    # -- the interpreter loop -----------------------------------------------

    def _run(self, clause, args: list[int]):
        state = self.state
        heap = state.heap
        cps = state.choicepoints
        trail = state.trail_addr
        build = self._build
        get = self._get
        base = len(cps)

        frame = [None] * clause.nvars
        for j, t in enumerate(clause.head):
            get(t, args[j], frame)
        seq, i, cutb, parent = clause.body, 0, base, None
        ok = True
        while True:
            if ok:
                if i >= seq.n:
                    if parent is None:
                        self._ctx = (seq, i, frame, cutb, parent)
                        yield True
                        ok = False
                        continue
                    seq, i, frame, cutb, parent = parent
                    continue
                if heap.top + self.margin > heap.capacity:
                    self._ctx = (seq, i, frame, cutb, parent)
                    self.ensure_space(0)
                g = seq.goals[i]
                kind = g[0]
                if kind == G_CALL:
                    pred = g[1]
                    cargs = [build(t, frame) for t in g[2]]
                    cont = (seq, i + 1, frame, cutb, parent) if i + 1 < seq.n else parent
                    if pred._index is None:
                        if not pred.defined:
                            self._ctx = None
                            raise PrologError("existence_error",
                                              f"unknown procedure {pred.name}/{pred.arity}")
                        pred.build_index()
                    if cargs:
                        c = cargs[0]
                        cells = heap.cells
                        while c & TAG_MASK == REF:
                            nxt = cells[c >> TAG_BITS]
                            if nxt == c:
                                break
                            c = nxt
                        tag = c & TAG_MASK
                        if tag == REF:
                            cands = pred._all
                        elif tag == STRUCT:
                            cands = pred._index.get(cells[c >> TAG_BITS], pred._var_only)
                        elif tag == LIST:
                            cands = pred._index.get(LIST_KEY, pred._var_only)
                        else:
                            cands = pred._index.get(c, pred._var_only)
                    else:
                        cands = pred._all
                    if not cands:
                        ok = False
                        continue
                    if len(cands) > 1:
                        cps.append(Choicepoint(heap.top, len(trail), [cands, 1], cargs, cont))
                        ccut = len(cps) - 1
                    else:
                        ccut = len(cps)
                    cl = cands[0]
                    frame = [None] * cl.nvars
                    for j, t in enumerate(cl.head):
                        if not get(t, cargs[j], frame):
                            ok = False
                            break
                    else:
                        seq, i, cutb, parent = cl.body, 0, ccut, cont
                    continue
                if kind == G_BUILTIN:
                    bargs = [build(t, frame) for t in g[2]]
                    self._ctx = (seq, i, frame, cutb, parent)
                    ok = g[1](self, bargs)
                    i += 1
                    continue
                if kind == G_BIND:
                    frame[g[1]] = build(g[2], frame)
                    i += 1
                    continue
                if kind == G_CUT or kind == G_COMMIT:
                    state.cut_to(cutb)
                    i += 1
                    continue
                if kind == G_ITE:
                    for s in g[4]:
                        frame[s] = None
                    after = (seq, i + 1, frame, cutb, parent) if i + 1 < seq.n else parent
                    h = len(cps)
                    cps.append(Choicepoint(heap.top, len(trail), (g[3], 0, frame, cutb, after)))
                    st = g[2]
                    then_cont = (st, 0, frame, cutb, after) if st.n else after
                    seq, i, cutb, parent = g[1], 0, h + 1, (COMMIT_SEQ, 0, frame, h, then_cont)
                    continue
                if kind == G_DISJ:
                    for s in g[3]:
                        frame[s] = None
                    after = (seq, i + 1, frame, cutb, parent) if i + 1 < seq.n else parent
                    cps.append(Choicepoint(heap.top, len(trail), (g[2], 0, frame, cutb, after)))
                    seq, i, parent = g[1], 0, after
                    continue
                if kind == G_FAIL:
                    ok = False
                    continue
                if kind == G_INIT:
                    for s in g[1]:
                        a = heap.allocate(1)
                        c = (a << TAG_BITS) | REF
                        heap.cells[a] = c
                        frame[s] = c
                    i += 1
                    continue
                if kind == G_RESET:
                    for s in g[1]:
                        frame[s] = None
                    i += 1
                    continue
                if kind == G_CALL1:
                    goal = build(g[1], frame)
                    after = (seq, i + 1, frame, cutb, parent) if i + 1 < seq.n else parent
                    mseq, mframe = self._decompile(goal)
                    seq, i, frame, cutb, parent = mseq, 0, mframe, len(cps), after
                    continue
                raise RuntimeError(f"bad goal {g!r}")
            # backtracking
            if len(cps) <= base:
                self._ctx = None
                return
            cp = cps[-1]
            if len(trail) > cp.trail_top:
                state.untrail(cp.trail_top)
            heap.top = cp.hb
            alt = cp.alternative
            if alt.__class__ is tuple:
                cps.pop()
                seq, i, frame, cutb, parent = alt
                ok = True
                continue
            cands, k = alt
            if k + 1 == len(cands):
                cps.pop()
                ccut = len(cps)
            else:
                alt[1] = k + 1
                ccut = len(cps) - 1
            cl = cands[k]
            cargs = cp.args
            frame = [None] * cl.nvars
            for j, t in enumerate(cl.head):
                if not get(t, cargs[j], frame):
                    break
            else:
                seq, i, cutb, parent = cl.body, 0, ccut, cp.continuation
                ok = True


def _py_list(t) -> list:
    out = []
    while isinstance(t, tuple) and t[0] == "." and len(t) == 3:
        out.append(t[1])
        t = t[2]
    return out


# ---------------------------------------------------------------------------
# builtins: fn(engine, args) -> bool.  Builtins that allocate an unbounded
# number of cells call engine.ensure_space(n, [args]) first and re-read their
# arguments afterwards, since a collection may move everything.


def _deref(e: Engine, c: int) -> int:
    return e.state.deref(c)


def _fmt(e: Engine, c: int) -> str:
    return TermWriter(e.state, "_").format(c)


def _int_arg(e: Engine, c: int, what: str) -> int:
    c = e.state.deref(c)
    t = c & TAG_MASK
    if t == INT:
        return c >> TAG_BITS
    if t == REF:
        raise PrologError("instantiation_error", f"{what}: argument is unbound")
    raise PrologError("type_error", f"{what}: integer expected, got {_fmt(e, c)}")


_ARITH2 = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/\\": lambda a, b: a & b,
    "\\/": lambda a, b: a | b,
    "<<": lambda a, b: a << b,
    ">>": lambda a, b: a >> b,
    "min": min,
    "max": max,
}


def eval_arith(e: Engine, c: int) -> int:
    state = e.state
    cells = state.heap.cells
    c = state.deref(c)
    t = c & TAG_MASK
    if t == INT:
        return c >> TAG_BITS
    if t == REF:
        raise PrologError("instantiation_error", "arithmetic on an unbound variable")
    if t == STRUCT:
        q = c >> TAG_BITS
        name, n = SYMBOLS.functors[cells[q] >> TAG_BITS]
        if n == 2:
            a = eval_arith(e, cells[q + 1])
            b = eval_arith(e, cells[q + 2])
            f = _ARITH2.get(name)
            if f is not None:
                return f(a, b)
            if name in ("//", "mod", "rem", "/"):
                if b == 0:
                    raise PrologError("evaluation_error", "zero_divisor")
                if name == "mod":
                    return a % b
                quot = abs(a) // abs(b)
                if (a < 0) != (b < 0):
                    quot = -quot
                if name == "rem":
                    return a - quot * b
                if name == "/" and a % b != 0:
                    raise PrologError("type_error", "integer division with remainder (no floats)")
                return quot
        elif n == 1:
            a = eval_arith(e, cells[q + 1])
            if name == "-":
                return -a
            if name == "+":
                return a
            if name == "abs":
                return abs(a)
            if name == "\\":
                return ~a
    raise PrologError("type_error", f"evaluable expected, got {_fmt(e, c)}")


def bi_is(e, a):
    return unify(e.state, a[0], (eval_arith(e, a[1]) << TAG_BITS) | INT)


def _cmp(op):
    def fn(e, a):
        return op(eval_arith(e, a[0]), eval_arith(e, a[1]))
    return fn


def bi_unify(e, a):
    return unify(e.state, a[0], a[1])


def bi_not_unify(e, a):
    state = e.state
    state.choicepoints.append(Choicepoint(state.heap.top, len(state.trail_addr)))
    ok = unify(state, a[0], a[1])
    state.backtrack()
    return not ok


def bi_eq(e, a):
    return term_equal(e.state, a[0], a[1])


def bi_neq(e, a):
    return not term_equal(e.state, a[0], a[1])


def bi_same_term(e, a):
    return e.state.deref(a[0]) == e.state.deref(a[1])


def _type_test(pred):
    def fn(e, a):
        return pred(e.state.deref(a[0]) & TAG_MASK)
    return fn


def bi_is_list(e, a):
    state = e.state
    c = state.deref(a[0])
    seen = set()
    while c & TAG_MASK == LIST:
        q = c >> TAG_BITS
        if q in seen:
            return False
        seen.add(q)
        c = state.deref(state.heap.cells[q + 1])
    return c == NIL


def bi_functor(e, a):
    state = e.state
    t = state.deref(a[0])
    tag = t & TAG_MASK
    if tag == REF:
        n = _int_arg(e, a[2], "functor/3")
        name = state.deref(a[1])
        if n == 0:
            return unify(state, a[0], name)
        if name & TAG_MASK != ATOM:
            if name & TAG_MASK == REF:
                raise PrologError("instantiation_error", "functor/3: name is unbound")
            raise PrologError("type_error", "functor/3: atom expected")
        if n < 0:
            raise PrologError("domain_error", "functor/3: negative arity")
        aname = SYMBOLS.atom_names[name >> TAG_BITS]
        if aname == "." and n == 2:
            e.ensure_space(2, [a])
            base = state.heap.allocate(2)
            cells = state.heap.cells
            cells[base] = (base << TAG_BITS) | REF
            cells[base + 1] = ((base + 1) << TAG_BITS) | REF
            return unify(state, a[0], (base << TAG_BITS) | LIST)
        e.ensure_space(n + 1, [a])
        base = state.heap.allocate(n + 1)
        cells = state.heap.cells
        cells[base] = functor_cell(aname, n)
        for j in range(1, n + 1):
            cells[base + j] = ((base + j) << TAG_BITS) | REF
        return unify(state, a[0], (base << TAG_BITS) | STRUCT)
    if tag == STRUCT:
        name, n = SYMBOLS.functors[state.heap.cells[t >> TAG_BITS] >> TAG_BITS]
        return unify(state, a[1], atom_cell(name)) and unify(state, a[2], (n << TAG_BITS) | INT)
    if tag == LIST:
        return unify(state, a[1], atom_cell(".")) and unify(state, a[2], (2 << TAG_BITS) | INT)
    return unify(state, a[1], t) and unify(state, a[2], INT)


def bi_arg(e, a):
    state = e.state
    n = _int_arg(e, a[0], "arg/3")
    t = state.deref(a[1])
    tag = t & TAG_MASK
    cells = state.heap.cells
    if tag == STRUCT:
        q = t >> TAG_BITS
        arity = SYMBOLS.functors[cells[q] >> TAG_BITS][1]
        if not 1 <= n <= arity:
            return False
        return unify(state, a[2], cells[q + n])
    if tag == LIST:
        if not 1 <= n <= 2:
            return False
        return unify(state, a[2], cells[(t >> TAG_BITS) + n - 1])
    if tag == REF:
        raise PrologError("instantiation_error", "arg/3: term is unbound")
    raise PrologError("type_error", "arg/3: compound expected")


def bi_copy_term(e, a):
    state = e.state
    buf, root = copy_to_buffer(state, a[0])
    e.ensure_space(len(buf), [a])
    r = materialize(state, buf, [root])[0]
    return unify(state, a[1], r)


def bi_length(e, a):
    state = e.state

    def walk():
        cells = state.heap.cells
        c = state.deref(a[0])
        count = 0
        seen = set()
        while c & TAG_MASK == LIST:
            q = c >> TAG_BITS
            if q in seen:
                raise PrologError("type_error", "length/2: cyclic list")
            seen.add(q)
            count += 1
            c = state.deref(cells[q + 1])
        return c, count

    tail, count = walk()
    if tail == NIL:
        return unify(state, a[1], (count << TAG_BITS) | INT)
    if tail & TAG_MASK != REF:
        return False
    n = state.deref(a[1])
    if n & TAG_MASK == REF:
        raise PrologError("instantiation_error", "length/2: open list and unbound length")
    if n & TAG_MASK != INT:
        raise PrologError("type_error", "length/2: integer expected")
    m = (n >> TAG_BITS) - count
    if m < 0:
        return False
    if m == 0:
        return unify(state, tail, NIL)
    e.ensure_space(2 * m, [a])
    tail, _ = walk()
    base = state.heap.allocate(2 * m)
    cells = state.heap.cells
    for k in range(m):
        p = base + 2 * k
        cells[p] = (p << TAG_BITS) | REF
        cells[p + 1] = ((p + 2) << TAG_BITS) | LIST
    cells[base + 2 * m - 1] = NIL
    return unify(state, tail, (base << TAG_BITS) | LIST)


def bi_findall_init(e, a):
    h = e.findall.init()
    return unify(e.state, a[0], (h.id << TAG_BITS) | INT)


def bi_findall_add(e, a):
    h = e.findall.get(_int_arg(e, a[1], "findall_add/2"))
    e.findall.add(h, a[0])
    return True


def bi_findall_get_solutions(e, a):
    h = e.findall.get(_int_arg(e, a[1], "findall_get_solutions/2"))
    e.ensure_space(e.findall.solution_cells(h), [a])
    lst = e.findall.get_solutions(h)
    return unify(e.state, a[0], lst)


def bi_current_heap_top(e, a):
    token = e.state.new_barrier()
    return unify(e.state, a[0], (token << TAG_BITS) | INT)


def bi_set_copy_heap_barrier(e, a):
    token = _int_arg(e, a[0], "set_copy_heap_barrier/1")
    if not 0 <= token < len(e.state.barriers):
        raise PrologError("domain_error", f"set_copy_heap_barrier/1: unknown barrier {token}")
    e.state.copy_barrier = token
    return True


def _setarg_target(e, a, what) -> int:
    state = e.state
    n = _int_arg(e, a[0], what)
    t = state.deref(a[1])
    tag = t & TAG_MASK
    if tag == REF:
        raise PrologError("instantiation_error", f"{what}: term is unbound")
    if tag != STRUCT:
        raise PrologError("type_error", f"{what}: compound expected")
    q = t >> TAG_BITS
    arity = SYMBOLS.functors[state.heap.cells[q] >> TAG_BITS][1]
    if not 1 <= n <= arity:
        raise PrologError("domain_error", f"{what}: argument index {n} out of range")
    return q


def bi_setarg(e, a):
    q = _setarg_target(e, a, "setarg/3")
    state = e.state
    fid = state.heap.cells[q] >> TAG_BITS
    if fid not in state.mutable_functors:
        name, n = SYMBOLS.functors[fid]
        raise PrologError("permission_error", f"setarg/3: {name}/{n} is not declared mutable")
    state.set_value(q + _int_arg(e, a[0], "setarg/3"), e.state.deref(a[2]))
    return True


def bi_nb_setarg(e, a):
    q = _setarg_target(e, a, "nb_setarg/3")
    state = e.state
    v = e.state.deref(a[2])
    state.set_value(q + _int_arg(e, a[0], "nb_setarg/3"), v, backtrackable=False)
    if v & TAG_MASK not in (ATOM, INT):
        state.freeze_heap()
    return True


def bi_share(e, a):
    e.share()
    return True


def bi_gc(e, a):
    e.collect()
    return True


def bi_write(e, a):
    e.out.write(_fmt(e, a[0]))
    return True


def bi_writeln(e, a):
    e.out.write(_fmt(e, a[0]) + "\n")
    return True


def bi_nl(e, a):
    e.out.write("\n")
    return True


def bi_heap_used(e, a):
    return unify(e.state, a[0], (e.state.heap.top << TAG_BITS) | INT)


BUILTINS = {
    ("=", 2): bi_unify,
    ("\\=", 2): bi_not_unify,
    ("==", 2): bi_eq,
    ("\\==", 2): bi_neq,
    ("same_term", 2): bi_same_term,
    ("is", 2): bi_is,
    ("=:=", 2): _cmp(lambda x, y: x == y),
    ("=\\=", 2): _cmp(lambda x, y: x != y),
    ("<", 2): _cmp(lambda x, y: x < y),
    (">", 2): _cmp(lambda x, y: x > y),
    ("=<", 2): _cmp(lambda x, y: x <= y),
    (">=", 2): _cmp(lambda x, y: x >= y),
    ("var", 1): _type_test(lambda t: t == REF),
    ("nonvar", 1): _type_test(lambda t: t != REF),
    ("atom", 1): _type_test(lambda t: t == ATOM),
    ("integer", 1): _type_test(lambda t: t == INT),
    ("atomic", 1): _type_test(lambda t: t in (ATOM, INT)),
    ("compound", 1): _type_test(lambda t: t in (STRUCT, LIST)),
    ("callable", 1): _type_test(lambda t: t in (STRUCT, ATOM)),
    ("is_list", 1): bi_is_list,
    ("functor", 3): bi_functor,
    ("arg", 3): bi_arg,
    ("copy_term", 2): bi_copy_term,
    ("length", 2): bi_length,
    ("findall_init", 1): bi_findall_init,
    ("findall_add", 2): bi_findall_add,
    ("findall_get_solutions", 2): bi_findall_get_solutions,
    ("current_heap_top", 1): bi_current_heap_top,
    ("set_copy_heap_barrier", 1): bi_set_copy_heap_barrier,
    ("setarg", 3): bi_setarg,
    ("nb_setarg", 3): bi_nb_setarg,
    ("share", 0): bi_share,
    ("gc", 0): bi_gc,
    ("write", 1): bi_write,
    ("writeln", 1): bi_writeln,
    ("nl", 0): bi_nl,
    ("heap_used", 1): bi_heap_used,
}

__all__ = ["Engine", "PrologError", "BUILTINS", "eval_arith"]
