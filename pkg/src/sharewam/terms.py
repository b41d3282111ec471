"""Building heap terms from Python values and printing them back."""

from __future__ import annotations

from dataclasses import dataclass

from .store import (
    ATOM,
    FUNCTOR,
    INT,
    LIST,
    NIL,
    REF,
    STRUCT,
    SYMBOLS,
    TAG_BITS,
    TAG_MASK,
    MachineState,
    atom_cell,
    functor_cell,
    int_cell,
    list_cell,
    struct_cell,
)


@dataclass(frozen=True)
class Var:
    """A named variable in a Python term description."""

    name: str


@dataclass(frozen=True)
class HeapTerm:
    """An existing heap cell, embedded unchanged by :func:`put`."""

    cell: int


def put(state: MachineState, value, env: dict[str, int] | None = None) -> int:
    """Build ``value`` on the heap and return its cell.

    ``str`` -> atom, ``int`` -> integer, :class:`Var` -> variable (shared by
    name through ``env``), ``tuple`` ``(name, arg, ...)`` -> compound term,
    ``list`` -> Prolog list, :class:`HeapTerm` -> the wrapped cell.
    """
    if env is None:
        env = {}
    heap = state.heap
    if isinstance(value, bool):
        raise TypeError("booleans are not terms")
    if isinstance(value, int):
        return int_cell(value)
    if isinstance(value, str):
        return atom_cell(value)
    if isinstance(value, HeapTerm):
        return value.cell
    if isinstance(value, Var):
        cell = env.get(value.name)
        if cell is None:
            cell = (heap.new_var() << TAG_BITS) | REF
            env[value.name] = cell
        return cell
    if isinstance(value, tuple):
        name, *args = value
        base = heap.allocate(1 + len(args))
        heap.cells[base] = functor_cell(name, len(args))
        for i, arg in enumerate(args):
            heap.cells[base + 1 + i] = _put_arg(state, arg, env, base + 1 + i)
        return struct_cell(base)
    if isinstance(value, list):
        result = NIL
        # build back to front so the spine is allocated tail first
        for item in reversed(value):
            base = heap.allocate(2)
            heap.cells[base] = _put_arg(state, item, env, base)
            heap.cells[base + 1] = result
            result = list_cell(base)
        return result
    raise TypeError(f"cannot build a term from {value!r}")


def _put_arg(state: MachineState, value, env: dict[str, int], addr: int) -> int:
    # first occurrence of a variable inside a body lives in the argument cell
    if isinstance(value, Var) and value.name not in env:
        cell = (addr << TAG_BITS) | REF
        env[value.name] = cell
        return cell
    return put(state, value, env)


def var_name(index: int) -> str:
    """numbervars naming: A..Z, A1..Z1, ..."""
    letter = chr(ord("A") + index % 26)
    n = index // 26
    return letter if n == 0 else f"{letter}{n}"


# name -> (priority, left max, right max); mirrors the reader's table
INFIX_OPS = {}
for _names, _p, _typ in (
    ((":-", "-->"), 1200, "xfx"), ((";",), 1100, "xfy"), (("->",), 1050, "xfy"),
    ((",",), 1000, "xfy"),
    (("=", "\\=", "==", "\\==", "@<", "@>", "@=<", "@>=", "=..", "is", "=:=", "=\\=",
      "<", ">", "=<", ">="), 700, "xfx"),
    (("+", "-", "/\\", "\\/"), 500, "yfx"),
    (("*", "/", "//", "mod", "rem", "<<", ">>"), 400, "yfx"),
    (("^",), 200, "xfy"),
):
    for _n in _names:
        INFIX_OPS[_n] = (_p, _p if _typ == "yfx" else _p - 1, _p if _typ == "xfy" else _p - 1)


def _quote(name: str) -> str:
    if not name:
        return "''"
    if name in ("[]", "!", ";", ",", "{}"):
        return name if name != "," else "','"
    if name[0].islower() and all(ch.isalnum() or ch == "_" for ch in name):
        return name
    if all(ch in "+-*/\\^<>=~:.?@#&$" for ch in name):
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


class TermWriter:
    """Prints terms; unbound variables get numbervars-style names in order of
    first appearance (shared across calls on the same writer)."""

    def __init__(self, state: MachineState, var_prefix: str = "") -> None:
        self.state = state
        self.names: dict[int, str] = {}
        self.var_prefix = var_prefix

    def name_of(self, addr: int) -> str:
        name = self.names.get(addr)
        if name is None:
            name = self.var_prefix + var_name(len(self.names))
            self.names[addr] = name
        return name

    def format(self, cell: int) -> str:
        state = self.state
        cells = state.heap.cells
        out: list[str] = []
        active: set[int] = set()  # bodies on the current path (cycle detection)
        # stack items: str (emit), int (a cell to print), or (addr,) (leave body)
        # stack items: str (emit), (cell, max priority) or (addr,) (leave body)
        stack: list = [(cell, 1200)]
        while stack:
            item = stack.pop()
            if isinstance(item, str):
                out.append(item)
                continue
            if len(item) == 1:
                active.discard(item[0])
                continue
            if len(item) == 3:
                self._spine(item, stack, out, active)
                continue
            c = state.deref(item[0])
            t = c & TAG_MASK
            if t == REF:
                out.append(self.name_of(c >> TAG_BITS))
            elif t == ATOM:
                out.append(_quote(SYMBOLS.atom_names[c >> TAG_BITS]))
            elif t == INT:
                v = c >> TAG_BITS
                # a negative right operand would glue onto a symbolic operator
                out.append(f"({v})" if v < 0 and item[1] < 999 else str(v))
            elif t == STRUCT:
                q = c >> TAG_BITS
                if q in active:
                    out.append("...")
                    continue
                active.add(q)
                name, n = SYMBOLS.functors[cells[q] >> TAG_BITS]
                args = [cells[q + 1 + i] for i in range(n)]
                if n == 2 and name in INFIX_OPS:
                    p, lp, rp = INFIX_OPS[name]
                    sep = f" {name} " if name[0].isalpha() else ("," if name == "," else name)
                    pending: list = [(args[0], lp), sep, (args[1], rp)]
                    if p > item[1]:
                        pending = ["(", *pending, ")"]
                else:
                    pending = [_quote(name) + "("]
                    for i, a in enumerate(args):
                        if i:
                            pending.append(",")
                        pending.append((a, 999))
                    pending.append(")")
                pending.append((q,))
                stack.extend(reversed(pending))
            elif t == LIST:
                # the spine is entered one cell at a time, so an element is
                # printed with only the spine cells up to it marked active
                out.append("[")
                stack.append((c, None, []))
            elif t == FUNCTOR:
                out.append(f"<functor {SYMBOLS.functors[c >> TAG_BITS][0]}>")
            else:
                out.append(f"<cell {c}>")
        return "".join(out)

    def _spine(self, item: tuple, stack: list, out: list, active: set) -> None:
        cur, prev, entered = item
        state = self.state
        if prev is not None:
            cur = state.deref(state.heap.cells[prev + 1])
            if cur & TAG_MASK != LIST:
                if cur != NIL:
                    out.append("|")
                    stack.append("]")
                    stack.extend(entered)
                    stack.append((cur, 999))
                else:
                    out.append("]")
                    for e in entered:
                        active.discard(e[0])
                return
        q = cur >> TAG_BITS
        if q in active:
            out.append("|...]")
            for e in entered:
                active.discard(e[0])
            return
        if prev is not None:
            out.append(",")
        active.add(q)
        entered.append((q,))
        stack.append((cur, q, entered))
        stack.append((state.heap.cells[q], 999))


def format_term(state: MachineState, cell: int) -> str:
    return TermWriter(state).format(cell)
