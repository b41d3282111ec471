"""Unification, ==/2 and the barrier-aware term copier."""

from __future__ import annotations

from .store import (
    LIST,
    REF,
    STRUCT,
    SYMBOLS,
    TAG_BITS,
    TAG_MASK,
    ZLIST,
    ZREF,
    ZSTRUCT,
    MachineState,
)

NO_BARRIER = None


def unify(state: MachineState, a: int, b: int) -> bool:
    """Unify two cells.  No occurs check.

    On failure every binding made by this call is undone, so the store is left
    exactly as it was.
    """
    cells = state.heap.cells
    cps = state.choicepoints
    trail_mark = len(state.trail_addr)
    bound: list[int] = []
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        # deref both
        while x & TAG_MASK == REF:
            n = cells[x >> TAG_BITS]
            if n == x:
                break
            x = n
        while y & TAG_MASK == REF:
            n = cells[y >> TAG_BITS]
            if n == y:
                break
            y = n
        if x == y:
            continue
        tx = x & TAG_MASK
        ty = y & TAG_MASK
        if tx == REF or ty == REF:
            if tx == REF and ty == REF:
                # bind the younger variable to the older one
                if (x >> TAG_BITS) < (y >> TAG_BITS):
                    x, y = y, x
                addr, val = x >> TAG_BITS, y
            elif tx == REF:
                addr, val = x >> TAG_BITS, y
            else:
                addr, val = y >> TAG_BITS, x
            cells[addr] = val
            bound.append(addr)
            if cps and addr < cps[-1].hb:
                state.trail_addr.append(addr)
                state.trail_old.append(None)
            continue
        if tx != ty:
            break
        if tx == STRUCT:
            p = x >> TAG_BITS
            q = y >> TAG_BITS
            f = cells[p]
            if f != cells[q]:
                break
            n = SYMBOLS.functors[f >> TAG_BITS][1]
            for i in range(n, 0, -1):
                stack.append((cells[p + i], cells[q + i]))
            continue
        if tx == LIST:
            p = x >> TAG_BITS
            q = y >> TAG_BITS
            stack.append((cells[p + 1], cells[q + 1]))
            stack.append((cells[p], cells[q]))
            continue
        # distinct atomic cells
        break
    else:
        return True
    for addr in bound:
        cells[addr] = (addr << TAG_BITS) | REF
    del state.trail_addr[trail_mark:]
    del state.trail_old[trail_mark:]
    return False


def term_equal(state: MachineState, a: int, b: int) -> bool:
    """==/2: structural identity without binding; terminates on cyclic terms.

    Pairs of compound bodies already under comparison are assumed equal
    (co-inductive reading), which is exactly equality of the infinite trees.
    """
    cells = state.heap.cells
    assumed: set[tuple[int, int]] = set()
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        while x & TAG_MASK == REF:
            n = cells[x >> TAG_BITS]
            if n == x:
                break
            x = n
        while y & TAG_MASK == REF:
            n = cells[y >> TAG_BITS]
            if n == y:
                break
            y = n
        if x == y:
            continue
        tx = x & TAG_MASK
        if tx != y & TAG_MASK:
            return False
        if tx == STRUCT:
            p = x >> TAG_BITS
            q = y >> TAG_BITS
            if (p, q) in assumed:
                continue
            f = cells[p]
            if f != cells[q]:
                return False
            assumed.add((p, q))
            n = SYMBOLS.functors[f >> TAG_BITS][1]
            for i in range(n, 0, -1):
                stack.append((cells[p + i], cells[q + i]))
        elif tx == LIST:
            p = x >> TAG_BITS
            q = y >> TAG_BITS
            if (p, q) in assumed:
                continue
            assumed.add((p, q))
            stack.append((cells[p + 1], cells[q + 1]))
            stack.append((cells[p], cells[q]))
        else:
            return False
    return True


def copy_to_buffer(state: MachineState, cell: int, barrier: int | None = NO_BARRIER,
                   buf: list[int] | None = None) -> tuple[list[int], int]:
    """Copy a heap term into an off-heap buffer.

    Returns ``(buf, root)``.  Pointers inside the buffer carry Z-tags with
    buffer offsets.  A STRUCT or LIST body whose address is below ``barrier``
    is not copied: the heap pointer itself is emitted (input sharing).  Bodies
    of mutable functors are always copied.  Sharing inside the source term is
    preserved: each body and each variable is copied once.
    """
    if buf is None:
        buf = []
    cells = state.heap.cells
    mutable = state.mutable_functors
    functors = SYMBOLS.functors
    memo: dict[int, int] = {}  # heap address (body or variable) -> buffer offset
    work: list[tuple[int, int, int]] = []
    use_barrier = barrier is not None

    def translate(c: int) -> int:
        while c & TAG_MASK == REF:
            n = cells[c >> TAG_BITS]
            if n == c:
                a = c >> TAG_BITS
                off = memo.get(a)
                if off is None:
                    off = len(buf)
                    buf.append((off << TAG_BITS) | ZREF)
                    memo[a] = off
                return (off << TAG_BITS) | ZREF
            c = n
        t = c & TAG_MASK
        if t == STRUCT:
            q = c >> TAG_BITS
            f = cells[q]
            if use_barrier and q < barrier and (f >> TAG_BITS) not in mutable:
                return c
            off = memo.get(q)
            if off is None:
                n = functors[f >> TAG_BITS][1]
                off = len(buf)
                buf.append(f)
                buf.extend([0] * n)
                memo[q] = off
                work.append((q + 1, off + 1, n))
            return (off << TAG_BITS) | ZSTRUCT
        if t == LIST:
            q = c >> TAG_BITS
            if use_barrier and q < barrier:
                return c
            off = memo.get(q)
            if off is None:
                off = len(buf)
                buf.append(0)
                buf.append(0)
                memo[q] = off
                work.append((q, off, 2))
            return (off << TAG_BITS) | ZLIST
        return c

    root = translate(cell)
    while work:
        src, dst, n = work.pop()
        for j in range(n):
            a = src + j
            c = cells[a]
            if c == (a << TAG_BITS) | REF and a not in memo:
                # unbound variable living inside the body: keep it inline
                memo[a] = dst + j
                buf[dst + j] = ((dst + j) << TAG_BITS) | ZREF
            else:
                buf[dst + j] = translate(c)
    return buf, root


def materialize(state: MachineState, buf: list[int], roots: list[int]) -> list[int]:
    """Copy a buffer onto the heap; returns the translated root cells."""
    n = len(buf)
    if n == 0:
        return [_shift(r, 0) for r in roots]
    base = state.heap.allocate(n)
    cells = state.heap.cells
    for i, c in enumerate(buf):
        t = c & TAG_MASK
        if t >= ZREF:
            cells[base + i] = (((c >> TAG_BITS) + base) << TAG_BITS) | (t - ZREF)
        else:
            cells[base + i] = c
    return [_shift(r, base) for r in roots]


def _shift(c: int, base: int) -> int:
    t = c & TAG_MASK
    if t >= ZREF:
        return (((c >> TAG_BITS) + base) << TAG_BITS) | (t - ZREF)
    return c


def copy_term(state: MachineState, cell: int, barrier: int | None = NO_BARRIER) -> int:
    """Return a fresh variant of ``cell`` on the heap (see :func:`copy_to_buffer`)."""
    buf, root = copy_to_buffer(state, cell, barrier)
    return materialize(state, buf, [root])[0]


def copy_size(state: MachineState, cell: int, barrier: int | None = NO_BARRIER) -> int:
    """Heap cells a :func:`copy_term` of ``cell`` would allocate."""
    buf, _ = copy_to_buffer(state, cell, barrier)
    return len(buf)


def is_ground(state: MachineState, cell: int) -> bool:
    cells = state.heap.cells
    seen: set[int] = set()
    stack = [cell]
    while stack:
        c = state.deref(stack.pop())
        t = c & TAG_MASK
        if t == REF:
            return False
        if t == STRUCT:
            q = c >> TAG_BITS
            if q in seen:
                continue
            seen.add(q)
            n = SYMBOLS.functors[cells[q] >> TAG_BITS][1]
            stack.extend(cells[q + 1:q + 1 + n])
        elif t == LIST:
            q = c >> TAG_BITS
            if q in seen:
                continue
            seen.add(q)
            stack.append(cells[q])
            stack.append(cells[q + 1])
    return True


__all__ = [
    "NO_BARRIER",
    "unify",
    "term_equal",
    "copy_to_buffer",
    "materialize",
    "copy_term",
    "copy_size",
    "is_ground",
]
