"""Order-preserving mark-and-copy garbage collector with a 75% expansion rule."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .store import (
    LIST,
    REF,
    STRUCT,
    SYMBOLS,
    TAG_BITS,
    TAG_MASK,
    MachineState,
)

EXPANSION_THRESHOLD = 0.75


@dataclass
class GcStats:
    collections: int = 0
    gc_time: float = 0.0  # seconds
    collected_cells: int = 0
    heap_size_after: int = 0  # capacity after the last collection
    high_water: int = 0  # largest heap top seen at collection time
    expansions: int = 0

    def add(self, other: "GcStats") -> None:
        self.collections += other.collections
        self.gc_time += other.gc_time
        self.collected_cells += other.collected_cells
        self.heap_size_after = other.heap_size_after
        self.high_water = max(self.high_water, other.high_water)
        self.expansions += other.expansions


def mark(state: MachineState, roots: list[int]) -> bytearray:
    """Mark every heap cell reachable from ``roots`` (a list of cells)."""
    cells = state.heap.cells
    functors = SYMBOLS.functors
    marked = bytearray(state.heap.top)
    stack = [c for c in roots if c & TAG_MASK in (REF, STRUCT, LIST)]
    while stack:
        c = stack.pop()
        t = c & TAG_MASK
        a = c >> TAG_BITS
        if t == REF:
            if not marked[a]:
                marked[a] = 1
                nxt = cells[a]
                if nxt != c and nxt & TAG_MASK <= LIST:
                    stack.append(nxt)
        elif t == STRUCT:
            if marked[a]:
                # functor cell already marked means the whole body was
                continue
            marked[a] = 1
            n = functors[cells[a] >> TAG_BITS][1]
            for i in range(a + 1, a + 1 + n):
                if not marked[i]:
                    marked[i] = 1
                    arg = cells[i]
                    if arg & TAG_MASK <= LIST and arg != (i << TAG_BITS) | REF:
                        stack.append(arg)
        elif t == LIST:
            for i in (a, a + 1):
                if not marked[i]:
                    marked[i] = 1
                    arg = cells[i]
                    if arg & TAG_MASK <= LIST and arg != (i << TAG_BITS) | REF:
                        stack.append(arg)
    return marked


def live_cells(state: MachineState, roots: list[int] | None = None) -> int:
    """Number of heap cells reachable from the root set (no mutation)."""
    if roots is None:
        roots = [container[i] for container, i in state.root_slots()]
    return sum(mark(state, roots))


def collect(state: MachineState, extra_roots: list[list[int]] = (), expand: bool = True) -> GcStats:
    """Collect garbage, keeping survivors in their original relative order.

    ``extra_roots`` are additional cell lists (e.g. argument registers of the
    builtin being executed); they are rewritten in place.
    """
    t0 = time.perf_counter()
    heap = state.heap
    top_before = heap.top
    slots = state.root_slots()
    for lst in extra_roots:
        for i in range(len(lst)):
            slots.append((lst, i))
    # Value-trail old values are roots; binding entries are not.
    root_cells = [container[i] for container, i in slots]
    marked = mark(state, root_cells)

    # forwarding: new address = number of live cells below the old address
    fwd = [0] * (top_before + 1)
    n = 0
    for i in range(top_before):
        fwd[i] = n
        n += marked[i]
    fwd[top_before] = n
    live = n

    cells = heap.cells
    new_cells = [0] * live
    j = 0
    for i in range(top_before):
        if marked[i]:
            c = cells[i]
            if c & TAG_MASK <= LIST:
                c = (fwd[c >> TAG_BITS] << TAG_BITS) | (c & TAG_MASK)
            new_cells[j] = c
            j += 1

    for container, i in slots:
        c = container[i]
        if c is not None and c & TAG_MASK <= LIST:
            a = c >> TAG_BITS
            if a < top_before:
                container[i] = (fwd[a] << TAG_BITS) | (c & TAG_MASK)

    # trail: drop entries for dead cells, relocate the rest
    addrs = state.trail_addr
    olds = state.trail_old
    kept_before = [0] * (len(addrs) + 1)
    new_addrs: list[int] = []
    new_olds: list[int | None] = []
    for k, a in enumerate(addrs):
        kept_before[k] = len(new_addrs)
        if a < top_before and marked[a]:
            new_addrs.append(fwd[a])
            new_olds.append(olds[k])  # old values were relocated as roots above
    kept_before[len(addrs)] = len(new_addrs)

    for cp in state.choicepoints:
        cp.hb = fwd[min(cp.hb, top_before)]
        cp.trail_top = kept_before[min(cp.trail_top, len(addrs))]
    for k, b in enumerate(state.barriers):
        state.barriers[k] = fwd[min(b, top_before)]

    cells[:] = new_cells
    heap.top = live
    addrs[:] = new_addrs
    olds[:] = new_olds
    _tidy_all(state)

    stats = GcStats(collections=1, collected_cells=top_before - live,
                    high_water=top_before)
    if expand and maybe_expand(state):
        stats.expansions = 1
    stats.heap_size_after = heap.capacity
    stats.gc_time = time.perf_counter() - t0
    return stats


def _tidy_all(state: MachineState) -> None:
    """Keep, per choicepoint segment, only entries older than that segment's HB."""
    cps = state.choicepoints
    addrs = state.trail_addr
    olds = state.trail_old
    if not cps:
        addrs.clear()
        olds.clear()
        return
    new_a: list[int] = []
    new_o: list[int | None] = []
    bounds = [cp.trail_top for cp in cps] + [len(addrs)]
    for k, cp in enumerate(cps):
        cp.trail_top = len(new_a)
        hb = cp.hb
        for i in range(bounds[k], bounds[k + 1]):
            if addrs[i] < hb:
                new_a.append(addrs[i])
                new_o.append(olds[i])
    state.trail_addr[:] = new_a
    state.trail_old[:] = new_o


def maybe_expand(state: MachineState) -> bool:
    """Double the capacity when live data occupies more than 75% of it."""
    heap = state.heap
    if heap.top > EXPANSION_THRESHOLD * heap.capacity:
        heap.capacity *= 2
        return True
    return False


__all__ = ["GcStats", "collect", "maybe_expand", "mark", "live_cells"]
