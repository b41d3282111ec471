"""Temporary zones for findall/3: classic, input-sharing and copy-once.

A zone is an off-heap cell buffer plus the list of solution roots.  Both are
registered in ``state.zones`` so the collector and the sharer treat any heap
pointer inside them (input-shared old bodies) as roots and relocate them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .store import LIST, NIL, TAG_BITS, MachineState
from .unify import copy_to_buffer, materialize


@dataclass
class FindallHandle:
    id: int
    zone: list[int] = field(default_factory=list)
    roots: list[int] = field(default_factory=list)
    barrier: int | None = None  # barrier token used by the last copy, if any


class FindallZones:
    """Handle table for nested findall invocations on one machine."""

    def __init__(self, state: MachineState) -> None:
        self.state = state
        self.handles: dict[int, FindallHandle] = {}
        self._next = 0

    def init(self) -> FindallHandle:
        h = FindallHandle(self._next)
        self._next += 1
        self.handles[h.id] = h
        self.state.zones[2 * h.id] = h.zone
        self.state.zones[2 * h.id + 1] = h.roots
        return h

    def get(self, hid: int) -> FindallHandle:
        try:
            return self.handles[hid]
        except KeyError:
            raise KeyError(f"no live findall handle {hid}") from None

    def _take_barrier(self, h: FindallHandle) -> int | None:
        state = self.state
        token = state.copy_barrier
        state.copy_barrier = None
        if token is None:
            return None
        h.barrier = token
        return state.barriers[token]

    def add(self, h: FindallHandle, template: int) -> int:
        """Copy ``template`` into the zone; returns the number of zone cells used."""
        barrier = self._take_barrier(h)
        before = len(h.zone)
        _, root = copy_to_buffer(self.state, template, barrier, h.zone)
        h.roots.append(root)
        return len(h.zone) - before

    def solution_cells(self, h: FindallHandle) -> int:
        """Heap cells :meth:`get_solutions` will allocate."""
        return len(h.zone) + 2 * len(h.roots)

    def get_solutions(self, h: FindallHandle) -> int:
        """Copy the zone back to the heap as a list and release the handle.

        The caller must have made room for :meth:`solution_cells` cells.
        Input-shared pointers in the zone are already heap references and
        are emitted unchanged.
        """
        self._take_barrier(h)
        state = self.state
        roots = materialize(state, h.zone, h.roots) if h.roots else []
        result = NIL
        if roots:
            base = state.heap.allocate(2 * len(roots))
            cells = state.heap.cells
            for k, r in enumerate(roots):
                p = base + 2 * k
                cells[p] = r
                cells[p + 1] = ((p + 2) << TAG_BITS) | LIST
            cells[base + 2 * len(roots) - 1] = NIL
            result = (base << TAG_BITS) | LIST
        self.release(h)
        return result

    def release(self, h: FindallHandle) -> None:
        self.handles.pop(h.id, None)
        self.state.zones.pop(2 * h.id, None)
        self.state.zones.pop(2 * h.id + 1, None)

    def clear(self) -> None:
        for h in list(self.handles.values()):
            self.release(h)


def current_heap_top(state: MachineState) -> int:
    """Register the current heap top as a barrier; returns its token."""
    return state.new_barrier()


def set_copy_heap_barrier(state: MachineState, token: int) -> None:
    if not 0 <= token < len(state.barriers):
        raise ValueError(f"unknown heap barrier token {token}")
    state.copy_barrier = token
