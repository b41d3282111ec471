"""Tagged-cell heap, trail and choicepoint stack.

A cell is a plain ``int``: the low four bits hold the tag, the rest is the
payload.  Heap addresses are indices into one growable list, so address order
is allocation order.

Tags
----
REF      payload = heap index (an unbound variable points to itself)
STRUCT   payload = heap index of a FUNCTOR cell
LIST     payload = heap index of a (head, tail) cell pair
FUNCTOR  payload = functor id (see :data:`SYMBOLS`)
ATOM     payload = atom id
INT      payload = signed integer
ZREF, ZSTRUCT, ZLIST
         the same roles inside an off-heap copy buffer (findall zones);
         payload is a buffer offset.  The heap never holds these.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

REF, STRUCT, LIST, FUNCTOR, ATOM, INT, ZREF, ZSTRUCT, ZLIST = range(9)
TAG_BITS = 4
TAG_MASK = (1 << TAG_BITS) - 1

TAG_NAMES = ("REF", "STRUCT", "LIST", "FUNCTOR", "ATOM", "INT", "ZREF", "ZSTRUCT", "ZLIST")

# tags whose payload is a heap address
POINTER_TAGS = frozenset((REF, STRUCT, LIST))


def make_cell(tag: int, payload: int) -> int:
    return (payload << TAG_BITS) | tag


def tag_of(cell: int) -> int:
    return cell & TAG_MASK


def payload_of(cell: int) -> int:
    return cell >> TAG_BITS


def ref_cell(addr: int) -> int:
    return (addr << TAG_BITS) | REF


def struct_cell(addr: int) -> int:
    return (addr << TAG_BITS) | STRUCT


def list_cell(addr: int) -> int:
    return (addr << TAG_BITS) | LIST


def int_cell(value: int) -> int:
    return (value << TAG_BITS) | INT


class SymbolTable:
    """Interned atoms and functors.  Ids are never reused."""

    def __init__(self) -> None:
        self.atom_names: list[str] = []
        self._atom_ids: dict[str, int] = {}
        self.functors: list[tuple[str, int]] = []
        self._functor_ids: dict[tuple[str, int], int] = {}

    def atom(self, name: str) -> int:
        aid = self._atom_ids.get(name)
        if aid is None:
            aid = len(self.atom_names)
            self.atom_names.append(name)
            self._atom_ids[name] = aid
        return aid

    def functor(self, name: str, arity: int) -> int:
        key = (name, arity)
        fid = self._functor_ids.get(key)
        if fid is None:
            fid = len(self.functors)
            self.functors.append(key)
            self._functor_ids[key] = fid
        return fid


SYMBOLS = SymbolTable()


def atom_cell(name: str) -> int:
    return (SYMBOLS.atom(name) << TAG_BITS) | ATOM


def functor_cell(name: str, arity: int) -> int:
    return (SYMBOLS.functor(name, arity) << TAG_BITS) | FUNCTOR


def atom_name(cell: int) -> str:
    return SYMBOLS.atom_names[cell >> TAG_BITS]


def functor_of(cell: int) -> tuple[str, int]:
    """(name, arity) of a FUNCTOR cell."""
    return SYMBOLS.functors[cell >> TAG_BITS]


def arity_of(cell: int) -> int:
    return SYMBOLS.functors[cell >> TAG_BITS][1]


NIL = atom_cell("[]")


def describe(cell: int) -> str:
    """Debug rendering of a single cell, e.g. ``STRUCT 5`` or ``ATOM a``."""
    tag = cell & TAG_MASK
    p = cell >> TAG_BITS
    if tag == ATOM:
        return f"ATOM {SYMBOLS.atom_names[p]}"
    if tag == FUNCTOR:
        name, arity = SYMBOLS.functors[p]
        return f"FUNCTOR {name}/{arity}"
    return f"{TAG_NAMES[tag]} {p}"


class HeapOverflow(Exception):
    """Raised when an allocation does not fit in the current capacity."""


class Heap:
    """Growable cell array with a monotone allocation pointer."""

    def __init__(self, capacity: int = 1 << 16) -> None:
        if capacity < 1:
            raise ValueError("heap capacity must be positive")
        self.cells: list[int] = []
        self.top = 0
        self.capacity = capacity

    def allocate(self, n: int) -> int:
        if n < 1:
            raise ValueError("allocation size must be at least one cell")
        start = self.top
        end = start + n
        if end > self.capacity:
            raise HeapOverflow(f"need {n} cells at top {start}, capacity {self.capacity}")
        cells = self.cells
        if end > len(cells):
            cells.extend([0] * (end - len(cells)))
        self.top = end
        return start

    def new_var(self) -> int:
        """Allocate one unbound variable and return its address."""
        addr = self.allocate(1)
        self.cells[addr] = (addr << TAG_BITS) | REF
        return addr

    def __getitem__(self, addr: int) -> int:
        return self.cells[addr]

    def __setitem__(self, addr: int, cell: int) -> None:
        self.cells[addr] = cell

    def __len__(self) -> int:
        return self.top

    def live_slice(self) -> list[int]:
        return self.cells[: self.top]


@dataclass(eq=False)
class Choicepoint:
    """Saved machine state for one alternative.

    ``alternative`` and ``continuation`` are opaque to the store; the engine
    decides what they mean.  ``args`` are the saved argument registers and are
    scanned by the collector and the sharer.
    """

    hb: int
    trail_top: int
    alternative: Any = None
    args: list[int] = field(default_factory=list)
    continuation: Any = None


class MachineState:
    """Heap, trail, choicepoint stack and the root-set registry.

    The trail is kept as two parallel lists: ``trail_addr[i]`` is the trailed
    heap index and ``trail_old[i]`` is ``None`` for a binding entry or the
    overwritten cell for a value entry.
    """

    def __init__(self, heap_cells: int = 1 << 16) -> None:
        self.heap = Heap(heap_cells)
        self.trail_addr: list[int] = []
        self.trail_old: list[int | None] = []
        self.choicepoints: list[Choicepoint] = []
        # Barrier tokens: token id -> heap index (remapped by the collector).
        self.barriers: list[int] = []
        self.copy_barrier: int | None = None  # token id armed for the next copy
        # Extra root providers: each returns an iterable of (container, index).
        self.root_providers: list[Callable[[], Iterable[tuple[list, int]]]] = []
        # Off-heap cell buffers (findall zones); registered by the findall module.
        self.zones: dict[int, list[int]] = {}
        self.mutable_functors: set[int] = set()  # functor ids

    # -- allocation -----------------------------------------------------

    def allocate(self, n: int) -> int:
        return self.heap.allocate(n)

    # -- dereferencing and binding --------------------------------------

    def deref(self, cell: int) -> int:
        """Follow REF chains to a non-REF cell or an unbound variable."""
        cells = self.heap.cells
        while cell & TAG_MASK == REF:
            nxt = cells[cell >> TAG_BITS]
            if nxt == cell:
                return cell
            cell = nxt
        return cell

    def deref_addr(self, cell: int) -> tuple[int, int]:
        """Like :meth:`deref` but also returns the address of the last cell read.

        The address is -1 when ``cell`` was not a REF to begin with.
        """
        cells = self.heap.cells
        addr = -1
        while cell & TAG_MASK == REF:
            a = cell >> TAG_BITS
            nxt = cells[a]
            addr = a
            if nxt == cell:
                return cell, addr
            cell = nxt
        return cell, addr

    @property
    def hb(self) -> int:
        cps = self.choicepoints
        return cps[-1].hb if cps else 0

    def bind(self, addr: int, value: int) -> None:
        cells = self.heap.cells
        if cells[addr] != (addr << TAG_BITS) | REF:
            raise ValueError(f"bind: cell {addr} is not an unbound variable")
        cells[addr] = value
        cps = self.choicepoints
        if cps and addr < cps[-1].hb:
            self.trail_addr.append(addr)
            self.trail_old.append(None)

    def set_value(self, addr: int, value: int, backtrackable: bool = True) -> None:
        """Destructively overwrite a heap cell (setarg-style)."""
        cells = self.heap.cells
        if backtrackable:
            cps = self.choicepoints
            if cps and addr < cps[-1].hb:
                self.trail_addr.append(addr)
                self.trail_old.append(cells[addr])
        cells[addr] = value

    def freeze_heap(self) -> None:
        """Protect everything below the current top from backtracking."""
        top = self.heap.top
        for cp in self.choicepoints:
            if cp.hb < top:
                cp.hb = top

    # -- choicepoints ---------------------------------------------------

    def push_choicepoint(self, alternative: Any = None, args: list[int] | None = None,
                         continuation: Any = None) -> Choicepoint:
        cp = Choicepoint(self.heap.top, len(self.trail_addr), alternative,
                         args if args is not None else [], continuation)
        self.choicepoints.append(cp)
        return cp

    def untrail(self, trail_top: int) -> None:
        cells = self.heap.cells
        addrs = self.trail_addr
        olds = self.trail_old
        for i in range(len(addrs) - 1, trail_top - 1, -1):
            a = addrs[i]
            old = olds[i]
            cells[a] = (a << TAG_BITS) | REF if old is None else old
        del addrs[trail_top:]
        del olds[trail_top:]

    def backtrack(self) -> Choicepoint:
        """Restore the newest choicepoint's state, pop it and return it.

        Raises :class:`IndexError` when there is no choicepoint (query failure).
        """
        cp = self.choicepoints.pop()
        self.untrail(cp.trail_top)
        self.heap.top = cp.hb
        return cp

    def cut_to(self, depth: int) -> None:
        """Discard choicepoints above ``depth`` and tidy the trail."""
        cps = self.choicepoints
        if depth >= len(cps):
            return
        del cps[depth:]
        self.tidy_trail()

    def tidy_trail(self) -> None:
        """Drop trail entries that are no longer conditional."""
        cps = self.choicepoints
        addrs = self.trail_addr
        if not cps:
            addrs.clear()
            self.trail_old.clear()
            return
        newest = cps[-1]
        start = newest.trail_top
        hb = newest.hb
        olds = self.trail_old
        keep_a = []
        keep_o = []
        for i in range(start, len(addrs)):
            if addrs[i] < hb:
                keep_a.append(addrs[i])
                keep_o.append(olds[i])
        del addrs[start:]
        del olds[start:]
        addrs.extend(keep_a)
        olds.extend(keep_o)

    # -- barriers -------------------------------------------------------

    def new_barrier(self, addr: int | None = None) -> int:
        """Register a heap-top barrier and return its token id."""
        self.barriers.append(self.heap.top if addr is None else addr)
        return len(self.barriers) - 1

    # -- roots ----------------------------------------------------------

    def root_slots(self) -> list[tuple[list, int]]:
        """Every mutable location outside the heap that may hold a heap pointer.

        Duplicates are removed, so callers may rewrite each slot exactly once.
        """
        seen: set[tuple[int, int]] = set()
        out: list[tuple[list, int]] = []

        def add(container: list, index: int) -> None:
            key = (id(container), index)
            if key not in seen:
                seen.add(key)
                out.append((container, index))

        for cp in self.choicepoints:
            args = cp.args
            for i in range(len(args)):
                add(args, i)
        olds = self.trail_old
        for i, old in enumerate(olds):
            if old is not None:
                add(olds, i)
        for zone in self.zones.values():
            for i in range(len(zone)):
                add(zone, i)
        for provider in self.root_providers:
            for container, index in provider():
                add(container, index)
        return out

    def trailed_addresses(self) -> set[int]:
        return set(self.trail_addr)
