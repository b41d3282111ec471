"""Representation sharing: redirect references to the oldest equal term body.

The sharer runs in two phases over the whole heap.

*build* fills ``cached`` (one entry per heap cell) and the ``hashed_terms``
buckets without touching the heap.  Each compound term is keyed on its
FUNCTOR cell; a list is keyed on the cell that holds the LIST pointer, since
list pairs have no header.  A bucket remembers the oldest key seen for one
equivalence class of equal terms.

*absorb* rewrites every STRUCT pointer (and every heap LIST holder) whose
target has a bucket, so that it points at that bucket's oldest representative.

Terms containing trailed cells or mutable functors never get a bucket.
"""

from __future__ import annotations

import enum
import os
import time
import zlib
from dataclasses import dataclass
from typing import Callable

from .store import (
    ATOM,
    FUNCTOR,
    INT,
    LIST,
    REF,
    STRUCT,
    SYMBOLS,
    TAG_BITS,
    TAG_MASK,
    MachineState,
)

# cached-entry encoding; values > 0 are bucket index + 1
NO_INFO = 0
IMPOSSIBLE = -1
BUSY = -2

CYCLE_HASH = 17
MASK64 = (1 << 64) - 1
_MUL = 0x9E3779B97F4A7C15
_LIST_SEED = 0x4C495354  # "LIST"
_VAR_SALT = 0x5641525F

POISON = None


class Policy(enum.Enum):
    OFF = "r0"
    AFTER_GC = "r1"
    BETWEEN_GC = "r2"

    @classmethod
    def parse(cls, text: str) -> "Policy":
        t = text.lower().lstrip("-")
        for p in cls:
            if t in (p.value, p.name.lower(), p.name.lower().replace("_", "-")):
                return p
        if t == "off":
            return cls.OFF
        raise ValueError(f"unknown sharing policy {text!r} (expected r0, r1 or r2)")


@dataclass
class ShareStats:
    runs: int = 0
    share_time: float = 0.0  # seconds
    build_time: float = 0.0
    absorb_time: float = 0.0
    absorptions: int = 0
    buckets_used: int = 0
    cells_made_impossible: int = 0

    def add(self, other: "ShareStats") -> None:
        self.runs += other.runs
        self.share_time += other.share_time
        self.build_time += other.build_time
        self.absorb_time += other.absorb_time
        self.absorptions += other.absorptions
        self.buckets_used += other.buckets_used
        self.cells_made_impossible += other.cells_made_impossible


def default_seed() -> int:
    raw = os.environ.get("SHAREWAM_SEED", "0")
    try:
        return int(raw, 0)
    except ValueError:
        return zlib.crc32(raw.encode())


def _mix(h: int) -> int:
    h = (h * _MUL) & MASK64
    return h ^ (h >> 29)


class Sharer:
    """One run of the sharer over a machine state.

    ``table_size`` overrides the number of hash chains (useful to force
    collisions in tests); the default is ``max(1024, heap_top // 4)``.
    """

    def __init__(self, state: MachineState, table_size: int | None = None,
                 seed: int | None = None) -> None:
        self.state = state
        top = state.heap.top
        self.size = table_size if table_size is not None else max(1024, top // 4)
        self.seed = default_seed() if seed is None else seed
        self.cached: list[int] = []
        self.heads: list[int] = []
        self.bucket_hash: list[int] = []
        self.bucket_term: list[int] = []
        self.bucket_next: list[int] = []
        self.made_impossible = 0
        self._atom_hash: dict[int, int] = {}
        self._functor_hash: dict[int, int] = {}

    # -- hashing helpers --------------------------------------------------

    def atom_hash(self, cell: int) -> int:
        h = self._atom_hash.get(cell)
        if h is None:
            name = SYMBOLS.atom_names[cell >> TAG_BITS]
            h = _mix(zlib.crc32(name.encode()) ^ (self.seed << 1) ^ 0xA7)
            self._atom_hash[cell] = h
        return h

    def functor_hash(self, cell: int) -> int:
        h = self._functor_hash.get(cell)
        if h is None:
            name, arity = SYMBOLS.functors[cell >> TAG_BITS]
            h = _mix((zlib.crc32(name.encode()) << 8) ^ arity ^ (self.seed << 3) ^ 0xF5)
            self._functor_hash[cell] = h
        return h

    # -- phase 0: tables --------------------------------------------------

    def init_tables(self) -> None:
        """Reset the tables and mark trailed and mutable-body cells impossible."""
        state = self.state
        top = state.heap.top
        self.cached = cached = [NO_INFO] * top
        self.heads = [-1] * self.size
        self.bucket_hash = []
        self.bucket_term = []
        self.bucket_next = []
        self.made_impossible = 0
        for a in state.trail_addr:
            if a < top:
                cached[a] = IMPOSSIBLE
        mutable = state.mutable_functors
        if mutable:
            cells = state.heap.cells
            functors = SYMBOLS.functors
            for p in range(top):
                c = cells[p]
                if c & TAG_MASK == FUNCTOR and (c >> TAG_BITS) in mutable:
                    n = functors[c >> TAG_BITS][1]
                    for i in range(p, p + n + 1):
                        cached[i] = IMPOSSIBLE

    def is_trailed(self, addr: int) -> bool:
        return addr in set(self.state.trail_addr)

    # -- phase 1: build ---------------------------------------------------

    def build(self, abandon: Callable[[], bool] | None = None, check_every: int = 4096) -> bool:
        """Treat every FUNCTOR cell and every heap cell holding a LIST pointer.

        Returns False when ``abandon`` asked to stop; the heap is untouched
        either way.
        """
        cells = self.state.heap.cells
        cached = self.cached
        top = len(cached)
        for p in range(top):
            if abandon is not None and p % check_every == 0 and abandon():
                return False
            if cached[p] != NO_INFO:
                continue
            t = cells[p] & TAG_MASK
            if t == FUNCTOR:
                self._hash_entry(p, False)
            elif t == LIST:
                self._hash_entry(p, True)
        return True

    def compute_hash(self, cell: int, holder: int = -1) -> int | None:
        """Hash of the term ``cell`` (read from heap address ``holder`` if any).

        Returns None when the term is poisoned.  Treats the term as a side
        effect, exactly as the build phase does.
        """
        cached = self.cached
        cells = self.state.heap.cells
        addr = holder
        if addr >= 0 and cached[addr] == IMPOSSIBLE:
            return POISON
        c = cell
        while c & TAG_MASK == REF:
            b = c >> TAG_BITS
            if cells[b] == c:
                return _mix(b ^ _VAR_SALT ^ self.seed)
            if cached[b] == IMPOSSIBLE:
                return POISON
            addr = b
            c = cells[b]
        t = c & TAG_MASK
        if t == ATOM:
            return self.atom_hash(c)
        if t == INT:
            return _mix((c >> TAG_BITS) & MASK64 ^ 0x1A7 ^ self.seed)
        if t == STRUCT:
            key, is_list = c >> TAG_BITS, False
        elif t == LIST:
            if addr < 0:
                # list pointer outside the heap: hash without memoizing
                return self._hash_detached_list(c)
            key, is_list = addr, True
        else:
            return POISON
        e = cached[key]
        if e > 0:
            return self.bucket_hash[e - 1]
        if e == BUSY:
            return CYCLE_HASH
        if e == IMPOSSIBLE:
            return POISON
        return self._hash_entry(key, is_list)

    def _hash_detached_list(self, c: int) -> int | None:
        q = c >> TAG_BITS
        h1 = self.compute_hash(self.state.heap.cells[q], q)
        if h1 is POISON:
            return POISON
        h2 = self.compute_hash(self.state.heap.cells[q + 1], q + 1)
        if h2 is POISON:
            return POISON
        h = _LIST_SEED ^ self.seed
        h = (((h << 5) | (h >> 59)) & MASK64) ^ h1
        h = (((h << 5) | (h >> 59)) & MASK64) ^ h2
        return _mix(h)

    def _hash_entry(self, key: int, is_list: bool) -> int | None:
        """Iterative post-order hashing of the term keyed at ``key``."""
        state = self.state
        cells = state.heap.cells
        cached = self.cached
        bucket_hash = self.bucket_hash
        functors = SYMBOLS.functors
        seed = self.seed

        # frame: [key, is_list, acc, next_arg_addr, end_addr]
        def open_frame(k: int, lst: bool) -> list:
            cached[k] = BUSY
            if lst:
                q = cells[k] >> TAG_BITS
                return [k, True, _LIST_SEED ^ seed, q, q + 2]
            f = cells[k]
            n = functors[f >> TAG_BITS][1]
            return [k, False, self.functor_hash(f), k + 1, k + 1 + n]

        stack = [open_frame(key, is_list)]
        result: int | None = None
        while stack:
            fr = stack[-1]
            a = fr[3]
            if a == fr[4]:
                h = _mix(fr[2])
                stack.pop()
                self._save_hash(h, fr[0])
                if stack:
                    p = stack[-1]
                    acc = p[2]
                    p[2] = (((acc << 5) | (acc >> 59)) & MASK64) ^ h
                else:
                    result = h
                continue
            fr[3] = a + 1
            # trail-aware dereference of the argument cell at address a
            if cached[a] == IMPOSSIBLE:
                self._poison(stack)
                return POISON
            addr = a
            c = cells[a]
            h = -1
            while c & TAG_MASK == REF:
                b = c >> TAG_BITS
                if cells[b] == c:
                    h = _mix(b ^ _VAR_SALT ^ seed)
                    break
                if cached[b] == IMPOSSIBLE:
                    self._poison(stack)
                    return POISON
                addr = b
                c = cells[b]
            if h < 0:
                t = c & TAG_MASK
                if t == ATOM:
                    h = self.atom_hash(c)
                elif t == INT:
                    h = _mix((c >> TAG_BITS) & MASK64 ^ 0x1A7 ^ seed)
                else:
                    if t == STRUCT:
                        k, lst = c >> TAG_BITS, False
                    else:  # LIST, keyed on its holder cell
                        k, lst = addr, True
                    e = cached[k]
                    if e > 0:
                        h = bucket_hash[e - 1]
                    elif e == BUSY:
                        h = CYCLE_HASH
                    elif e == IMPOSSIBLE:
                        self._poison(stack)
                        return POISON
                    else:
                        stack.append(open_frame(k, lst))
                        continue
            acc = fr[2]
            fr[2] = (((acc << 5) | (acc >> 59)) & MASK64) ^ h
        return result

    def _poison(self, stack: list) -> None:
        cached = self.cached
        for fr in stack:
            cached[fr[0]] = IMPOSSIBLE
            self.made_impossible += 1
        stack.clear()

    def entry_cell(self, key: int) -> int:
        """The term cell an entry key stands for (STRUCT for bodies, the
        holder's LIST pointer for lists)."""
        c = self.state.heap.cells[key]
        if c & TAG_MASK == FUNCTOR:
            return (key << TAG_BITS) | STRUCT
        return c

    def _save_hash(self, h: int, key: int) -> None:
        idx = h % self.size
        b = self.heads[idx]
        bucket_hash = self.bucket_hash
        bucket_term = self.bucket_term
        while b != -1:
            if bucket_hash[b] == h and self._equal(bucket_term[b], key):
                if self._age(key) < self._age(bucket_term[b]):
                    bucket_term[b] = key
                self.cached[key] = b + 1
                return
            b = self.bucket_next[b]
        b = len(bucket_hash)
        bucket_hash.append(h)
        bucket_term.append(key)
        self.bucket_next.append(self.heads[idx])
        self.heads[idx] = b
        self.cached[key] = b + 1

    def save_hash(self, h: int, key: int) -> None:
        self._save_hash(h, key)

    def _age(self, key: int) -> tuple[int, int]:
        # a list key is its holder cell; what absorption redirects to is the
        # body it points at, so that body's address decides who is oldest
        c = self.state.heap.cells[key]
        return ((c >> TAG_BITS) if c & TAG_MASK == LIST else key, key)

    def _equal(self, k1: int, k2: int) -> bool:
        """==/2 between two entry keys, short-circuiting through buckets.

        Two treated sub-terms in the same bucket are equal by construction,
        so each comparison only descends into untreated or differing parts.
        """
        cells = self.state.heap.cells
        cached = self.cached
        functors = SYMBOLS.functors
        assumed: set[tuple[int, int]] = set()
        stack = [(self.entry_cell(k1), k1, self.entry_cell(k2), k2)]
        while stack:
            x, ax, y, ay = stack.pop()
            while x & TAG_MASK == REF:
                n = cells[x >> TAG_BITS]
                if n == x:
                    break
                ax = x >> TAG_BITS
                x = n
            while y & TAG_MASK == REF:
                n = cells[y >> TAG_BITS]
                if n == y:
                    break
                ay = y >> TAG_BITS
                y = n
            if x == y:
                continue
            t = x & TAG_MASK
            if t != y & TAG_MASK:
                return False
            if t == STRUCT:
                p = x >> TAG_BITS
                q = y >> TAG_BITS
                e = cached[p]
                if e > 0 and e == cached[q]:
                    continue
                if (p, q) in assumed:
                    continue
                f = cells[p]
                if f != cells[q]:
                    return False
                assumed.add((p, q))
                for i in range(functors[f >> TAG_BITS][1], 0, -1):
                    stack.append((cells[p + i], p + i, cells[q + i], q + i))
            elif t == LIST:
                if ax >= 0 and ay >= 0:
                    e = cached[ax]
                    if e > 0 and e == cached[ay]:
                        continue
                p = x >> TAG_BITS
                q = y >> TAG_BITS
                if (p, q) in assumed:
                    continue
                assumed.add((p, q))
                stack.append((cells[p + 1], p + 1, cells[q + 1], q + 1))
                stack.append((cells[p], p, cells[q], q))
            else:
                return False
        return True

    # -- phase 2: absorb --------------------------------------------------

    def absorb(self, extra_roots: list[list[int]] = ()) -> int:
        """Redirect references to bucket representatives; returns the rewrite count."""
        state = self.state
        cells = state.heap.cells
        cached = self.cached
        bucket_term = self.bucket_term
        top = len(cached)
        count = 0
        for p in range(top):
            c = cells[p]
            t = c & TAG_MASK
            if t == STRUCT:
                q = c >> TAG_BITS
                e = cached[q]
                if e > 0:
                    r = bucket_term[e - 1]
                    if r != q:
                        cells[p] = (r << TAG_BITS) | STRUCT
                        count += 1
            elif t == LIST:
                e = cached[p]
                if e > 0:
                    r = bucket_term[e - 1]
                    if r != p:
                        new = cells[r]
                        if new != c:
                            cells[p] = new
                            count += 1
        slots = state.root_slots()
        for lst in extra_roots:
            for i in range(len(lst)):
                slots.append((lst, i))
        for container, i in slots:
            c = container[i]
            if c is not None and c & TAG_MASK == STRUCT:
                q = c >> TAG_BITS
                if q < top:
                    e = cached[q]
                    if e > 0:
                        r = bucket_term[e - 1]
                        if r != q:
                            container[i] = (r << TAG_BITS) | STRUCT
                            count += 1
        return count

    # -- inspection -------------------------------------------------------

    def bucket_of(self, key: int) -> int | None:
        e = self.cached[key]
        return e - 1 if e > 0 else None

    def representative(self, key: int) -> int | None:
        b = self.bucket_of(key)
        return None if b is None else self.bucket_term[b]

    @property
    def buckets_used(self) -> int:
        return len(self.bucket_hash)


def run_sharer(state: MachineState, extra_roots: list[list[int]] = (),
               table_size: int | None = None, seed: int | None = None) -> ShareStats:
    """init_tables, build and absorb once."""
    t0 = time.perf_counter()
    sharer = Sharer(state, table_size=table_size, seed=seed)
    sharer.init_tables()
    sharer.build()
    t1 = time.perf_counter()
    n = sharer.absorb(extra_roots)
    t2 = time.perf_counter()
    return ShareStats(runs=1, share_time=t2 - t0, build_time=t1 - t0, absorb_time=t2 - t1,
                      absorptions=n, buckets_used=sharer.buckets_used,
                      cells_made_impossible=sharer.made_impossible)


# -- can-absorb decision procedures (debug / property oracles) ------------

def can_absorb(state: MachineState, a1: int, a2: int) -> bool:
    """Cell-level relation: equal contents, neither cell trailed, a1 older."""
    cells = state.heap.cells
    if cells[a1] != cells[a2]:
        return False
    trailed = set(state.trail_addr)
    if a1 in trailed or a2 in trailed:
        return False
    return a1 < a2


def _contains_barred(state: MachineState, cell: int, holder: int, trailed: set[int]) -> bool:
    cells = state.heap.cells
    mutable = state.mutable_functors
    functors = SYMBOLS.functors
    seen: set[int] = set()
    stack = [(cell, holder)]
    while stack:
        c, a = stack.pop()
        if a >= 0 and a in trailed:
            return True
        while c & TAG_MASK == REF:
            b = c >> TAG_BITS
            if cells[b] == c:
                break
            if b in trailed:
                return True
            c = cells[b]
        t = c & TAG_MASK
        if t == STRUCT:
            q = c >> TAG_BITS
            if q in seen:
                continue
            seen.add(q)
            f = cells[q] >> TAG_BITS
            if f in mutable:
                return True
            for i in range(1, functors[f][1] + 1):
                stack.append((cells[q + i], q + i))
        elif t == LIST:
            q = c >> TAG_BITS
            if q in seen:
                continue
            seen.add(q)
            stack.append((cells[q], q))
            stack.append((cells[q + 1], q + 1))
    return False


def terms_can_absorb(state: MachineState, t1: int, t2: int) -> bool:
    """Compound-term relation: t1 older than t2, t1 == t2, and neither term
    contains a trailed cell or a mutable functor."""
    from .unify import term_equal

    c1 = state.deref(t1)
    c2 = state.deref(t2)
    if c1 & TAG_MASK not in (STRUCT, LIST) or c2 & TAG_MASK != c1 & TAG_MASK:
        return False
    if not (c1 >> TAG_BITS) < (c2 >> TAG_BITS):
        return False
    if not term_equal(state, c1, c2):
        return False
    trailed = set(state.trail_addr)
    return not (_contains_barred(state, c1, -1, trailed)
                or _contains_barred(state, c2, -1, trailed))
