"""A miniature WAM-style Prolog machine with post-GC representation sharing
and an input-sharing findall/3."""

from .engine import Engine, PrologError
from .findall import FindallZones
from .gc import GcStats, collect, live_cells, maybe_expand
from .reader import ParseError, parse_term, parse_terms
from .sharer import Policy, Sharer, ShareStats, can_absorb, run_sharer, terms_can_absorb
from .store import Heap, HeapOverflow, MachineState
from .unify import copy_term, term_equal, unify

__all__ = [
    "Engine", "PrologError", "FindallZones", "GcStats", "collect", "live_cells",
    "maybe_expand", "ParseError", "parse_term", "parse_terms", "Policy", "Sharer",
    "ShareStats", "can_absorb", "run_sharer", "terms_can_absorb", "Heap",
    "HeapOverflow", "MachineState", "copy_term", "term_equal", "unify",
]
__version__ = "0.1.0"
