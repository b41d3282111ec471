"""Benchmark and example programs shipped with the package."""

from importlib import resources

NAMES = ("tails", "tree", "blid", "bestworst", "examples")


def source(name: str) -> str:
    """Text of the corpus program ``name`` (without the .pl suffix)."""
    if name not in NAMES:
        raise KeyError(f"no corpus program {name!r}; known: {', '.join(NAMES)}")
    return resources.files(__name__).joinpath(f"{name}.pl").read_text()
