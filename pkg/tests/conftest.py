import sys

import pytest

from sharewam.store import MachineState
from sharewam.terms import TermWriter, put


class Roots:
    """A plain list of cells registered with a machine as a root region."""

    def __init__(self, state: MachineState) -> None:
        self.state = state
        self.cells: list[int] = []
        state.root_providers.append(lambda: [(self.cells, i) for i in range(len(self.cells))])

    def add(self, value, env=None) -> int:
        """Build ``value`` (python description) on the heap and root it; returns the index."""
        self.cells.append(put(self.state, value, env))
        return len(self.cells) - 1

    def push(self, cell: int) -> int:
        self.cells.append(cell)
        return len(self.cells) - 1

    def __getitem__(self, i: int) -> int:
        return self.cells[i]

    def shown(self) -> list[str]:
        w = TermWriter(self.state)
        return [w.format(c) for c in self.cells]


@pytest.fixture
def state():
    return MachineState(1 << 12)


@pytest.fixture
def roots(state):
    return Roots(state)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.VERDICTS:
            terminalreporter.write_line(line)
