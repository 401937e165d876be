import pytest

from homophily_diffusion.events import DAY, slice_events
from homophily_diffusion.graph import load_graph
from homophily_diffusion.schema import ActionEvent, Continent, UserRecord

ORIGIN = 1_254_355_200.0  # a UTC midnight


def chain4_graph(locations=None):
    locations = locations or {}
    users = [UserRecord(u, location=locations.get(u)) for u in "ABCD"]
    return load_graph([("A", "B"), ("B", "C"), ("C", "D")], users)


def chain4_events():
    # one post per node, each at the midnight opening its slot
    acts = [("A", 1), ("B", 2), ("B", 3), ("C", 3), ("D", 4)]
    return [ActionEvent(u, ORIGIN + (m - 1) * DAY, frozenset({"t"})) for u, m in acts]


@pytest.fixture
def chain4():
    g = chain4_graph({"A": Continent.Europe, "B": Continent.Europe, "C": Continent.Asia, "D": Continent.Asia})
    events = chain4_events()
    return g, events, slice_events(events, ORIGIN, DAY)


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
