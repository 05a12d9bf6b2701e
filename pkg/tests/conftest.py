import pytest

from hybridloc.floorplan import AnchorConfig, FloorPlan, Room
from hybridloc.pipeline import demo_inputs

UNIT_SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def unit_plan():
    return FloorPlan(
        [Room("r", UNIT_SQUARE)],
        UNIT_SQUARE,
        [AnchorConfig("A", (0.0, 0.0))],
    )


@pytest.fixture
def two_room_plan():
    """Rooms [0,1]x[0,1] and [1,2]x[0,1] sharing the edge x = 1."""
    return FloorPlan(
        [
            Room("west", [(0, 0), (1, 0), (1, 1), (0, 1)]),
            Room("east", [(1, 0), (2, 0), (2, 1), (1, 1)]),
        ],
        [(0, 0), (2, 0), (2, 1), (0, 1)],
        [AnchorConfig("A", (0.1, 0.5)), AnchorConfig("B", (1.9, 0.5))],
    )


@pytest.fixture
def rect_plan():
    outer = [(0, 0), (10, 0), (10, 6), (0, 6)]
    return FloorPlan([Room("all", outer)], outer, [AnchorConfig("A", (1.0, 1.0))])


@pytest.fixture(scope="session")
def demo():
    return demo_inputs()
