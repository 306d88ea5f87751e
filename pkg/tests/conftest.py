import numpy as np
import pytest

from ltlplan.buchi import Guard, Nba
from ltlplan.workspace import GridWorkspace, Point

S = frozenset


def g_true():
    return Guard.true()


def g(*lits):
    """Guard from one conjunction of (label, positive) literals."""
    return Guard(frozenset([frozenset(lits)]))


def fig_nba() -> Nba:
    """The 5-state case-study automaton: visit l2 before any l1, visit l3,
    then revisit l1 forever.  State 4 is the lone feasible accepting state."""
    edges = [
        (0, g((1, False)), 0),
        (0, g((1, False), (3, True)), 1),
        (0, g((2, True)), 2),
        (0, g((2, True), (3, True)), 3),
        (1, g((1, False)), 1),
        (1, g((2, True)), 3),
        (2, g_true(), 2),
        (2, g((3, True)), 3),
        (3, g_true(), 3),
        (3, g((1, True)), 4),
        (4, g((1, True)), 4),
        (4, g_true(), 3),
    ]
    return Nba(n=5, init=0, accepting=frozenset([4]), edges=tuple(edges), n_aps=3)


def grid_workspace(rows: list[str], init: tuple[float, float]) -> GridWorkspace:
    """Build a workspace from ascii art: '.' free, '#' obstacle, digits
    are region labels."""
    H, W = len(rows), len(rows[0])
    grid = np.zeros((H, W), dtype=np.int64)
    m = 0
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch == "#":
                grid[r, c] = 1
            elif ch != ".":
                lab = int(ch)
                grid[r, c] = 1 + lab
                m = max(m, lab)
    return GridWorkspace(width=W, height=H, m=max(m, 1), init=Point(*init), grid=grid)


def case_study_workspace() -> GridWorkspace:
    """200x200 layout shaped like the case study: init at top left, l2
    nearby, l3 further along, l1 at the far side, so the l2-first ordering
    is strictly shorter than l3-first."""
    grid = np.zeros((200, 200), dtype=np.int64)
    grid[60:80, 40:60] = 1
    grid[120:140, 90:120] = 1
    grid[20:50, 130:145] = 1
    grid[30:50, 30:50] = 1 + 2  # l2 near the init
    grid[90:110, 60:80] = 1 + 3  # l3 midway
    grid[150:170, 150:170] = 1 + 1  # l1 far corner
    return GridWorkspace(width=200, height=200, m=3, init=Point(0.1, 0.05), grid=grid)


@pytest.fixture
def fig():
    return fig_nba()


@pytest.fixture
def case_ws():
    return case_study_workspace()
