import heapq

import numpy as np
import pytest

from decmarl.gridworld import Cell, GridWorld, parse_layout


def world_from_rows(rows, goals=None, hard=False, p_toggle=0.02, seed=0):
    """Build a GridWorld from layout rows; goals default to the first object for everyone."""
    layout = parse_layout(f"{len(rows[0])} {len(rows)}\n" + "\n".join(rows))
    starts = list(layout.agent_starts)
    if goals is None:
        goals = [layout.objects[0]] * len(starts) if layout.objects else []
    return GridWorld(
        width=layout.width,
        height=layout.height,
        static_obstacles=layout.static_obstacles,
        dynamic_obstacles={c: False for c in layout.dynamic_sites},
        objects=frozenset(layout.objects),
        agent_positions=starts,
        agent_goals=list(goals),
        start_positions=tuple(starts),
        hard=hard,
        p_toggle=p_toggle,
        rng=np.random.default_rng(seed),
    )


def dijkstra_len(passable, start, goal):
    """Unit-weight Dijkstra on a boolean [y, x] grid; independent of the BFS under test."""
    h, w = passable.shape
    if not passable[start[1], start[0]] or not passable[goal[1], goal[0]]:
        return None
    best = {start: 0}
    heap = [(0, start)]
    while heap:
        d, (x, y) = heapq.heappop(heap)
        if (x, y) == goal:
            return d
        if d > best.get((x, y), float("inf")):
            continue
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if 0 <= nx < w and 0 <= ny < h and passable[ny, nx] and d + 1 < best.get((nx, ny), float("inf")):
                best[(nx, ny)] = d + 1
                heapq.heappush(heap, (d + 1, (nx, ny)))
    return None


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def open_world():
    rows = ["1........."] + [".........."] * 8 + ["O.......O2"]
    return world_from_rows(rows)


@pytest.fixture
def cell():
    return Cell


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
