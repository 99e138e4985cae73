"""Seedable 2D grid with static and toggling obstacles, partial views and BFS."""

from __future__ import annotations

import copy
import enum
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .config import ConfigurationError


class Cell(NamedTuple):
    x: int
    y: int


class MaskLabel(enum.IntEnum):
    EMPTY = 0
    OBSTACLE = 1
    OBJECT = 2
    AGENT = 3
    UNKNOWN = 4


class Action(enum.IntEnum):
    LEFT = 0
    RIGHT = 1
    UP = 2
    DOWN = 3
    STAY = 4


# y grows downward: Up decrements the row index
ACTION_DELTAS = {
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
    Action.STAY: (0, 0),
}
_NEIGHBOURS = ((-1, 0), (1, 0), (0, -1), (0, 1))


class MoveKind(enum.Enum):
    MOVED = "moved"
    STAY = "stay"
    BLOCKED = "blocked"


class MoveOutcome(NamedTuple):
    kind: MoveKind
    cell: Cell


@dataclass(frozen=True)
class Observation:
    center: Cell
    records: tuple[tuple[Cell, MaskLabel], ...]

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class Layout:
    width: int
    height: int
    static_obstacles: frozenset[Cell]
    dynamic_sites: tuple[Cell, ...]
    objects: tuple[Cell, ...]  # row-major order: G1, G2, G3
    agent_starts: tuple[Cell, ...]  # agent 1, 2, ...


def parse_layout(text: str) -> Layout:
    """Parse the plain-text layout format.

    The first non-empty line is ``width height``; then one row per line,
    top row first: ``.`` empty, ``#`` static obstacle, ``~`` dynamic
    obstacle site, ``O`` object, ``1``..``9`` agent start.
    """
    lines = [ln.rstrip("\n") for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ConfigurationError("empty layout")
    try:
        width, height = (int(v) for v in lines[0].split())
    except ValueError as exc:
        raise ConfigurationError(f"bad layout header {lines[0]!r}") from exc
    rows = lines[1:]
    if width < 1 or height < 1 or len(rows) != height:
        raise ConfigurationError(f"layout declares {width}x{height} but has {len(rows)} rows")
    static, dynamic, objects = set(), [], []
    starts: dict[int, Cell] = {}
    for y, row in enumerate(rows):
        if len(row) != width:
            raise ConfigurationError(f"row {y} has {len(row)} cells, expected {width}")
        for x, ch in enumerate(row):
            c = Cell(x, y)
            if ch == "#":
                static.add(c)
            elif ch == "~":
                dynamic.append(c)
            elif ch == "O":
                objects.append(c)
            elif ch.isdigit() and ch != "0":
                if int(ch) in starts:
                    raise ConfigurationError(f"agent {ch} placed twice")
                starts[int(ch)] = c
            elif ch != ".":
                raise ConfigurationError(f"unknown layout character {ch!r} at {c}")
    ids = sorted(starts)
    if ids != list(range(1, len(ids) + 1)):
        raise ConfigurationError(f"agent ids must be 1..n without gaps, got {ids}")
    return Layout(
        width,
        height,
        frozenset(static),
        tuple(dynamic),
        tuple(objects),
        tuple(starts[i] for i in ids),
    )


def load_layout(name_or_path: str | Path) -> Layout:
    """Load a bundled layout (``base``/``large``) or a layout file path."""
    name = str(name_or_path)
    if name in ("base", "large"):
        text = resources.files("decmarl").joinpath("layouts", f"{name}.txt").read_text()
    else:
        try:
            text = Path(name).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read layout {name}: {exc}") from exc
    return parse_layout(text)


def scenario_goals(objects: tuple[Cell, ...], scenario: int, n_agents: int) -> list[Cell]:
    """Scenario 1: everybody heads to G3. Scenario 2: agents 1-2 to G1, the rest to G2."""
    if len(objects) != 3:
        raise ConfigurationError(f"layout needs exactly 3 objects, found {len(objects)}")
    g1, g2, g3 = objects
    if scenario == 1:
        return [g3] * n_agents
    if scenario == 2:
        return [g1, g1] + [g2] * (n_agents - 2)
    raise ConfigurationError(f"unknown scenario {scenario}")


@dataclass
class GridWorld:
    """Ground truth: the only holder of global state."""

    width: int
    height: int
    static_obstacles: frozenset[Cell]
    dynamic_obstacles: dict[Cell, bool]
    objects: frozenset[Cell]
    agent_positions: list[Cell]
    agent_goals: list[Cell]
    start_positions: tuple[Cell, ...]
    hard: bool = False
    p_toggle: float = 0.02
    step_counter: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    _blocked: np.ndarray = field(init=False, repr=False)
    _dist_cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        self._blocked = np.zeros((self.height, self.width), dtype=bool)
        for c in self.static_obstacles:
            self._blocked[c.y, c.x] = True
        for c, active in self.dynamic_obstacles.items():
            if active:
                self._blocked[c.y, c.x] = True
        self._validate()

    def _validate(self) -> None:
        for i, (pos, goal) in enumerate(zip(self.agent_positions, self.agent_goals)):
            if not self.in_bounds(pos):
                raise ConfigurationError(f"agent {i + 1} starts out of bounds at {pos}")
            if pos in self.static_obstacles or pos in self.dynamic_obstacles:
                raise ConfigurationError(f"agent {i + 1} starts on an obstacle at {pos}")
            if goal not in self.objects:
                raise ConfigurationError(f"goal {goal} of agent {i + 1} is not an object")
        if self.objects & self.static_obstacles or self.objects & set(self.dynamic_obstacles):
            raise ConfigurationError("an object overlaps an obstacle")

    @property
    def n_agents(self) -> int:
        return len(self.agent_positions)

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c.x < self.width and 0 <= c.y < self.height

    def is_blocked(self, c: Cell) -> bool:
        return bool(self._blocked[c.y, c.x])

    @property
    def blocked_grid(self) -> np.ndarray:
        """Boolean [height, width] obstacle map (read-only view)."""
        view = self._blocked.view()
        view.flags.writeable = False
        return view

    def obstacle_set(self) -> frozenset[Cell]:
        return self.static_obstacles | {c for c, on in self.dynamic_obstacles.items() if on}

    def at_goal(self, agent: int) -> bool:
        return self.agent_positions[agent] == self.agent_goals[agent]

    def set_dynamic(self, c: Cell, active: bool) -> None:
        if self.dynamic_obstacles[c] != active:
            self.dynamic_obstacles[c] = active
            self._blocked[c.y, c.x] = active
            self._dist_cache.clear()

    def reset_episode(self) -> None:
        """Agents back to their starts, dynamic obstacles off; the RNG stream continues."""
        self.agent_positions = list(self.start_positions)
        for c in self.dynamic_obstacles:
            self.set_dynamic(c, False)
        self.step_counter = 0

    def clone(self) -> GridWorld:
        return copy.deepcopy(self)

    def distance_field(self, goal: Cell) -> np.ndarray:
        """BFS hop counts to ``goal`` for every cell (-1 where unreachable), cached per obstacle state."""
        key = goal
        cached = self._dist_cache.get(key)
        if cached is None:
            cached = bfs_distances(~self._blocked, goal)
            self._dist_cache[key] = cached
        return cached

    def state_key(self) -> tuple:
        """Hashable snapshot of everything that evolves, used for determinism checks."""
        return (
            tuple(sorted((c, on) for c, on in self.dynamic_obstacles.items())),
            tuple(self.agent_positions),
            self.step_counter,
            str(self.rng.bit_generator.state),
        )


def build(config, seed: int, layout: Layout | None = None) -> GridWorld:
    """Instantiate the world named by ``config`` (env_size/difficulty/scenario)."""
    if layout is None:
        layout = load_layout(config.layout_path or config.env_size)
    n_agents = config.n_agents
    if len(layout.agent_starts) < n_agents:
        raise ConfigurationError(f"layout has {len(layout.agent_starts)} agent starts, need {n_agents}")
    starts = layout.agent_starts[:n_agents]
    goals = scenario_goals(layout.objects, config.scenario, n_agents)
    return GridWorld(
        width=layout.width,
        height=layout.height,
        static_obstacles=layout.static_obstacles,
        dynamic_obstacles={c: False for c in layout.dynamic_sites},
        objects=frozenset(layout.objects),
        agent_positions=list(starts),
        agent_goals=goals,
        start_positions=tuple(starts),
        hard=config.difficulty == "hard",
        p_toggle=config.p_toggle,
        rng=np.random.default_rng(np.random.SeedSequence([seed, 0x6172])),
    )


def step_dynamics(world: GridWorld) -> GridWorld:
    """Advance the obstacle process by one tick (mutates and returns ``world``)."""
    if world.hard and world.dynamic_obstacles:
        occupied = set(world.agent_positions) | world.objects
        sites = list(world.dynamic_obstacles)
        # one draw per site every tick, whether or not the toggle is applied
        draws = world.rng.random(len(sites))
        for c, u in zip(sites, draws):
            if u >= world.p_toggle:
                continue
            active = world.dynamic_obstacles[c]
            if not active and c in occupied:
                continue
            world.set_dynamic(c, not active)
    world.step_counter += 1
    return world


def apply_action(world: GridWorld, agent: int, action: Action) -> MoveOutcome:
    pos = world.agent_positions[agent]
    if world.at_goal(agent) or action == Action.STAY:
        return MoveOutcome(MoveKind.STAY, pos)
    dx, dy = ACTION_DELTAS[Action(action)]
    target = Cell(pos.x + dx, pos.y + dy)
    if not world.in_bounds(target) or world.is_blocked(target):
        return MoveOutcome(MoveKind.BLOCKED, pos)
    world.agent_positions[agent] = target
    return MoveOutcome(MoveKind.MOVED, target)


def ground_truth_label(world: GridWorld, c: Cell, agent_cells: set[Cell] | None = None) -> MaskLabel:
    # precedence: obstacle, object, agent, empty
    if world.is_blocked(c):
        return MaskLabel.OBSTACLE
    if c in world.objects:
        return MaskLabel.OBJECT
    if agent_cells is None:
        agent_cells = set(world.agent_positions)
    if c in agent_cells:
        return MaskLabel.AGENT
    return MaskLabel.EMPTY


def observe(world: GridWorld, agent: int, radius: int = 2) -> Observation:
    """Ground-truth labels for every in-bounds cell within Chebyshev ``radius``."""
    if radius < 1:
        raise ValueError("observation radius must be >= 1")
    center = world.agent_positions[agent]
    agent_cells = set(world.agent_positions)
    x0, x1 = max(0, center.x - radius), min(world.width - 1, center.x + radius)
    y0, y1 = max(0, center.y - radius), min(world.height - 1, center.y + radius)
    records = tuple(
        (Cell(x, y), ground_truth_label(world, Cell(x, y), agent_cells))
        for y in range(y0, y1 + 1)
        for x in range(x0, x1 + 1)
    )
    return Observation(center, records)


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a.x - b.x), abs(a.y - b.y))


def contacts_in_range(world: GridWorld, agent: int, radius: int = 2) -> list[int]:
    me = world.agent_positions[agent]
    return [
        j for j, pos in enumerate(world.agent_positions)
        if j != agent and chebyshev(me, pos) <= radius
    ]


def bfs_distances(passable: np.ndarray, source: Cell) -> np.ndarray:
    """4-connected BFS hop counts from ``source`` over ``passable[y, x]``; -1 = unreachable."""
    h, w = passable.shape
    dist = np.full((h, w), -1, dtype=np.int64)
    if not passable[source.y, source.x]:
        return dist
    dist[source.y, source.x] = 0
    queue = deque([(source.x, source.y)])
    while queue:
        x, y = queue.popleft()
        d = dist[y, x] + 1
        for dx, dy in _NEIGHBOURS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and passable[ny, nx] and dist[ny, nx] < 0:
                dist[ny, nx] = d
                queue.append((nx, ny))
    return dist


def bfs_path(passable: np.ndarray, start: Cell, goal: Cell) -> list[Cell] | None:
    """Shortest 4-connected path start..goal (inclusive), or None.

    Neighbours are expanded in a fixed order so the returned path is
    deterministic among equal-length alternatives.
    """
    h, w = passable.shape
    if not (passable[start.y, start.x] and passable[goal.y, goal.x]):
        return None
    parent: dict[tuple[int, int], tuple[int, int] | None] = {(start.x, start.y): None}
    queue = deque([(start.x, start.y)])
    while queue:
        cur = queue.popleft()
        if cur == (goal.x, goal.y):
            path = []
            node: tuple[int, int] | None = cur
            while node is not None:
                path.append(Cell(*node))
                node = parent[node]
            return path[::-1]
        x, y = cur
        for dx, dy in _NEIGHBOURS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and passable[ny, nx] and (nx, ny) not in parent:
                parent[(nx, ny)] = cur
                queue.append((nx, ny))
    return None


def true_shortest_path_len(world: GridWorld, start: Cell, goal: Cell) -> int | None:
    """Hop count over non-obstacle cells of the current map; None when unreachable."""
    d = int(bfs_distances(~world._blocked, goal)[start.y, start.x])
    return None if d < 0 else d
