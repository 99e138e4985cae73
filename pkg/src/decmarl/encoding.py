"""Frozen categorical embeddings and the pooled mental-state vector."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .gridworld import Action, Cell, MaskLabel
from .mental_state import MentalState

STATE_DIM = 64
GOAL_DIM = 16
OBS_DIM = 64
MASK_DIM = 16
ACTION_DIM = 16
POOLED_DIM = STATE_DIM + MASK_DIM
ACTOR_INPUT_DIM = STATE_DIM + GOAL_DIM + POOLED_DIM
CRITIC_INPUT_DIM = ACTOR_INPUT_DIM + ACTION_DIM


@dataclass(frozen=True)
class EmbeddingTables:
    """Lookup tables; state/goal/obs rows are indexed by ``y * width + x``."""

    width: int
    height: int
    seed: int
    state: np.ndarray   # (cells, 64)
    goal: np.ndarray    # (cells, 16)
    obs: np.ndarray     # (cells, 64), carried but not fed to the networks
    mask: np.ndarray    # (5, 16)
    action: np.ndarray  # (5, 16)
    # concat(e_s, e_m) for every (cell, label): (cells, 5, 80)
    cell_label: np.ndarray

    def index(self, c: Cell) -> int:
        return c.y * self.width + c.x

    def to_csv(self) -> str:
        """Dump every table row as ``table,key,v0,v1,...``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for name in ("state", "goal", "obs"):
            for i, row in enumerate(getattr(self, name)):
                writer.writerow([name, f"{i % self.width}:{i // self.width}", *map(repr, row.tolist())])
        for label in MaskLabel:
            writer.writerow(["mask", label.name, *map(repr, self.mask[label].tolist())])
        for a in Action:
            writer.writerow(["action", a.name, *map(repr, self.action[a].tolist())])
        return buf.getvalue()


def build_tables(seed: int, width: int, height: int) -> EmbeddingTables:
    if width < 1 or height < 1:
        raise ValueError("table dimensions must be positive")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x656D62]))
    n = width * height

    def draw(rows: int, dim: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(rows, dim))

    state = draw(n, STATE_DIM)
    goal = draw(n, GOAL_DIM)
    obs = draw(n, OBS_DIM)
    mask = draw(len(MaskLabel), MASK_DIM)
    action = draw(len(Action), ACTION_DIM)
    cell_label = np.concatenate(
        [np.repeat(state[:, None, :], len(MaskLabel), axis=1),
         np.broadcast_to(mask[None, :, :], (n, len(MaskLabel), MASK_DIM))],
        axis=2,
    )
    for arr in (state, goal, obs, mask, action, cell_label):
        arr.flags.writeable = False
    return EmbeddingTables(width, height, seed, state, goal, obs, mask, action, cell_label)


def pool_mental_state(ms: MentalState, tables: EmbeddingTables, time_aware: bool) -> np.ndarray:
    """Average over cells of concat(e_s, e_m), optionally scaled by exp(d/2)."""
    n = ms.width * ms.height
    labels = ms.mask.reshape(-1).astype(np.intp)
    vecs = tables.cell_label[np.arange(n), labels]
    if time_aware:
        return ms.novelty_grid().reshape(-1) @ vecs / n
    return vecs.mean(axis=0)


def actor_input(s: Cell, g: Cell, ms: MentalState | None, tables: EmbeddingTables,
                time_aware: bool) -> np.ndarray:
    """concat(e_s, e_g, pooled mental state); pooled part is zero when ``ms`` is None."""
    out = np.empty(ACTOR_INPUT_DIM)
    out[:STATE_DIM] = tables.state[tables.index(s)]
    out[STATE_DIM:STATE_DIM + GOAL_DIM] = tables.goal[tables.index(g)]
    if ms is None:
        out[STATE_DIM + GOAL_DIM:] = 0.0
    else:
        out[STATE_DIM + GOAL_DIM:] = pool_mental_state(ms, tables, time_aware)
    return out


def critic_input(s: Cell, g: Cell, ms: MentalState | None, a: Action, tables: EmbeddingTables,
                 time_aware: bool) -> np.ndarray:
    return np.concatenate([actor_input(s, g, ms, tables, time_aware), tables.action[int(a)]])
