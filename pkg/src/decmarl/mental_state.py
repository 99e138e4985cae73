"""Per-agent time-decaying knowledge map.

Every cell of the bounded world carries a mask label, the duration since
it was last seen, and a visit count.  Durations grow by a fixed increment
each tick and reset to zero on re-observation, so ``exp(d / 2)`` measures
how stale (and therefore how novel again) a piece of knowledge is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .config import ConfigurationError
from .gridworld import Cell, MaskLabel, Observation

UNKNOWN = int(MaskLabel.UNKNOWN)


def time_novelty(d: float) -> float:
    if d < 0:
        raise ValueError(f"duration must be non-negative, got {d}")
    return math.exp(0.5 * d)


def count_novelty(visit_count: int) -> float:
    if visit_count < 1:
        raise ValueError("count novelty is undefined for an unvisited cell")
    return 1.0 / visit_count


@dataclass(frozen=True)
class Records:
    """Immutable set of (cell, mask, duration) records exchanged between agents."""

    xs: np.ndarray
    ys: np.ndarray
    masks: np.ndarray
    durations: np.ndarray

    @classmethod
    def from_tuples(cls, records: Iterable[tuple[Cell, MaskLabel, float]]) -> Records:
        records = list(records)
        if not records:
            return cls.empty()
        xs, ys, masks, durs = [], [], [], []
        for cell, mask, d in records:
            xs.append(cell[0])
            ys.append(cell[1])
            masks.append(int(mask))
            durs.append(float(d))
        return cls._frozen(xs, ys, masks, durs)

    @classmethod
    def empty(cls) -> Records:
        return cls._frozen([], [], [], [])

    @classmethod
    def _frozen(cls, xs, ys, masks, durs) -> Records:
        arrays = (
            np.asarray(xs, dtype=np.int64),
            np.asarray(ys, dtype=np.int64),
            np.asarray(masks, dtype=np.int8),
            np.asarray(durs, dtype=np.float64),
        )
        for a in arrays:
            a.flags.writeable = False
        return cls(*arrays)

    def __len__(self) -> int:
        return len(self.xs)

    def __iter__(self) -> Iterator[tuple[Cell, MaskLabel, float]]:
        for x, y, m, d in zip(self.xs, self.ys, self.masks, self.durations):
            yield Cell(int(x), int(y)), MaskLabel(int(m)), float(d)

    def known_pairs(self) -> set[tuple[int, int, int]]:
        keep = self.masks != UNKNOWN
        return set(zip(self.xs[keep].tolist(), self.ys[keep].tolist(), self.masks[keep].tolist()))


class MentalState:
    """Total map from cells to (mask, duration, visit_count).

    Arrays are indexed ``[y, x]``.  Operations mutate in place.
    """

    def __init__(self, width: int, height: int, goal: Cell | None = None,
                 time_increment: float = 0.01, duration_cap: float | None = None):
        if width < 1 or height < 1:
            raise ConfigurationError(f"mental state needs positive dimensions, got {width}x{height}")
        self.width = width
        self.height = height
        self.owner_goal = goal
        self.time_increment = time_increment
        self.duration_cap = duration_cap
        self.mask = np.full((height, width), UNKNOWN, dtype=np.int8)
        self.duration = np.zeros((height, width), dtype=np.float64)
        self.visits = np.zeros((height, width), dtype=np.int64)

    def __len__(self) -> int:
        return self.width * self.height

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MentalState):
            return NotImplemented
        return (
            self.mask.shape == other.mask.shape
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.duration, other.duration)
            and np.array_equal(self.visits, other.visits)
        )

    def copy(self) -> MentalState:
        out = MentalState.__new__(MentalState)
        out.__dict__.update(self.__dict__)
        out.mask = self.mask.copy()
        out.duration = self.duration.copy()
        out.visits = self.visits.copy()
        return out

    def reset(self) -> None:
        self.mask.fill(UNKNOWN)
        self.duration.fill(0.0)
        self.visits.fill(0)

    def entry(self, c: Cell) -> tuple[MaskLabel, float, int]:
        return MaskLabel(int(self.mask[c.y, c.x])), float(self.duration[c.y, c.x]), int(self.visits[c.y, c.x])

    def label(self, c: Cell) -> MaskLabel:
        return MaskLabel(int(self.mask[c.y, c.x]))

    def is_known(self, c: Cell) -> bool:
        return self.mask[c.y, c.x] != UNKNOWN

    @property
    def known(self) -> np.ndarray:
        return self.mask != UNKNOWN

    def known_count(self) -> int:
        return int(np.count_nonzero(self.mask != UNKNOWN))

    def absorb_observation(self, obs: Observation) -> None:
        for c, label in obs.records:
            self.mask[c.y, c.x] = label
            self.duration[c.y, c.x] = 0.0
            self.visits[c.y, c.x] += 1

    def tick(self) -> None:
        known = self.mask != UNKNOWN
        self.duration[known] += self.time_increment
        if self.duration_cap is not None:
            np.minimum(self.duration, self.duration_cap, out=self.duration)

    def novelty_grid(self) -> np.ndarray:
        """exp(d/2) on known cells, 1 on Unknown cells (the pooling weights)."""
        return np.where(self.mask != UNKNOWN, np.exp(0.5 * self.duration), 1.0)

    def mean_novelty(self, mode: str = "time") -> float:
        """Average per-cell novelty over the whole map; Unknown cells add 0 to the sum."""
        if mode == "time":
            known = self.mask != UNKNOWN
            total = float(np.exp(0.5 * self.duration[known]).sum())
        elif mode == "count":
            seen = self.visits[self.visits > 0]
            total = float((1.0 / seen).sum())
        else:
            raise ValueError(f"unknown novelty mode {mode!r}")
        return total / self.mask.size

    def records(self, cells: Sequence[Cell] | None = None) -> Records:
        """Snapshot of the known records (all known cells, or just ``cells``)."""
        if cells is None:
            ys, xs = np.nonzero(self.mask != UNKNOWN)
        else:
            xs = np.fromiter((c.x for c in cells), dtype=np.int64, count=len(cells))
            ys = np.fromiter((c.y for c in cells), dtype=np.int64, count=len(cells))
        return Records._frozen(xs, ys, self.mask[ys, xs], self.duration[ys, xs])

    def merge(self, others: Sequence[Records]) -> int:
        """Fold shared records in, freshest wins; returns how many cells changed.

        A shared record replaces the owner's when its duration is strictly
        smaller, or when the owner does not know the cell at all.  Ties keep
        the owner's record; across several sources the overall minimum wins
        (earliest source on equal durations).
        """
        changed = np.zeros(self.mask.shape, dtype=bool)
        for rec in others:
            if len(rec) == 0:
                continue
            keep = rec.masks != UNKNOWN
            xs, ys, ms, ds = rec.xs[keep], rec.ys[keep], rec.masks[keep], rec.durations[keep]
            own_unknown = self.mask[ys, xs] == UNKNOWN
            take = own_unknown | (ds < self.duration[ys, xs])
            if not take.any():
                continue
            tx, ty = xs[take], ys[take]
            self.mask[ty, tx] = ms[take]
            self.duration[ty, tx] = ds[take]
            changed[ty, tx] = True
        return int(np.count_nonzero(changed))

    def jaccard(self, other: Records) -> float:
        """Overlap of known (cell, mask) pairs between this map and ``other``."""
        w = self.width
        ys, xs = np.nonzero(self.mask != UNKNOWN)
        mine = (ys * w + xs) * 8 + self.mask[ys, xs]
        keep = other.masks != UNKNOWN
        theirs = np.unique((other.ys[keep] * w + other.xs[keep]) * 8 + other.masks[keep])
        union = np.union1d(mine, theirs).size
        if union == 0:
            return 0.0
        return np.intersect1d(mine, theirs, assume_unique=True).size / union

    def to_text(self) -> str:
        """One line per known cell: ``x y MASK duration``."""
        lines = [f"{self.width} {self.height}"]
        ys, xs = np.nonzero(self.mask != UNKNOWN)
        for x, y in zip(xs.tolist(), ys.tolist()):
            lines.append(f"{x} {y} {MaskLabel(int(self.mask[y, x])).name} {float(self.duration[y, x])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **kwargs) -> MentalState:
        lines = text.strip().splitlines()
        w, h = (int(v) for v in lines[0].split())
        ms = cls(w, h, **kwargs)
        for ln in lines[1:]:
            x, y, name, d = ln.split()
            ms.mask[int(y), int(x)] = MaskLabel[name]
            ms.duration[int(y), int(x)] = float(d)
        return ms


def time_novelty_curve(steps: int = 100, increment: float = 0.01) -> list[tuple[int, float, float]]:
    """(step, duration, novelty) for a cell that is never refreshed."""
    out = []
    for t in range(steps + 1):
        d = t * increment
        out.append((t, d, time_novelty(d)))
    return out
