import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decmarl.config import ConfigurationError
from decmarl.gridworld import Cell, MaskLabel, Observation
from decmarl.mental_state import (
    MentalState,
    Records,
    count_novelty,
    time_novelty,
    time_novelty_curve,
)

E, O, OBJ, AG, U = (MaskLabel.EMPTY, MaskLabel.OBSTACLE, MaskLabel.OBJECT, MaskLabel.AGENT, MaskLabel.UNKNOWN)


def exp_half_oracle(d):
    with mpmath.workdps(40):
        return float(mpmath.exp(mpmath.mpf(d) / 2))


def set_entry(ms, c, mask, d=0.0, visits=None):
    ms.mask[c.y, c.x] = mask
    ms.duration[c.y, c.x] = d
    if visits is not None:
        ms.visits[c.y, c.x] = visits


# -------------------------------------------------------------------- init

@pytest.mark.parametrize("w,h", [(10, 10), (20, 20), (3, 7)])
def test_init_all_unknown(w, h):
    ms = MentalState(w, h, Cell(0, 0))
    assert len(ms) == w * h
    assert ms.mask.shape == (h, w)
    assert np.all(ms.mask == U)
    assert np.all(ms.duration == 0) and np.all(ms.visits == 0)
    assert ms.known_count() == 0


def test_init_rejects_empty_grid():
    with pytest.raises(ConfigurationError):
        MentalState(0, 0, Cell(0, 0))


# ------------------------------------------------------------------ absorb

def test_absorb_marks_only_observed_cells():
    ms = MentalState(10, 10)
    obs = Observation(Cell(0, 0), ((Cell(0, 0), AG), (Cell(1, 0), E), (Cell(0, 1), O), (Cell(1, 1), E)))
    ms.absorb_observation(obs)
    assert ms.known_count() == 4
    assert ms.label(Cell(0, 1)) is O
    assert ms.visits[1, 0] == 1 and ms.visits[5, 5] == 0


def test_reobservation_resets_duration_and_overwrites_label():
    ms = MentalState(4, 4)
    c = Cell(2, 2)
    set_entry(ms, c, E, 0.37, visits=3)
    ms.absorb_observation(Observation(c, ((c, O),)))
    assert ms.entry(c) == (O, 0.0, 4)


# -------------------------------------------------------------------- tick

def test_tick_increments_known_cells_only():
    ms = MentalState(3, 3)
    set_entry(ms, Cell(0, 0), E)
    ms.tick()
    assert ms.duration[0, 0] == pytest.approx(0.01)
    assert ms.duration[1, 1] == 0.0


def test_hundred_ticks_reach_one():
    ms = MentalState(3, 3)
    set_entry(ms, Cell(1, 1), E)
    for _ in range(100):
        ms.tick()
    assert ms.duration[1, 1] == pytest.approx(1.0, abs=1e-12)
    assert np.count_nonzero(ms.duration) == 1


def test_duration_cap():
    ms = MentalState(2, 2, duration_cap=0.05)
    set_entry(ms, Cell(0, 0), E)
    for _ in range(20):
        ms.tick()
    assert ms.duration[0, 0] == pytest.approx(0.05)


# ----------------------------------------------------------------- novelty

def test_time_novelty_values():
    assert time_novelty(0.0) == 1.0
    assert time_novelty(1.0) == pytest.approx(exp_half_oracle(1.0), abs=1e-12)
    assert time_novelty(1.0) == pytest.approx(1.6487212707, abs=1e-9)
    assert time_novelty(0.5) == pytest.approx(1.2840254167, abs=1e-9)
    with pytest.raises(ValueError):
        time_novelty(-0.01)


@given(a=st.floats(0, 50), b=st.floats(0, 50))
def test_time_novelty_monotone(a, b):
    if a <= b:
        assert time_novelty(a) <= time_novelty(b)
    if b - a > 1e-9:
        assert time_novelty(a) < time_novelty(b)


def test_decay_curve_over_100_steps():
    curve = time_novelty_curve(100, 0.01)
    assert curve[0] == (0, 0.0, 1.0)
    assert curve[-1][2] == pytest.approx(math.exp(0.5))
    assert all(b[2] > a[2] for a, b in zip(curve, curve[1:]))


def test_count_novelty():
    assert count_novelty(1) == 1.0
    assert count_novelty(4) == 0.25
    with pytest.raises(ValueError):
        count_novelty(0)


def _mean_novelty_oracle(ms):
    total = 0.0
    for y in range(ms.height):
        for x in range(ms.width):
            if ms.mask[y, x] != U:
                total += math.exp(ms.duration[y, x] / 2)
    return total / (ms.width * ms.height)


def test_mean_novelty_examples():
    ms = MentalState(10, 10)
    assert ms.mean_novelty() == 0.0
    for i in range(10):
        set_entry(ms, Cell(i, 0), E, 0.0)
    assert ms.mean_novelty() == pytest.approx(0.1, abs=1e-15)
    ms = MentalState(10, 10)
    set_entry(ms, Cell(3, 3), O, 1.0)
    assert ms.mean_novelty() == pytest.approx(1.6487212707 / 100, abs=1e-11)
    assert ms.mean_novelty() == pytest.approx(0.01649, abs=5e-6)


def test_mean_novelty_count_mode():
    ms = MentalState(2, 2)
    set_entry(ms, Cell(0, 0), E, visits=1)
    set_entry(ms, Cell(1, 0), E, visits=4)
    set_entry(ms, Cell(0, 1), E, visits=0)  # known only through sharing
    assert ms.mean_novelty("count") == pytest.approx((1 + 0.25) / 4)


@settings(max_examples=100)
@given(seed=st.integers(0, 2**31))
def test_mean_novelty_matches_summation_and_grows_with_knowledge(seed):
    ms = _random_ms(np.random.default_rng(seed), 6, 5)
    assert ms.mean_novelty() == pytest.approx(_mean_novelty_oracle(ms), rel=1e-12)
    unknown = np.argwhere(ms.mask == U)
    if len(unknown):
        y, x = unknown[0]
        before = ms.mean_novelty()
        set_entry(ms, Cell(int(x), int(y)), E, 0.0)
        assert ms.mean_novelty() > before


# ------------------------------------------------------------------- merge

def _random_ms(rng, w=8, h=8):
    ms = MentalState(w, h)
    ms.mask[...] = rng.integers(0, 5, size=(h, w))
    # coarse durations make ties common
    ms.duration[...] = np.where(ms.mask != U, rng.integers(0, 6, size=(h, w)) * 0.05, 0.0)
    ms.visits[...] = np.where(ms.mask != U, rng.integers(1, 4, size=(h, w)), 0)
    return ms


def _merge_oracle(own, sources):
    """Per-cell minimum-duration winner, written as plain dict/loop code."""
    result = {}
    for y in range(own.height):
        for x in range(own.width):
            result[(x, y)] = (int(own.mask[y, x]), float(own.duration[y, x]))
    for src in sources:
        for (c, m, d) in src:
            if m == U:
                continue
            cur_m, cur_d = result[(c.x, c.y)]
            if cur_m == U or d < cur_d:
                result[(c.x, c.y)] = (int(m), d)
    return result


def test_merge_examples():
    c = Cell(1, 1)
    own = MentalState(3, 3)
    set_entry(own, c, O, 0.30)
    own.merge([Records.from_tuples([(c, E, 0.05)])])
    assert own.entry(c)[:2] == (E, 0.05)

    own = MentalState(3, 3)
    own.merge([Records.from_tuples([(c, E, 0.40)])])
    assert own.entry(c)[:2] == (E, 0.40)

    own = MentalState(3, 3)
    set_entry(own, c, E, 0.10)
    assert own.merge([Records.from_tuples([(c, O, 0.10)])]) == 0
    assert own.entry(c)[:2] == (E, 0.10)


def test_merge_multiple_sources_take_overall_minimum():
    c = Cell(0, 0)
    own = MentalState(2, 2)
    own.merge([Records.from_tuples([(c, E, 0.4)]), Records.from_tuples([(c, O, 0.2)]),
               Records.from_tuples([(c, AG, 0.3)])])
    assert own.entry(c)[:2] == (O, 0.2)


def test_merge_matches_oracle_on_500_random_pairs():
    rng = np.random.default_rng(77)
    for _ in range(500):
        own = _random_ms(rng)
        peers = [_random_ms(rng) for _ in range(int(rng.integers(1, 3)))]
        records = [p.records() for p in peers]
        expected = _merge_oracle(own, records)
        own.merge(records)
        got = {(x, y): (int(own.mask[y, x]), float(own.duration[y, x])) for y in range(8) for x in range(8)}
        assert got == expected


@settings(max_examples=100)
@given(seed=st.integers(0, 2**31))
def test_merge_idempotent_and_never_increases_duration(seed):
    rng = np.random.default_rng(seed)
    own = _random_ms(rng)
    same = own.copy()
    same.merge([own.records()])
    assert same == own
    before = own.copy()
    own.merge([_random_ms(rng).records()])
    known_before = before.mask != U
    assert np.all(own.duration[known_before] <= before.duration[known_before])
    assert own.known_count() >= before.known_count()


# ----------------------------------------------------------------- jaccard

def _jaccard_oracle(ms, records):
    a = {(x, y, int(ms.mask[y, x])) for y in range(ms.height) for x in range(ms.width) if ms.mask[y, x] != U}
    b = {(c.x, c.y, int(m)) for c, m, _ in records if m != U}
    if not a and not b:
        return Fraction(0)
    return Fraction(len(a & b), len(a | b))


def test_jaccard_examples():
    c1, c2, c3 = Cell(0, 0), Cell(1, 0), Cell(2, 0)
    a = MentalState(3, 1)
    set_entry(a, c1, E)
    set_entry(a, c2, O)
    assert a.jaccard(a.records()) == 1.0
    assert a.jaccard(Records.from_tuples([(c3, E, 0.0)])) == 0.0
    b = Records.from_tuples([(c2, O, 0.3), (c3, E, 0.1)])
    assert a.jaccard(b) == pytest.approx(1 / 3, abs=1e-15)
    assert MentalState(3, 1).jaccard(Records.empty()) == 0.0


def test_jaccard_matches_set_arithmetic_on_500_random_sets():
    rng = np.random.default_rng(5)
    for _ in range(500):
        a = _random_ms(rng)
        b = _random_ms(rng).records()
        assert abs(a.jaccard(b) - float(_jaccard_oracle(a, b))) <= 1e-12


@settings(max_examples=100)
@given(seed=st.integers(0, 2**31))
def test_jaccard_bounds_and_self_similarity(seed):
    rng = np.random.default_rng(seed)
    a = _random_ms(rng, 5, 5)
    j = a.jaccard(_random_ms(rng, 5, 5).records())
    assert 0.0 <= j <= 1.0
    if a.known_count():
        assert a.jaccard(a.records()) == 1.0


# --------------------------------------------------------------- snapshots

def test_text_snapshot_roundtrip():
    ms = _random_ms(np.random.default_rng(3), 4, 3)
    text = ms.to_text()
    assert text.splitlines()[0] == "4 3"
    assert len(text.splitlines()) == 1 + ms.known_count()
    back = MentalState.from_text(text)
    assert np.array_equal(back.mask, ms.mask)
    assert np.array_equal(back.duration, ms.duration)


def test_records_iterate_as_tuples():
    recs = Records.from_tuples([(Cell(1, 2), O, 0.25)])
    assert list(recs) == [(Cell(1, 2), O, 0.25)]
    with pytest.raises(ValueError):
        recs.durations[0] = 1.0
