import io
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from wienersets.errors import CapacityError, DomainError
from wienersets.paths import (
    GridSpec, IncrementView, crop, from_values, negate, reflect, refine, restrict,
    sample_path, shift,
)


def test_anchor_at_zero():
    p = sample_path(GridSpec(-1, 1, 10), 7)
    assert p.value(0.0) == 0.0
    assert p.grid.size == 2049


def test_deterministic():
    a = sample_path(GridSpec(-1, 1, 10), 7)
    b = sample_path(GridSpec(-1, 1, 10), 7)
    assert np.array_equal(a.values, b.values)
    c = sample_path(GridSpec(-1, 1, 10), 8)
    assert not np.array_equal(a.values, c.values)


def test_grid_guards():
    with pytest.raises(DomainError):
        GridSpec(1, 1, 3)
    with pytest.raises(DomainError):
        GridSpec(0, 0.3, 3)
    with pytest.raises(CapacityError):
        GridSpec(0, 1, 31)
    with pytest.raises(CapacityError):
        GridSpec(0, 1024, 20)


def test_window_not_containing_zero_is_a_slice():
    full = sample_path(GridSpec(-2, 3, 8), 11)
    part = sample_path(GridSpec(1.5, 2.5, 8), 11)
    i = full.index(1.5)
    assert np.array_equal(part.values, full.values[i:i + part.grid.size])
    left = sample_path(GridSpec(-2, -1, 8), 11)
    assert np.array_equal(left.values, full.values[:left.grid.size])


def test_variance_of_b1():
    # B(1) is a single increment on the level-0 grid over [0, 1].
    n = 10_000
    x = np.array([sample_path(GridSpec(0, 1, 0), s).values[-1] for s in range(n)])
    v = x.var(ddof=1)
    band = 3 * math.sqrt(2.0 / n)  # sd of the sample variance of N(0,1) data
    assert abs(v - 1.0) <= band
    assert 0.97 <= v <= 1.03  # frozen value for seeds 0..9999: 1.011


def test_increments_over_disjoint_windows_uncorrelated():
    n = 10_000
    a = np.empty(n)
    b = np.empty(n)
    for s in range(n):
        v = sample_path(GridSpec(-1, 1, 2), s).values
        a[s] = v[-1] - v[4]  # B(1) - B(0)
        b[s] = v[4] - v[0]  # B(0) - B(-1)
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) <= 3 / math.sqrt(n)
    assert abs(np.var(a) - 1) < 0.05 and abs(np.var(b) - 1) < 0.05


def test_refine_preserves_nodes():
    p = sample_path(GridSpec(-1, 1, 6), 3)
    r = refine(p, 3, 99)
    assert r.level == 9
    assert np.array_equal(r.values[::8], p.values)
    assert np.array_equal(restrict(r, 6).values, p.values)


def test_refine_seed_schedule():
    p = sample_path(GridSpec(-0.5, 1, 5), 3)
    once = refine(p, 2, 42)
    twice = refine(refine(p, 1, 42), 1, 42)
    assert np.array_equal(once.values, twice.values)
    other = refine(refine(p, 1, 42), 1, 43)
    assert not np.array_equal(once.values, other.values)


def test_refine_midpoint_variance():
    # 2^17 midpoints after one refinement of a level-17 path
    p = sample_path(GridSpec(0, 1, 17), 5)
    r = refine(p, 1, 6)
    mids = r.values[1::2] - 0.5 * (r.values[:-2:2] + r.values[2::2])
    target = p.step / 4
    n = mids.size
    assert abs(mids.var() / target - 1) <= 3 * math.sqrt(2.0 / n)


def test_shift_identity_and_recentring():
    p = sample_path(GridSpec(-1, 1, 8), 1)
    s0 = shift(p, 0.0)
    assert np.array_equal(s0.values, p.values) and s0.grid == p.grid
    s = shift(p, 0.25)
    assert s.value(0.0) == 0.0
    assert s.value(0.5) == p.value(0.75) - p.value(0.25)


def test_shift_composition_exact():
    p = sample_path(GridSpec(-1, 1, 8), 1)
    a = shift(shift(p, 0.25), 0.5)
    b = shift(p, 0.75)
    assert a.grid == b.grid and np.array_equal(a.values, b.values)
    back = shift(shift(p, 0.375), -0.375)
    assert back.grid == p.grid and np.array_equal(back.values, p.values)


def test_shift_snaps_and_records():
    p = sample_path(GridSpec(-1, 1, 4), 1)
    s = shift(p, 0.1)
    assert ("snap", 0.1) in s.lineage
    assert s.grid.left == -1 - 0.125
    with pytest.raises(DomainError):
        shift(p, 5.0)


def test_reflect_and_negate():
    p = sample_path(GridSpec(-1, 2, 6), 4)
    r = reflect(p)
    assert r.grid.left == -2 and r.grid.right == 1
    assert r.value(0.5) == p.value(-0.5)
    assert np.array_equal(reflect(r).values, p.values)
    n = negate(p)
    assert n.grid == p.grid and n.value(0.0) == 0.0
    assert np.array_equal(negate(n).values, p.values)
    x = reflect(shift(p, 0.25))
    y = shift(reflect(p), -0.25)
    assert x.grid == y.grid and np.array_equal(x.values, y.values)


def test_increment_view():
    p = sample_path(GridSpec(-1, 1, 6), 2)
    v = p.window(0.25, 0.75)
    assert v.increment(0.25, 0.5) == p.value(0.5) - p.value(0.25)
    assert v.values()[0] == 0.0
    assert v.increments().size == 32
    with pytest.raises(DomainError):
        v.increment(0.0, 0.5)
    with pytest.raises(DomainError):
        IncrementView(p, 0.5, 0.25)


def test_crop_and_synthetic():
    p = sample_path(GridSpec(-1, 1, 5), 2)
    c = crop(p, -0.5, 0.5)
    assert c.grid.size == 33 and c.value(0.25) == p.value(0.25)
    g = GridSpec(0, 1, 2)
    s = from_values(g, [0, 1, 2, 3, 4])
    assert s.value(0.75) == 3.0
    with pytest.raises(DomainError):
        from_values(g, [0, 1])


def test_csv_export():
    p = sample_path(GridSpec(0, 1, 3), 0)
    buf = io.StringIO()
    p.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,value"
    assert len(lines) == 2 ** 3 + 2
    t, v = lines[-1].split(",")
    assert float(t) == 1.0 and float(v) == p.values[-1]


@settings(max_examples=40, deadline=None)
@given(st.integers(-64, 0), st.integers(1, 64), st.integers(-64, 0), st.integers(1, 64),
       st.integers(0, 2 ** 63))
def test_overlapping_windows_agree(a1, b1, a2, b2, seed):
    # values are independent of the sampled window
    lv = 5
    p = sample_path(GridSpec(a1 / 32, b1 / 32, lv), seed)
    q = sample_path(GridSpec(a2 / 32, b2 / 32, lv), seed)
    lo, hi = max(a1, a2) / 32, min(b1, b2) / 32
    x = p.values[p.index(lo):p.index(hi) + 1]
    y = q.values[q.index(lo):q.index(hi) + 1]
    assert np.array_equal(x, y)


@settings(max_examples=40, deadline=None)
@given(st.integers(-32, 32), st.integers(-32, 32), st.integers(0, 1000))
def test_shift_group_law(u, v, seed):
    p = sample_path(GridSpec(-4, 4, 3), seed)
    u, v = u / 8, v / 8
    assume(-4 <= u + v <= 4)
    a = shift(shift(p, u), v)
    b = shift(p, u + v)
    assert a.grid == b.grid and np.array_equal(a.values, b.values)
    c = shift(shift(p, u), -u)
    assert np.array_equal(c.values, p.values)
