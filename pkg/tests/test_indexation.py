import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wienersets.errors import DomainError, UsageError
from wienersets.indexation import (
    DualIndexer, HonestIndexer, dual, monotone_envelope, nestedness_audit,
    random_nested_items, regularize, sample_split, split_columns,
)
from wienersets.paths import GridSpec, from_values, reflect, sample_path, shift
from wienersets.rng import derive_seed, uniforms
from wienersets.sets import local_minima

MIN = HonestIndexer("min")
KINDS = [
    HonestIndexer("min"),
    HonestIndexer("max"),
    HonestIndexer("drifted_min", kappa=1.0),
    HonestIndexer("bessel", d=0.5),
    HonestIndexer("bessel", d=1.5),
]


def _path(level, seed, left=0.0, right=1.0):
    return sample_path(GridSpec(left, right, level), seed)


def test_construction_errors():
    with pytest.raises(UsageError):
        HonestIndexer("median")
    with pytest.raises(UsageError):
        HonestIndexer("bessel")
    with pytest.raises(DomainError):
        MIN.tau(_path(8, 1), 0.0, 1.0001)


def test_min_matches_local_minima():
    for r in range(20):
        p = _path(12, derive_seed(1, "m", r))
        v = local_minima(p, [(0.0, 1.0)]).values[0]
        t = MIN.tau(p, 0.0, 1.0)
        assert t == v or (math.isnan(v) and t in (0.0, 1.0))


def test_drifted_min_moves_left():
    p = _path(12, 3)
    assert HonestIndexer("drifted_min", kappa=50.0).tau(p, 0.0, 1.0) <= MIN.tau(p, 0.0, 1.0)
    assert HonestIndexer("drifted_min", kappa=0.0).tau(p, 0.0, 1.0) == MIN.tau(p, 0.0, 1.0)


def test_bessel1_matches_min():
    ix = HonestIndexer("bessel", d=1.0)
    n = 1000
    ok = 0
    for r in range(n):
        p = _path(18, derive_seed(2, "b1", r))
        ok += abs(ix.tau(p, 0.0, 1.0) - MIN.tau(p, 0.0, 1.0)) <= p.step
    assert ok / n >= 0.99


@pytest.mark.parametrize("ix", KINDS[:3] + [HonestIndexer("bessel", d=1.0)],
                         ids=lambda i: f"{i.kind}-{i.kappa}-{i.d}")
def test_tau_in_window_and_interior(ix):
    # grid endpoint hits have probability about 2/sqrt(pi n) for n steps
    n = 2000
    interior = 0
    for r in range(n):
        p = _path(16, derive_seed(3, "int", r))
        t = ix.tau(p, 0.0, 1.0)
        assert 0.0 <= t <= 1.0
        interior += 0.0 < t < 1.0
    assert interior / n >= 0.99


@pytest.mark.parametrize("d", [0.5, 1.5])
def test_bessel_endpoint_frequency_shrinks(d):
    # for d != 1 the grid puts g_{0,1} on an endpoint with frequency
    # decaying roughly like h^(1/4); check the decay along the ladder
    ix = HonestIndexer("bessel", d=d)
    n = 400
    freq = []
    for level in (10, 14, 18):
        hits = 0
        for r in range(n):
            t = ix.tau(_path(level, derive_seed(3, "ends", d, r)), 0.0, 1.0)
            assert 0.0 <= t <= 1.0
            hits += t in (0.0, 1.0)
        freq.append(hits / n)
    assert freq[0] > freq[1] > freq[2]


def test_running_matches_pointwise():
    p = _path(10, 4)
    for ix in KINDS:
        q, tau = ix.running(p, 1.0)
        pick = np.array([0, 5, 100, q.size - 1])
        direct = ix.taus(p, np.zeros(pick.size), q[pick])
        assert np.array_equal(tau[pick], direct)


def test_envelope_properties():
    x = np.array([0.1, 0.2, 0.2, 0.5, 0.9])
    assert np.array_equal(monotone_envelope(x), x)
    y = np.array([0.3, 0.1, 0.4, 0.2, 0.5])
    assert monotone_envelope(y).tolist() == [0.1, 0.1, 0.2, 0.2, 0.5]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=60))
def test_envelope_is_monotone_minorant(xs):
    x = np.array(xs)
    e = monotone_envelope(x)
    assert np.all(np.diff(e) >= 0) and np.all(e <= x)
    assert np.array_equal(monotone_envelope(e), e)


@pytest.mark.parametrize("ix", [MIN, HonestIndexer("bessel", d=0.5)], ids=["min", "bessel0.5"])
def test_regularize_diagonal_jumps(ix):
    jumps_ok = 0
    jumps = 0
    for r in range(20):
        p = _path(18, derive_seed(5, "reg", r))
        reg = regularize(ix, p, 1.0)
        assert np.all(np.diff(reg.envelope) >= 0)
        assert np.all(reg.envelope <= reg.t)
        j = reg.jump_indices()
        jumps += j.size
        jumps_ok += np.count_nonzero(reg.envelope[j] >= reg.t[j] - 2 * p.step - 1e-12)
    assert jumps > 0 and jumps_ok / jumps >= 0.99


def test_dual_involution_and_definition():
    p = _path(12, 6, -1, 1)
    for ix in KINDS:
        d = dual(ix)
        assert isinstance(d, DualIndexer) and d.is_dual
        assert dual(d) is ix
        for s, t in [(0.0, 0.5), (-0.75, 0.25)]:
            assert d.tau(p, s, t) == -ix.tau(reflect(p), -t, -s)
    assert dual(MIN).tau(p, 0.0, 0.5) + MIN.tau(reflect(p), -0.5, 0.0) == 0.0


def test_dual_of_min_on_symmetric_tent():
    g = GridSpec(-1, 1, 4)
    t = g.times()
    tent = from_values(g, np.abs(t) - 1.0)
    assert dual(MIN).tau(tent, -1.0, 1.0) == MIN.tau(tent, -1.0, 1.0) == 0.0


def test_nestedness_trivial_and_min_exact():
    p = _path(14, 7)
    same = np.array([[0.0, 1.0, 0.0, 1.0], [0.25, 0.75, 0.25, 0.75]])
    for ix in KINDS:
        assert nestedness_audit(ix, p, same)["violations"] == 0
    items = random_nested_items((0.0, 1.0), 14, 1000, 8)
    for ix in KINDS[:3]:
        assert nestedness_audit(ix, p, items, tol_steps=0)["violations"] == 0
    with pytest.raises(DomainError):
        nestedness_audit(MIN, p, [[0.0, 0.5, 0.25, 0.75]])


def test_nestedness_bessel():
    ix = HonestIndexer("bessel", d=0.5)
    bad = 0
    total = 0
    for r in range(10):
        p = _path(18, derive_seed(9, "nest", r))
        res = nestedness_audit(ix, p, random_nested_items((0.0, 1.0), 18, 100, derive_seed(9, "items", r)))
        bad += res["violations"]
        total += res["n"]
    assert total == 1000 and bad / total < 0.01


def test_stationarity_of_tau():
    p = _path(14, 10, -1, 1)
    h = 0.25
    q = shift(p, h)
    for s, t in [(-0.75, 0.0), (-0.5, 0.5), (0.125, 0.375)]:
        for ix in KINDS[:2]:
            assert ix.tau(q, s, t) + h == ix.tau(p, s + h, t + h)
    ix = HonestIndexer("bessel", d=0.5)
    ok = 0
    n = 200
    for r in range(n):
        p = _path(16, derive_seed(10, "stat", r), -1, 1)
        q = shift(p, h)
        ok += abs(ix.tau(q, -0.5, 0.5) + h - ix.tau(p, -0.25, 0.75)) <= p.step
    assert ok / n >= 0.99


def test_sample_split_basics():
    for r in range(30):
        s = sample_split(MIN, 2.0, 11, replicate=r, level=10)
        u = float(uniforms(11, ("split:exp",), r, 1)[0])
        assert s.u == u and s.e == -math.log(u) / 2.0
        assert 0.0 <= s.tau <= s.e_grid <= s.e
        assert len(s.row()) == len(split_columns())
    with pytest.raises(DomainError):
        sample_split(MIN, 0.0, 1)


def _oracle_fraction(n, level, seed):
    # independent direct simulation: numpy's own generator, plain cumsum
    gen = np.random.default_rng(seed)
    h = 2.0 ** -level
    hits = 0
    for _ in range(n):
        e = gen.exponential(1.0)
        m = max(int(e / h), 1)
        b = np.concatenate(([0.0], np.cumsum(gen.standard_normal(m) * math.sqrt(h))))
        hits += np.argmin(b) * h <= e / 2
    return hits / n


def test_split_fraction_against_oracle():
    n = 10_000
    hits = 0
    for r in range(n):
        s = sample_split(MIN, 1.0, 12, replicate=r, level=10)
        hits += s.tau <= s.e / 2
    p_hat = hits / n
    oracle = _oracle_fraction(4000, 14, 123)
    se = math.sqrt(p_hat * (1 - p_hat) / n + oracle * (1 - oracle) / 4000)
    assert abs(p_hat - oracle) <= 3 * se
    # arcsine symmetry gives exactly 1/2 in the continuum
    assert abs(oracle - 0.5) <= 3 * math.sqrt(0.25 / 4000)
