import math
import warnings

import numpy as np
import pytest

from wienersets import stats
from wienersets.errors import DomainError, UsageError
from wienersets.indexation import HonestIndexer
from wienersets.paths import GridSpec, from_values
from wienersets.reports import EstimatorReport, TestReport, format_csv
from wienersets.rng import normals

MIN = HonestIndexer("min")


def test_ladder_check():
    assert stats.ladder_check([0.3, 0.2, 0.2, 0.01], 0.05)["passed"]
    assert not stats.ladder_check([0.3, 0.4, 0.01], 0.05)["passed"]
    assert not stats.ladder_check([0.3, 0.3], None)["passed"]
    assert not stats.ladder_check([0.3, 0.1], 0.05)["passed"]
    # one stray event near 0 is noise, a large rise is not
    noisy = stats.ladder_check([0.02, 0.0, 0.0014, 0.0], 0.05, [(700, 14), (700, 0), (700, 1), (700, 0)])
    assert noisy["passed"] and not noisy["stepwise"]
    rise = stats.ladder_check([0.02, 0.0, 0.05, 0.0], 0.05, [(700, 14), (700, 0), (700, 35), (700, 0)])
    assert not rise["passed"]


def test_regression_slope_exact():
    x = np.array([1.0, 2.0, 3.0, 5.0])
    assert stats.regression_slope(x, 2.5 * x - 1.0) == pytest.approx(2.5, rel=1e-14)


def test_names():
    assert stats.indexer_from_name("drifted_min:2").kappa == 2.0
    assert stats.indexer_from_name("bessel:0.5").d == 0.5
    for bad in ("median", "bessel"):
        with pytest.raises(UsageError):
            stats.indexer_from_name(bad)
    with pytest.raises(UsageError):
        stats.builder_from_name("nothing")
    for name in ("minima", "maxima", "extrema", "bessel:1", "empty", "third"):
        assert callable(stats.builder_from_name(name))


def test_slln_small_and_ordered():
    est = {}
    for d in (0.5, 1.0, 1.5):
        rep = stats.slln_slope(d, level=16, N=150, seed=3)
        assert rep.target == pytest.approx(1 / (2 - d))
        assert rep.n + rep.extra["skipped"] == 150
        est[d] = rep.estimate
    assert est[0.5] < est[1.0] < est[1.5]
    with pytest.raises(DomainError):
        stats.slln_slope(2.0, N=1)
    with pytest.raises(DomainError):
        stats.slln_slope(1.0, eps=(0.1, 0.05, 0.2, 0.01), N=1)
    with pytest.raises(DomainError):
        stats.slln_slope(1.0, eps=(0.1, 0.05, 0.01), N=1)


def test_disjointness_identical_dims():
    res = stats.disjointness(0.7, 0.7, levels=(10, 12), N=20, seed=1)
    assert res.fractions == [1.0, 1.0]
    with pytest.raises(DomainError):
        stats.disjointness(0.5, 2.5, levels=(10,), N=1)


def test_disjointness_near_coalescent_report():
    # report-only: close dimensions coincide often at coarse levels
    res = stats.disjointness(1.0, 1.0001, levels=(10, 12), N=20, seed=1)
    assert res.fractions[0] > 0.5


def test_disjoint_negated_warns_and_differs():
    with pytest.warns(UserWarning):
        stats.disjoint_negated(0.5, 1.0, levels=(10,), N=2, seed=1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = stats.disjoint_negated(1.2, 1.2, levels=(10, 12), N=20, seed=1)
    assert all(f < 1.0 for f in res.fractions)


def test_quantile_bins_and_degenerate():
    x = np.array([0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    b = stats.quantile_bins(x, 4)
    assert len(set(b[:3].tolist())) == 1
    assert stats.chi2_independence(np.ones(100), np.arange(100.0)) is None
    with pytest.raises(DomainError):
        stats.chi2_independence(np.arange(10.0), np.arange(10.0), 1)


def test_chi2_power():
    z = normals(1, ("power",), 0, 10_000)
    r = stats.chi2_independence(z, z, 4)
    assert r[1] < 1e-6 and r[2] == 9


@pytest.mark.parametrize("test", ["chi2", "ks"])
def test_calibration(test):
    res = stats.calibration(test, reps=200, n=2000, seed=5)
    assert res["passed"], res


def test_ks_power():
    # sample A = e - tau_e of the min indexer, compared with A + 0.1
    batch = stats.split_batch(MIN, 1.0, 10_000, seed=2, level=8)
    a = np.array([s.e_grid - s.tau for s in batch])
    assert stats.ks_two_sample(a, a + 0.1)[1] < 1e-6


def test_splitting_small():
    rep = stats.splitting_independence(MIN, 1.0, N=1600, k=4, seed=2, level=10)
    assert rep.extra["n_pairs"] == 16 and rep.extra["power_p"] < 1e-6
    assert 0.0 <= rep.p_value <= rep.extra["p_bonferroni"] <= 1.0
    with pytest.raises(DomainError):
        stats.splitting_independence(MIN, 1.0, N=100, k=4)
    dual = stats.splitting_duality(MIN, 1.0, N=1000, seed=2, level=10)
    assert 0.0 <= dual.p_value <= 1.0 and len(dual.extra["rows"]) == 1000


def test_triviality_control_always_one():
    rep = stats.membership_triviality(MIN, "minima", N=40, seed=3, level=14)
    assert rep.extra["always_one"] and rep.estimate == 1.0
    with pytest.raises(DomainError):
        stats.membership_triviality(MIN, "maxima", N=1, tols=[2.0 ** -16], level=14)


def test_supermultiplicativity_trivial_cases():
    # tau_{0,t} is an entry of the minima set unless the grid argmin sits
    # on an endpoint, which has frequency ~ 1/sqrt(n)
    full = stats.supermultiplicativity(MIN, "minima", N=200, seed=4, level=16, depth=4)
    assert all(v >= 0.97 for v in full["f"].values()) and full["passed"]
    assert all(abs(r["diff"]) <= 3 * r["stderr"] + 0.03 for r in full["table"])
    empty = stats.supermultiplicativity(MIN, "empty", N=30, seed=4, level=12, depth=4)
    assert all(v == 0.0 for v in empty["f"].values()) and empty["passed"]


def test_stopping_time_function():
    g = GridSpec(0, 2, 3)
    p = from_values(g, [0.0, 0.2, 0.6, 0.4, -0.1, 0.3, 0.7, 0.9, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    assert stats.stopping_time(p, ("hit_level", 0.5)) == 0.25
    assert stats.stopping_time(p, ("hit_level", 5.0)) is None
    assert stats.stopping_time(p, ("first_zero_after", 0.25)) == 0.5
    assert stats.parse_stopper("own") == ("own", None)
    assert stats.parse_stopper("hit_level:0.5") == ("hit_level", 0.5)
    with pytest.raises(UsageError):
        stats.parse_stopper("hit_level")
    with pytest.raises(UsageError):
        stats.stopping_time(p, ("later", 1.0))


def test_stopping_own_control():
    res = stats.stopping_time_avoidance("minima", "own", levels=(10, 12), N=30, seed=5)
    assert all(f == 1.0 for f in res.fractions)


def test_shift_stabilisation_controls():
    res = stats.shift_stabilisation("minima", h_ladder=(0.0,), N=10, level=10, pairs=((0.0, 1.0),))
    assert res["agreement"] == [1.0]
    res = stats.shift_stabilisation("third", h_ladder=(0.25, 0.1, 0.01), N=10, level=10)
    assert all(a == 0.0 for a in res["agreement"])


def test_shift_stabilisation_minima_trend():
    res = stats.shift_stabilisation("minima", N=200, level=14, seed=6)
    assert res["nondecreasing"] and res["agreement"][-1] > 0.9


def test_reports_roundtrip():
    e = EstimatorReport(1.0, 0.1, 5, 2.0, {"a": [1, 2]}, {"x": math.nan, "y": math.inf})
    back = EstimatorReport.from_json(e.to_json())
    assert back.estimate == 1.0 and back.config == {"a": [1, 2]}
    assert math.isnan(back.extra["x"]) and back.extra["y"] == math.inf
    assert back.to_json() == e.to_json()
    t = TestReport(3.0, 0.5, 10, {"0.05": False}, {"k": 4}, {"p": 0.1})
    assert TestReport.from_json(t.to_json()).to_dict() == t.to_dict()
    assert '"schema_version": "1.0"' in t.to_json()
    with pytest.raises(ValueError):
        TestReport(1.0, 1.5, 1)
    with pytest.raises(ValueError):
        EstimatorReport(1.0, -1.0, 1)


def test_format_csv():
    out = format_csv(["a", "b", "c", "d"], [[1, 0.1, math.nan, True]])
    assert out == "a,b,c,d\n1,0.10000000000000001,,1\n"
