"""Estimators and hypothesis tests for the simulated sets.

Almost-sure statements (disjointness, avoidance, triviality) are checked
as resolution ladders: a quantity measured at several grid levels on
coupled paths (coarse paths are restrictions of one fine path) must not
increase along the ladder, must end strictly below its first value, and
must end below a stated threshold.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats as sps

from . import bessel
from .errors import DomainError, UsageError
from .indexation import (
    POST_FEATURES,
    PRE_FEATURES,
    HonestIndexer,
    dual,
    sample_split,
)
from .parallel import map_replicates, ordered_sum
from .paths import GridSpec, negate, restrict, sample_path, shift
from .reports import EstimatorReport, TestReport
from .rng import derive_seed, normals, uniforms
from .sets import EnumeratedSet, bessel_set, dyadic_pairs, local_extrema, local_maxima, local_minima

DEFAULT_EPS = tuple(2.0 ** -j for j in range(4, 13))
DEFAULT_LADDER = (12, 14, 16, 18, 20)


# ---------------------------------------------------------------- helpers

def ladder_check(values, final_max: float | None = None, counts=None) -> dict:
    """No increase along the ladder, last < first, last < final_max.

    With ``counts`` (a (trials, hits) pair per level) an increase between
    consecutive levels only counts when it exceeds 3 pooled binomial
    standard errors; fractions built from a handful of events near 0 move
    by single events.  ``stepwise`` reports the plain comparison.
    """
    v = [float(x) for x in values]
    stepwise = all(b <= a for a, b in zip(v, v[1:]))
    if counts is None:
        nonincreasing = stepwise
    else:
        nonincreasing = True
        for (n1, c1), (n2, c2) in zip(counts, counts[1:]):
            if not (n1 and n2):
                continue
            p = (c1 + c2) / (n1 + n2)
            se = math.sqrt(p * (1.0 - p) * (1.0 / n1 + 1.0 / n2))
            if c2 / n2 - c1 / n1 > 3.0 * se:
                nonincreasing = False
    decreased = v[-1] < v[0]
    final_ok = final_max is None or v[-1] < final_max
    return {
        "stepwise": stepwise,
        "nonincreasing": nonincreasing,
        "decreased": decreased,
        "final_ok": final_ok,
        "passed": nonincreasing and decreased and final_ok,
    }


def regression_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of y on x."""
    xm = x - x.mean()
    return float(np.dot(xm, y - y.mean()) / np.dot(xm, xm))


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def builder_from_name(name: str) -> Callable:
    """Set builder ``(path, pairs) -> EnumeratedSet`` by name.

    Names: minima, maxima, extrema, bessel:<d>, empty, third (the
    deterministic non-stationary point p + (q - p)/3 of every window).
    """
    if name == "minima":
        return local_minima
    if name == "maxima":
        return local_maxima
    if name == "extrema":
        return local_extrema
    if name.startswith("bessel:"):
        d = float(name.split(":", 1)[1])
        return lambda path, pairs: bessel_set(path, d, pairs)
    if name == "empty":
        def empty(path, pairs):
            arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
            return EnumeratedSet(np.full(arr.shape[0], np.nan), arr[:, 0].copy(), arr[:, 1].copy(),
                                 (float(arr[:, 0].min()), float(arr[:, 1].max())), path.level)
        return empty
    if name == "third":
        def third(path, pairs):
            arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
            vals = arr[:, 0] + (arr[:, 1] - arr[:, 0]) / 3.0
            return EnumeratedSet(vals, arr[:, 0].copy(), arr[:, 1].copy(),
                                 (float(arr[:, 0].min()), float(arr[:, 1].max())), path.level)
        return third
    raise UsageError(f"unknown set builder {name!r}")


def indexer_from_name(name: str) -> HonestIndexer:
    """min, max, drifted_min:<kappa>, bessel:<d>."""
    if name in ("min", "max"):
        return HonestIndexer(name)
    if name.startswith("drifted_min:"):
        return HonestIndexer("drifted_min", kappa=float(name.split(":", 1)[1]))
    if name.startswith("bessel:"):
        return HonestIndexer("bessel", d=float(name.split(":", 1)[1]))
    raise UsageError(f"unknown indexer {name!r}")


def _nearest_distance(points: np.ndarray, x: float) -> float:
    if points.size == 0:
        return math.inf
    j = np.searchsorted(points, x)
    best = math.inf
    for k in (j - 1, j):
        if 0 <= k < points.size:
            best = min(best, abs(points[k] - x))
    return best


# ------------------------------------------------------------------- slln

def slln_one(d: float, T: float, level: int, eps, seed: int, replicate: int,
             scheme: str = bessel.DEFAULT_SCHEME, floor: float | None = None) -> dict:
    """g and the log-integral slope for one driver path."""
    eps = np.asarray(eps, dtype=float)
    path = sample_path(GridSpec(0.0, T, level), derive_seed(seed, "slln", replicate))
    Z = bessel.solve(path, d, 0.0, scheme)
    zs = np.flatnonzero(Z.values <= Z.zero_threshold)
    g = float(path.time_at(zs[-1]))
    use = eps[g + eps < T]
    if use.size < 4:
        return {"g": g, "slope": math.nan, "used": int(use.size)}
    vals = bessel.log_integral(Z, g, T, use, floor)
    return {"g": g, "slope": regression_slope(np.log(1.0 / use), vals), "used": int(use.size)}


def slln_slope(d: float, T: float = 1.0, level: int = 20, eps=DEFAULT_EPS, N: int = 2000,
               seed: int = 0, threads: int = 1, scheme: str = bessel.DEFAULT_SCHEME,
               floor: float | None = None, band: float = 0.15) -> EstimatorReport:
    """Mean regression slope of I(eps) on log(1/eps); target 1/(2-d).

    Paths with fewer than 4 usable eps (g + eps >= T) are skipped and
    counted.  ``band`` is the relative tolerance used for ``passed``.
    """
    if not 0.0 < d < 2.0:
        raise DomainError("slln needs d in (0, 2)")
    eps = np.asarray(eps, dtype=float)
    if eps.size < 4 or np.any(np.diff(eps) >= 0):
        raise DomainError("eps ladder must be strictly decreasing with >= 4 points")
    rows = map_replicates(lambda i: slln_one(d, T, level, eps, seed, i, scheme, floor), N, threads)
    slopes = np.array([r["slope"] for r in rows])
    ok = np.isfinite(slopes)
    est, se = _mean_se(slopes[ok])
    target = 1.0 / (2.0 - d)
    cfg = {"d": d, "T": T, "level": level, "eps": eps.tolist(), "N": N, "seed": seed,
           "scheme": scheme, "floor": floor, "band": band}
    return EstimatorReport(est, se, int(ok.sum()), target, cfg, {
        "skipped": int((~ok).sum()),
        "relative_error": abs(est - target) / target,
        "passed": bool(abs(est - target) <= band * target),
        "rows": [[i, r["g"], r["slope"], r["used"]] for i, r in enumerate(rows)],
    })


# ----------------------------------------------------------- disjointness

def _family(depth: int, min_depth: int) -> np.ndarray:
    pairs = dyadic_pairs(0.0, 1.0, depth, min_depth)
    if min_depth > 0:
        pairs = np.vstack(([[0.0, 1.0]], pairs))
    return pairs


def coincidence_one(d1, d2, negate_second, levels, depth, min_depth, seed, replicate,
                    label="disjoint", scheme=bessel.DEFAULT_SCHEME):
    """(both interior, coincident) window counts per level for one driver."""
    top = max(levels)
    path = sample_path(GridSpec(0.0, 1.0, top), derive_seed(seed, label, replicate))
    pairs = _family(depth, min_depth)
    out = []
    for L in levels:
        p = restrict(path, L)
        a = bessel_set(p, d1, pairs, scheme).values
        b = bessel_set(negate(p) if negate_second else p, d2, pairs, scheme).values
        both = ~np.isnan(a) & ~np.isnan(b)
        co = both & (np.abs(a - b) <= 2.0 * p.step + 1e-12)
        out.append((int(both.sum()), int(co.sum())))
    return out


@dataclass
class LadderResult:
    levels: list
    fractions: list
    counts: list
    check: dict
    config: dict

    def rows(self) -> list:
        return [[L, f, c[0], c[1]] for L, f, c in zip(self.levels, self.fractions, self.counts)]


def _disjoint(d1, d2, negate_second, levels, N, seed, threads, depth, min_depth, final_max, label):
    levels = sorted(levels)
    reps = map_replicates(
        lambda i: coincidence_one(d1, d2, negate_second, levels, depth, min_depth, seed, i, label),
        N, threads)
    counts = []
    fracs = []
    for k in range(len(levels)):
        both = int(ordered_sum(r[k][0] for r in reps))
        co = int(ordered_sum(r[k][1] for r in reps))
        counts.append((both, co))
        fracs.append(co / both if both else 0.0)
    cfg = {"d1": d1, "d2": d2, "negated": negate_second, "levels": levels, "N": N, "seed": seed,
           "depth": depth, "min_depth": min_depth, "final_max": final_max}
    return LadderResult(levels, fracs, counts, ladder_check(fracs, final_max, counts), cfg)


def disjointness(d1: float, d2: float, levels=DEFAULT_LADDER, N: int = 1000, seed: int = 0,
                 threads: int = 1, depth: int = 9, min_depth: int = 6,
                 final_max: float = 0.05) -> LadderResult:
    """Coincidence of the d1 and d2 last-zero sets on a shared driver.

    For each window of the family (the unit window plus dyadic windows of
    depths min_depth..depth) the two last zeros coincide when both lie
    inside the window and are at most 2 grid steps apart.  The fraction is
    coincidences over windows where both are inside, pooled over drivers.
    """
    for d in (d1, d2):
        if not 0.0 < d < 2.0:
            raise DomainError("disjointness needs d1, d2 in (0, 2)")
    return _disjoint(d1, d2, False, levels, N, seed, threads, depth, min_depth, final_max, "disjoint")


def disjoint_negated(d1: float, d2: float, levels=DEFAULT_LADDER, N: int = 1000, seed: int = 0,
                     threads: int = 1, depth: int = 9, min_depth: int = 6,
                     final_max: float = 0.05) -> LadderResult:
    """As ``disjointness`` but the d2 solution is driven by -B."""
    for d in (d1, d2):
        if not 1.0 <= d < 2.0:
            warnings.warn(f"d = {d} outside [1, 2): the negated disjointness is only known there",
                          stacklevel=2)
    return _disjoint(d1, d2, True, levels, N, seed, threads, depth, min_depth, final_max, "disjoint-neg")


# -------------------------------------------------------------- splitting

def split_batch(ix, lam: float, N: int, seed: int, level: int = 12, pad: float = 0.5,
                stream: str = "split", threads: int = 1) -> list:
    return map_replicates(lambda i: sample_split(ix, lam, seed, i, level, pad, stream), N, threads)


def quantile_bins(x: np.ndarray, k: int) -> np.ndarray:
    """Bin labels from empirical quantiles; tied values share a bin."""
    edges = np.unique(np.quantile(x, np.arange(1, k) / k))
    return np.searchsorted(edges, x, side="right")


def chi2_independence(x, y, k: int = 4):
    """Chi-square independence test on the k x k empirical-quantile table.

    Returns (statistic, p_value, dof) or None when a feature is degenerate
    (fewer than two occupied bins).
    """
    if k < 2:
        raise DomainError("need k >= 2 bins")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    bx, by = quantile_bins(x, k), quantile_bins(y, k)
    table = np.zeros((bx.max() + 1, by.max() + 1))
    np.add.at(table, (bx, by), 1)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if table.shape[0] < 2 or table.shape[1] < 2:
        return None
    stat, p, dof, _ = sps.chi2_contingency(table, correction=False)
    return float(stat), float(p), int(dof)


def _feature_arrays(batch):
    pre = {k: np.array([s.pre[k] for s in batch]) for k in PRE_FEATURES}
    post = {k: np.array([s.post[k] for s in batch]) for k in POST_FEATURES}
    return pre, post


def splitting_independence(ix, lam: float = 1.0, N: int = 10_000, k: int = 4, seed: int = 0,
                           level: int = 12, pad: float = 0.5, threads: int = 1,
                           alpha: float = 0.01, batch=None) -> TestReport:
    """Chi-square tests of every (pre feature, post feature) pair.

    p_value is the smallest raw p-value; ``extra['p_bonferroni']`` is it
    times the number of tested pairs (capped at 1).  ``extra['power_p']``
    is the p-value of the adversarial pair (pre tau, pre tau), which must
    be tiny.
    """
    if k < 2:
        raise DomainError("need k >= 2")
    if N < 100 * k * k:
        raise DomainError(f"need N >= 100 k^2 = {100 * k * k}")
    if batch is None:
        batch = split_batch(ix, lam, N, seed, level, pad, "split", threads)
    pre, post = _feature_arrays(batch)
    pairs = {}
    skipped = []
    for a in PRE_FEATURES:
        for b in POST_FEATURES:
            r = chi2_independence(pre[a], post[b], k)
            if r is None:
                skipped.append(f"{a}|{b}")
            else:
                pairs[f"{a}|{b}"] = r
    if not pairs:
        raise DomainError("all feature pairs are degenerate")
    pmin = min(r[1] for r in pairs.values())
    stat = max(r[0] for r in pairs.values())
    pbon = min(1.0, pmin * len(pairs))
    power = chi2_independence(pre["tau"], pre["tau"], k)
    cfg = {"indexer": repr(ix), "lam": lam, "N": len(batch), "k": k, "seed": seed,
           "level": level, "pad": pad, "alpha": alpha}
    return TestReport(stat, pmin, len(batch), config=cfg, extra={
        "p_bonferroni": pbon,
        "n_pairs": len(pairs),
        "pairs": {key: {"statistic": r[0], "p_value": r[1], "dof": r[2]} for key, r in pairs.items()},
        "skipped": skipped,
        "power_p": power[1],
        "passed": bool(pbon > alpha and power[1] < 1e-6),
    })


def ks_two_sample(a, b) -> tuple[float, float]:
    r = sps.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float), method="auto")
    return float(r.statistic), float(r.pvalue)


def splitting_duality(ix, lam: float = 1.0, N: int = 10_000, seed: int = 0, level: int = 12,
                      pad: float = 0.5, threads: int = 1, alpha: float = 0.01,
                      batch=None) -> TestReport:
    """KS comparison of e - tau_e (ix) with tau-hat_e (dual ix, fresh draws).

    Also compares the post increment B(e) - B(tau_e) with the reflected
    pre-path endpoint -B(tau-hat_e).
    """
    if batch is None:
        batch = split_batch(ix, lam, N, seed, level, pad, "split", threads)
    dbatch = split_batch(dual(ix), lam, N, seed, level, pad, "dual", threads)
    a = np.array([s.e_grid - s.tau for s in batch])
    b = np.array([s.tau for s in dbatch])
    stat, p = ks_two_sample(a, b)
    fa = np.array([s.post["b_post"] for s in batch])
    fb = np.array([-s.pre["b_tau"] for s in dbatch])
    fstat, fp = ks_two_sample(fa, fb)
    cfg = {"indexer": repr(ix), "lam": lam, "N": N, "seed": seed, "level": level, "pad": pad,
           "alpha": alpha}
    return TestReport(stat, p, N, config=cfg, extra={
        "feature_statistic": fstat,
        "feature_p": fp,
        "passed": bool(p > alpha and fp > alpha),
        "rows": [[i, float(x), float(y)] for i, (x, y) in enumerate(zip(a, b))],
    })


def calibration(test: str, reps: int = 200, n: int = 2000, seed: int = 0, alpha: float = 0.05,
                k: int = 4) -> dict:
    """Rejection rate of a test fed synthetic data that satisfy its null.

    ``test`` is 'chi2' (independent Gaussian pairs) or 'ks' (two samples
    of one Gaussian law).  The rate must lie within 3 sigma of alpha.
    """
    rejections = 0
    for r in range(reps):
        z = normals(seed, ("calibration", test), 2 * n * r, 2 * n)
        x, y = z[:n], z[n:]
        if test == "chi2":
            p = chi2_independence(x, y, k)[1]
        elif test == "ks":
            p = ks_two_sample(x, y)[1]
        else:
            raise UsageError(f"unknown test {test!r}")
        rejections += p < alpha
    rate = rejections / reps
    sigma = math.sqrt(alpha * (1 - alpha) / reps)
    return {"test": test, "reps": reps, "rate": rate, "sigma": sigma,
            "passed": abs(rate - alpha) <= 3 * sigma}


# ------------------------------------------------------------- triviality

def triviality_one(ix, builder, lam, level, depth, seed, replicate):
    """Distance from tau_{0,e} to the nearest point of the other set."""
    u = float(uniforms(seed, ("triviality:exp",), replicate, 1)[0])
    h = 2.0 ** -level
    eg = math.floor(-math.log(u) / lam / h) * h
    if eg < 2 * h:
        return {"e": eg, "tau": math.nan, "dist": math.nan}
    path = sample_path(GridSpec(0.0, eg, level), derive_seed(seed, "triviality:path", replicate))
    tau = ix.tau(path, 0.0, eg)
    if tau <= 0.0 or tau >= eg:
        return {"e": eg, "tau": tau, "dist": math.nan}
    pairs = np.vstack(([[0.0, eg]], dyadic_pairs(0.0, eg, depth)))
    pts = builder(path, pairs).points()
    return {"e": eg, "tau": tau, "dist": _nearest_distance(pts, tau)}


def membership_triviality(ix, other: str, lam: float = 1.0, N: int = 1000, tols=None,
                          seed: int = 0, level: int = 20, depth: int = 6,
                          threads: int = 1) -> EstimatorReport:
    """P(dist(tau_e, M') <= tol) along a ladder of tolerances.

    M' is built from the window (0, e) and the dyadic windows inside it up
    to ``depth``.  Replicates whose tau_e sits on an endpoint (no interior
    point, possible only on the grid) are skipped and counted.  The
    headline estimate is the value at the smallest tolerance.
    """
    if tols is None:
        tols = [2.0 ** -j for j in range(8, 11)]
    tols = sorted((float(t) for t in tols), reverse=True)
    h = 2.0 ** -level
    if min(tols) < h:
        raise DomainError("tolerances must be at least one grid step")
    builder = builder_from_name(other)
    rows = map_replicates(lambda i: triviality_one(ix, builder, lam, level, depth, seed, i), N, threads)
    dist = np.array([r["dist"] for r in rows])
    ok = ~np.isnan(dist)
    n = int(ok.sum())
    ests = []
    for t in tols:
        hit = (dist[ok] <= t + 1e-12).astype(float)
        m, se = _mean_se(hit)
        ests.append({"tol": t, "estimate": m, "stderr": se, "count": int(hit.sum())})
    ratios = [b["estimate"] / a["estimate"] if a["estimate"] > 0 else 0.0
              for a, b in zip(ests, ests[1:])]
    cfg = {"indexer": repr(ix), "other": other, "lam": lam, "N": N, "tols": tols, "seed": seed,
           "level": level, "depth": depth}
    last = ests[-1]
    return EstimatorReport(last["estimate"], last["stderr"], n, None, cfg, {
        "ladder": ests,
        "ratios": ratios,
        "halves": all(r <= 0.5 for r in ratios),
        "always_one": all(e["estimate"] == 1.0 for e in ests),
        "skipped": int((~ok).sum()),
        "rows": [[i, r["e"], r["tau"], r["dist"]] for i, r in enumerate(rows)],
    })


# ---------------------------------------------------- supermultiplicativity

def supermultiplicativity(ix, other: str, s_values=(0.25, 0.5, 1.0), N: int = 2000, tol=None,
                          seed: int = 0, level: int = 16, depth: int = 8, horizon: float | None = None,
                          threads: int = 1) -> dict:
    """f(t) = P(tau_{0,t} within tol of M'); check f(s+t) >= f(s) f(t) - 3 se.

    The standard error of f(s+t) - f(s) f(t) comes from the delta method
    with the empirical covariance of the three indicators (they share
    paths).
    """
    s_values = sorted(float(s) for s in s_values)
    pairs_st = [(s, t) for i, s in enumerate(s_values) for t in s_values[i:]]
    H = horizon if horizon is not None else max(s + t for s, t in pairs_st)
    pairs_st = [(s, t) for s, t in pairs_st if s + t <= H + 1e-12]
    times = sorted({x for s, t in pairs_st for x in (s, t, s + t)})
    if tol is None:
        tol = 2.0 ** -8
    builder = builder_from_name(other)

    def one(i):
        path = sample_path(GridSpec(0.0, H, level), derive_seed(seed, "supermult", i))
        fam = np.vstack([[[0.0, t] for t in times], dyadic_pairs(0.0, H, depth, unit=H)])
        pts = builder(path, fam).points()
        taus = ix.taus(path, np.zeros(len(times)), np.array(times))
        return [float(_nearest_distance(pts, x) <= tol + 1e-12) for x in taus]

    ind = np.array(map_replicates(one, N, threads))
    col = {t: k for k, t in enumerate(times)}
    f = ind.mean(axis=0)
    cov = np.cov(ind.T, ddof=1) if N > 1 else np.zeros((len(times), len(times)))
    cov = np.atleast_2d(cov)
    table = []
    for s, t in pairs_st:
        a, b, c = col[s], col[t], col[s + t]
        diff = f[c] - f[a] * f[b]
        g = np.zeros(len(times))
        g[c] += 1.0
        g[a] -= f[b]
        g[b] -= f[a]
        se = math.sqrt(max(float(g @ cov @ g), 0.0) / N)
        table.append({"s": s, "t": t, "f_s": f[a], "f_t": f[b], "f_st": f[c],
                      "diff": diff, "stderr": se, "ok": bool(diff >= -3.0 * se - 1e-15)})
    return {"table": table, "f": {str(t): float(f[col[t]]) for t in times},
            "passed": all(r["ok"] for r in table),
            "config": {"indexer": repr(ix), "other": other, "s_values": s_values, "N": N,
                       "tol": tol, "seed": seed, "level": level, "depth": depth, "horizon": H}}


# ------------------------------------------------------ stopping times

def stopping_time(path, stopper: tuple):
    """Grid stopping time or None if it does not occur within the path.

    ('hit_level', a): first node with B >= a; ('first_zero_after', u): first
    node after u where B changes sign (or hits 0).
    """
    kind, arg = stopper
    v = path.values
    if kind == "hit_level":
        i0 = path.index(0.0)
        idx = np.flatnonzero(v[i0:] >= arg)
        return None if idx.size == 0 else float(path.time_at(i0 + idx[0]))
    if kind == "first_zero_after":
        iu = path.index(path.grid.snap(arg))
        seg = v[iu:]
        ch = np.flatnonzero(seg[1:] * seg[:-1] <= 0.0)
        return None if ch.size == 0 else float(path.time_at(iu + 1 + ch[0]))
    raise UsageError(f"unknown stopper {kind!r}")


def parse_stopper(text: str) -> tuple:
    """'hit_level:0.5', 'first_zero_after:0.5' or 'own'."""
    if text == "own":
        return ("own", None)
    kind, _, arg = text.partition(":")
    if kind not in ("hit_level", "first_zero_after") or not arg:
        raise UsageError(f"bad stopper {text!r}")
    return (kind, float(arg))


def stopping_time_avoidance(builder_name: str, stopper, levels=DEFAULT_LADDER, N: int = 1000,
                            seed: int = 0, horizon: float = 2.0, depth: int = 8, threads: int = 1,
                            final_max: float | None = 0.05, min_depth: int = 4) -> LadderResult:
    """Fraction of drivers whose stopping time is within 2 steps of a set point.

    The set is built from the dyadic windows of [0, horizon] (unit = horizon)
    of depths min_depth..depth and the window (0, 1).  The stopper ('own', None) uses the set's own
    entry for (0, 1), which is not a stopping time (negative control).
    Drivers where the stopper does not occur are skipped and counted.
    """
    if isinstance(stopper, str):
        stopper = parse_stopper(stopper)
    levels = sorted(levels)
    builder = builder_from_name(builder_name)
    fam = np.vstack(([[0.0, 1.0]], dyadic_pairs(0.0, horizon, depth, min_depth, unit=horizon)))

    def one(i):
        path = sample_path(GridSpec(0.0, horizon, max(levels)), derive_seed(seed, "stopping", i))
        out = []
        for L in levels:
            p = restrict(path, L)
            es = builder(p, fam)
            if stopper[0] == "own":
                S = None if np.isnan(es.values[0]) else float(es.values[0])
            else:
                S = stopping_time(p, stopper)
            if S is None:
                out.append(None)
                continue
            out.append(_nearest_distance(es.points(), S) <= 2.0 * p.step + 1e-12)
        return out

    reps = map_replicates(one, N, threads)
    counts, fracs = [], []
    for k in range(len(levels)):
        valid = [r[k] for r in reps if r[k] is not None]
        co = int(sum(valid))
        counts.append((len(valid), co))
        fracs.append(co / len(valid) if valid else 0.0)
    cfg = {"builder": builder_name, "stopper": list(stopper), "levels": levels, "N": N,
           "seed": seed, "horizon": horizon, "depth": depth, "min_depth": min_depth,
           "final_max": final_max}
    return LadderResult(levels, fracs, counts, ladder_check(fracs, final_max, counts), cfg)


# --------------------------------------------------------- stabilisation

def shift_stabilisation(builder_name: str, k: int = 0, h_ladder=(0.25, 0.1, 0.01), N: int = 1000,
                        seed: int = 0, level: int = 18, pairs=((0.0, 16.0),), threads: int = 1,
                        final_min: float = 0.95) -> dict:
    """Agreement of entry k of builder(path) with h + entry k of builder(shift(path, h)).

    h values are snapped to the grid.  Agreement means both coffin or
    values within 2 grid steps.
    """
    builder = builder_from_name(builder_name)
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    step = 2.0 ** -level
    hs = [round(h / step) * step for h in h_ladder]
    right = float(pairs[:, 1].max()) + max(hs + [0.0])
    right = math.ceil(right / step) * step
    left = min(float(pairs[:, 0].min()), 0.0)

    def one(i):
        path = sample_path(GridSpec(left, right, level), derive_seed(seed, "stabilise", i))
        base = builder(path, pairs).values[k]
        res = []
        for h in hs:
            other = builder(shift(path, h), pairs).values[k]
            if np.isnan(base) or np.isnan(other):
                res.append(bool(np.isnan(base) and np.isnan(other)))
            else:
                res.append(bool(abs(base - (h + other)) <= 2.0 * step + 1e-12))
        return res

    reps = np.array(map_replicates(one, N, threads), dtype=float)
    agree = reps.mean(axis=0).tolist()
    nondecreasing = all(b >= a for a, b in zip(agree, agree[1:]))
    return {"h": hs, "agreement": agree, "nondecreasing": nondecreasing,
            "final_ok": agree[-1] > final_min, "passed": nondecreasing and agree[-1] > final_min,
            "config": {"builder": builder_name, "k": k, "h_ladder": list(h_ladder), "N": N,
                       "seed": seed, "level": level, "pairs": pairs.tolist()}}
