"""Exact finite model of Brownian paths with random signs on set points.

A sample holds m points S_1 < ... < S_m of a set and signs eta_k = +-1.
A square-integrable functional with the path held fixed is a finite sum
f = sum_K f_K prod_{k in K} eta_k over subsets K of {1..m}; the class
``ChaosVector`` stores the coefficients f_K (1-based indices).

Conditioning on the increments in (s, t) together with the whole path
keeps exactly the f_K whose points all lie in (s, t).  The brute-force
oracle verifies this by enumerating all 2^m sign vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng
from .errors import CapacityError, DomainError, UsageError
from .paths import BrownianPath, shift
from .sets import EnumeratedSet

MAX_M = 20


@dataclass(frozen=True, eq=False)
class DiscreteNoiseSample:
    path: BrownianPath | None = field(repr=False)
    points: np.ndarray
    signs: np.ndarray
    seed: int
    window: tuple

    def __post_init__(self):
        if self.points.size > MAX_M:
            raise CapacityError(f"at most {MAX_M} points (got {self.points.size})")
        if np.any(np.diff(self.points) <= 0):
            raise DomainError("points must be strictly increasing")
        if self.signs.shape != self.points.shape:
            raise DomainError("one sign per point")

    @property
    def m(self) -> int:
        return int(self.points.size)

    def inside(self, s: float, t: float) -> np.ndarray:
        """1-based indices of points in the open window (s, t)."""
        return np.flatnonzero((self.points > s) & (self.points < t)) + 1


class ChaosVector:
    """Coefficients f_K keyed by sorted tuples of 1-based indices."""

    def __init__(self, coeffs: dict | None = None):
        self.coeffs = {}
        for k, v in (coeffs or {}).items():
            key = tuple(sorted(int(i) for i in k))
            if len(set(key)) != len(key) or any(i < 1 for i in key):
                raise DomainError(f"bad index set {k!r}")
            self.coeffs[key] = self.coeffs.get(key, 0.0) + float(v)

    def __repr__(self):
        return f"ChaosVector({self.coeffs!r})"

    def __eq__(self, other):
        return isinstance(other, ChaosVector) and self.max_abs_diff(other) == 0.0

    def max_index(self) -> int:
        return max((max(k) for k in self.coeffs if k), default=0)

    def norm2(self) -> float:
        return float(sum(v * v for v in self.coeffs.values()))

    def orders(self) -> set:
        return {len(k) for k, v in self.coeffs.items() if v != 0.0}

    def get(self, key) -> float:
        return self.coeffs.get(tuple(sorted(key)), 0.0)

    def filter(self, keep: Callable[[tuple], bool]) -> "ChaosVector":
        return ChaosVector({k: v for k, v in self.coeffs.items() if keep(k)})

    def max_abs_diff(self, other: "ChaosVector") -> float:
        keys = set(self.coeffs) | set(other.coeffs)
        return max((abs(self.get(k) - other.get(k)) for k in keys), default=0.0)

    def to_csv(self) -> str:
        lines = ["K,coeff"]
        for k in sorted(self.coeffs, key=lambda x: (len(x), x)):
            lines.append(f"{';'.join(str(i) for i in k)},{self.coeffs[k]!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "ChaosVector":
        rows = [r for r in text.strip().splitlines() if r.strip()]
        if not rows or rows[0].strip() != "K,coeff":
            raise DomainError("expected header 'K,coeff'")
        out = {}
        for r in rows[1:]:
            k, _, v = r.partition(",")
            key = tuple(int(i) for i in k.split(";")) if k else ()
            out[key] = float(v)
        return cls(out)


def attach_signs(s: EnumeratedSet, m: int, seed: int, path: BrownianPath | None = None) -> DiscreteNoiseSample:
    """First m distinct points of the enumeration (sorted) with iid signs."""
    if m > MAX_M:
        raise CapacityError(f"m = {m} exceeds {MAX_M}")
    seen = []
    for v in s.values:
        if not np.isnan(v) and v not in seen:
            seen.append(float(v))
            if len(seen) == m:
                break
    if len(seen) < m:
        raise DomainError(f"set has only {len(seen)} distinct points, need {m}")
    pts = np.array(sorted(seen))
    u = rng.uniforms(seed, ("signs",), 0, m)
    signs = np.where(u < 0.5, 1, -1).astype(np.int8)
    return DiscreteNoiseSample(path, pts, signs, int(seed), tuple(s.window))


def _check_indices(f: ChaosVector, m: int):
    if f.max_index() > m:
        raise DomainError(f"coefficient index {f.max_index()} exceeds m = {m}")


def evaluate(f: ChaosVector, sample: DiscreteNoiseSample, signs=None) -> float:
    """sum_K f_K prod_{k in K} eta_k for the sample's (or the given) signs."""
    _check_indices(f, sample.m)
    eta = sample.signs if signs is None else np.asarray(signs)
    total = 0.0
    for k, v in f.coeffs.items():
        total += v * (float(np.prod(eta[[i - 1 for i in k]])) if k else 1.0)
    return total


def all_signs(m: int) -> np.ndarray:
    """Every sign vector of length m, row c has eta_k = -1 iff bit k-1 of c is set."""
    if m > MAX_M:
        raise CapacityError(f"2^{m} sign vectors exceed the guard (m <= {MAX_M})")
    c = np.arange(1 << m, dtype=np.int64)[:, None]
    bits = (c >> np.arange(m)) & 1
    return (1 - 2 * bits).astype(np.int8)


def evaluate_all(f: ChaosVector, m: int) -> np.ndarray:
    """evaluate(f) on every sign vector, by direct products."""
    _check_indices(f, m)
    eta = all_signs(m).astype(float)
    out = np.zeros(eta.shape[0])
    for k, v in f.coeffs.items():
        out += v * (np.prod(eta[:, [i - 1 for i in k]], axis=1) if k else 1.0)
    return out


def conditional_expectation(f: ChaosVector, sample: DiscreteNoiseSample, w: tuple) -> ChaosVector:
    """Keep f_K iff every point S_k, k in K, lies in the open window w."""
    _check_indices(f, sample.m)
    s, t = w
    pts = sample.points
    return f.filter(lambda k: all(s < pts[i - 1] < t for i in k))


def brute_force_conditional(f: ChaosVector, sample: DiscreteNoiseSample, w: tuple) -> ChaosVector:
    """Oracle for ``conditional_expectation`` by exhaustive enumeration.

    Averages f over all signs of points outside w for each configuration
    of the signs inside w, then recovers coefficients by Fourier inversion
    on {-1, 1}^inside.
    """
    m = sample.m
    if m > MAX_M:
        raise CapacityError(f"brute force limited to m <= {MAX_M}")
    vals = evaluate_all(f, m)
    inside = sample.inside(*w) - 1  # 0-based
    n_in = inside.size
    c = np.arange(1 << m, dtype=np.int64)
    key = np.zeros_like(c)
    for j, pos in enumerate(inside):
        key |= ((c >> pos) & 1) << j
    g = np.bincount(key, weights=vals, minlength=1 << n_in) / float(1 << (m - n_in))
    sig = np.arange(1 << n_in, dtype=np.int64)
    out = {}
    chunk = 256
    for j0 in range(0, 1 << n_in, chunk):
        J = np.arange(j0, min(j0 + chunk, 1 << n_in), dtype=np.int64)
        par = _popcount(J[:, None] & sig[None, :]) & 1
        coef = (1.0 - 2.0 * par) @ g / float(1 << n_in)
        for jj, cc in zip(J.tolist(), coef.tolist()):
            if cc != 0.0:
                key_k = tuple(int(inside[b]) + 1 for b in range(n_in) if (jj >> b) & 1)
                out[key_k] = cc
    return ChaosVector(out)


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    n = np.zeros_like(x)
    while np.any(x):
        n += x & 1
        x >>= 1
    return n


def project_stable(f: ChaosVector) -> ChaosVector:
    """Projection on the path-measurable part: only f_empty survives."""
    return f.filter(lambda k: len(k) == 0)


def _cells(partition, sample):
    cuts = np.asarray(partition, dtype=float)
    if cuts.ndim != 1 or cuts.size < 2 or np.any(np.diff(cuts) <= 0):
        raise DomainError("partition cuts must be strictly increasing (at least 2 cuts)")
    return list(zip(cuts[:-1], cuts[1:]))


def project_superchaos1(f: ChaosVector, sample: DiscreteNoiseSample, partition) -> ChaosVector:
    """sum over cells of E[f | cell] minus (cells - 1) f_empty, without the f_empty term.

    The result keeps f_K for nonempty K contained in a single open cell.
    As the partition refines only |K| = 1 terms survive.
    """
    cells = _cells(partition, sample)
    acc: dict = {}
    for cell in cells:
        for k, v in conditional_expectation(f, sample, cell).coeffs.items():
            acc[k] = acc.get(k, 0.0) + v
    acc.pop((), None)
    return ChaosVector(acc)


def dyadic_partition(window: tuple, n_cells: int) -> np.ndarray:
    a, b = window
    return a + (b - a) * np.arange(n_cells + 1) / n_cells


def refinement_curve(f: ChaosVector, sample: DiscreteNoiseSample, steps: int = 4) -> list:
    """Squared norm of the superchaos-1 projection for 2, 4, ..., 2^steps cells."""
    return [project_superchaos1(f, sample, dyadic_partition(sample.window, 2 ** j)).norm2()
            for j in range(1, steps + 1)]


def spectral_measure(f: ChaosVector, sample: DiscreteNoiseSample, w: tuple,
                     A: Callable[[BrownianPath | None], bool] | None = None) -> tuple[float, float]:
    """mu_f of {S in w, path in A} computed two ways.

    Direct: sum_k |f_k|^2 1{S_k in w} 1_A.  Conditional: the mean over all
    sign vectors of |E[f | w]|^2 times 1_A.
    """
    if any(len(k) != 1 for k, v in f.coeffs.items() if v != 0.0):
        raise UsageError("spectral measure needs f supported on singletons")
    _check_indices(f, sample.m)
    ind = 1.0 if A is None or A(sample.path) else 0.0
    s, t = w
    direct = 0.0
    for (k,), v in f.coeffs.items():
        if s < sample.points[k - 1] < t:
            direct += v * v
    ce = conditional_expectation(f, sample, w)
    vals = evaluate_all(ce, sample.m)
    conditional = float(np.mean(vals * vals))
    return direct * ind, conditional * ind


def noise_shift(sample: DiscreteNoiseSample, h: float) -> DiscreteNoiseSample:
    """Shift the path by h; points move to S_k - h and keep their signs."""
    path = sample.path
    if path is not None:
        h = path.grid.snap(h)
        path = shift(path, h)
    pts = sample.points - h
    win = (sample.window[0] - h, sample.window[1] - h)
    if path is not None and (pts.size and (pts[0] < path.grid.left or pts[-1] > path.grid.right)):
        raise DomainError("points leave the shifted window")
    return DiscreteNoiseSample(path, pts, sample.signs.copy(), sample.seed, win)


# ----------------------------------------------------------- experiments

def random_chaos(gen: np.random.Generator, m: int, n_terms: int = 12, max_order: int = 3,
                 singletons_only: bool = False) -> ChaosVector:
    out = {}
    if singletons_only:
        for k in range(1, m + 1):
            out[(k,)] = gen.standard_normal()
        return ChaosVector(out)
    out[()] = gen.standard_normal()
    for _ in range(n_terms):
        r = int(gen.integers(1, min(max_order, m) + 1))
        key = tuple(sorted(gen.choice(np.arange(1, m + 1), size=r, replace=False).tolist()))
        out[key] = gen.standard_normal()
    return ChaosVector(out)


def random_sample(gen: np.random.Generator, m: int, seed: int, window=(0.0, 1.0)) -> DiscreteNoiseSample:
    a, b = window
    pts = np.sort(a + (b - a) * gen.random(m))
    signs = np.where(gen.random(m) < 0.5, 1, -1).astype(np.int8)
    return DiscreteNoiseSample(None, pts, signs, seed, window)


def random_window(gen: np.random.Generator, window=(0.0, 1.0)) -> tuple:
    a, b = window
    x, y = sorted(a + (b - a) * gen.random(2))
    return (float(x), float(y))


def chaos_check(n: int = 1000, m_max: int = 12, seed: int = 1, tol: float = 1e-12) -> dict:
    """Exactness checks of the finite sign model over random instances."""
    worst_ce = 0.0
    worst_parseval = 0.0
    invariance_ok = True
    rows = []
    for i in range(n):
        gen = np.random.Generator(np.random.Philox(rng.derive_seed(seed, "chaos", i)))
        m = int(gen.integers(1, m_max + 1))
        sample = random_sample(gen, m, seed)
        f = random_chaos(gen, m)
        w = random_window(gen)
        d_ce = conditional_expectation(f, sample, w).max_abs_diff(brute_force_conditional(f, sample, w))
        vals = evaluate_all(f, m)
        d_p = abs(float(np.mean(vals * vals)) - f.norm2())
        worst_ce = max(worst_ce, d_ce)
        worst_parseval = max(worst_parseval, d_p)
        g = random_chaos(gen, m, singletons_only=True)
        pts = sample.points
        cuts = np.concatenate(([0.0], 0.5 * (pts[:-1] + pts[1:]), [1.0]))
        if not project_superchaos1(g, sample, cuts) == g:
            invariance_ok = False
        rows.append([i, m, d_ce, d_p])
    # refinement of a pair term over random placements
    curves = []
    for i in range(n):
        gen = np.random.Generator(np.random.Philox(rng.derive_seed(seed, "refine-curve", i)))
        sample = random_sample(gen, 2, seed)
        curves.append(refinement_curve(ChaosVector({(1, 2): 1.0}), sample, 4))
    curves = np.array(curves)
    mean_curve = curves.mean(axis=0)
    per_instance = bool(np.all(np.diff(curves, axis=1) <= 0))
    strictly = bool(np.all(np.diff(mean_curve) < 0))
    passed = worst_ce <= tol and worst_parseval <= tol and invariance_ok and per_instance and strictly
    return {"n": n, "m_max": m_max, "max_ce_error": worst_ce, "max_parseval_error": worst_parseval,
            "singleton_invariance": invariance_ok, "pair_norm_curve": mean_curve.tolist(),
            "pair_curve_monotone": per_instance, "pair_curve_strict": strictly,
            "passed": bool(passed), "rows": rows}


def spectral_check(n: int = 1000, m_max: int = 10, seed: int = 1, tol: float = 1e-12,
                   level: int = 10) -> dict:
    """Direct vs conditional spectral measure over random instances.

    Each instance samples a path, takes m points of its local minima with
    random signs, a random singleton-supported f, a random window and the
    path event {B(1/2) > 0}.
    """
    from .paths import GridSpec, sample_path
    from .sets import dyadic_pairs, local_minima

    worst = 0.0
    rows = []
    pairs = dyadic_pairs(0.0, 1.0, 6)
    for i in range(n):
        gen = np.random.Generator(np.random.Philox(rng.derive_seed(seed, "spectral", i)))
        m = int(gen.integers(1, m_max + 1))
        path = sample_path(GridSpec(0.0, 1.0, level), rng.derive_seed(seed, "spectral-path", i))
        sample = attach_signs(local_minima(path, pairs), m, rng.derive_seed(seed, "spectral-signs", i), path)
        f = random_chaos(gen, m, singletons_only=True)
        w = random_window(gen)
        a, b = spectral_measure(f, sample, w, lambda p: p.value(0.5) > 0)
        worst = max(worst, abs(a - b))
        rows.append([i, m, a, b])
    return {"n": n, "m_max": m_max, "max_difference": worst, "passed": bool(worst <= tol), "rows": rows}
