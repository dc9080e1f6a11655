"""Random countable sets represented by finite enumerations.

An enumeration assigns to every window (p, q) of a finite family either a
point of (p, q) or the coffin state.  The family is a truncation of the
countable index set; refining the family is the only way to approach the
full set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from . import bessel
from .errors import DomainError
from .paths import BrownianPath, negate, shift


class _Coffin:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "†"

    def __reduce__(self):
        return (_Coffin, ())


COFFIN = _Coffin()


@dataclass(frozen=True, eq=False)
class EnumeratedSet:
    """Entries ``values[i]`` (NaN = coffin) with provenance ``(p[i], q[i])``."""

    values: np.ndarray
    p: np.ndarray
    q: np.ndarray
    window: tuple
    resolution: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.values.shape == self.p.shape == self.q.shape):
            raise DomainError("values and provenance arrays must have equal length")

    def __len__(self):
        return self.values.size

    @property
    def coffin(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def entries(self) -> list:
        return [
            {"value": COFFIN if np.isnan(v) else float(v), "provenance": (float(a), float(b))}
            for v, a, b in zip(self.values, self.p, self.q)
        ]

    def points(self) -> np.ndarray:
        """Effective range: sorted distinct non-coffin values."""
        v = self.values[~self.coffin]
        return np.unique(v)

    def same_as(self, other: "EnumeratedSet") -> bool:
        return (
            np.array_equal(self.values, other.values, equal_nan=True)
            and np.array_equal(self.p, other.p)
            and np.array_equal(self.q, other.q)
        )

    def to_csv(self, fh) -> None:
        fh.write("p,q,value\n")
        for v, a, b in zip(self.values.tolist(), self.p.tolist(), self.q.tolist()):
            val = "" if v != v else f"{v:.12g}"
            fh.write(f"{a:.12g},{b:.12g},{val}\n")


def dyadic_pairs(a: float, b: float, depth: int, min_depth: int = 0, unit: float = 1.0,
                 overlap: bool = False) -> np.ndarray:
    """Dyadic windows ``[k l, (k+1) l]`` inside [a, b], l = unit * 2^-j.

    Depths run from ``min_depth`` to ``depth``.  The windows are absolute
    (they do not move with a), which is what makes shifted builders
    comparable.  ``overlap`` adds the windows ``[k l, (k+2) l]``.
    """
    out = []
    for j in range(min_depth, depth + 1):
        ell = unit * 2.0 ** -j
        k0 = int(np.ceil(a / ell - 1e-9))
        k1 = int(np.floor(b / ell + 1e-9))
        widths = (1, 2) if overlap else (1,)
        for w in widths:
            ks = np.arange(k0, k1 - w + 1)
            if ks.size:
                out.append(np.column_stack((ks * ell, (ks + w) * ell)))
    if not out:
        return np.empty((0, 2))
    return np.concatenate(out)


def _indices(path: BrownianPath, pairs):
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    g = path.grid
    lv = 2.0 ** g.level
    x = (arr - g.left) * lv
    idx = np.rint(x).astype(np.int64)
    if np.any(np.abs(x - idx) > 1e-6) or np.any(idx < 0) or np.any(idx >= g.size):
        raise DomainError("window endpoints must be grid nodes inside the path domain")
    if np.any(idx[:, 1] <= idx[:, 0]):
        raise DomainError("every window needs p < q")
    return arr, idx[:, 0].copy(), idx[:, 1].copy()


def _window(arr):
    if arr.shape[0] == 0:
        return (np.nan, np.nan)
    return (float(arr[:, 0].min()), float(arr[:, 1].max()))


def _from_indices(path, arr, si, ti, hit, margin=0):
    ok = (hit > si + margin) & (hit < ti - margin)
    vals = np.where(ok, path.time_at(hit), np.nan)
    return EnumeratedSet(vals, arr[:, 0].copy(), arr[:, 1].copy(), _window(arr), path.level)


def local_minima(path: BrownianPath, pairs, kappa: float = 0.0) -> EnumeratedSet:
    """Grid argmin over each window; endpoint minima become coffins.

    Ties resolve to the earliest node.  ``kappa`` adds the drift kappa*t.
    """
    arr, si, ti = _indices(path, pairs)
    hit = K.argmins(path.raw, si, ti, float(kappa), path.step, path.grid.first)
    return _from_indices(path, arr, si, ti, hit)


def local_maxima(path: BrownianPath, pairs) -> EnumeratedSet:
    return local_minima(negate(path), pairs)


def local_extrema(path: BrownianPath, pairs) -> EnumeratedSet:
    """Union of minima and maxima enumerations (concatenated)."""
    a = local_minima(path, pairs)
    b = local_maxima(path, pairs)
    return EnumeratedSet(
        np.concatenate((a.values, b.values)),
        np.concatenate((a.p, b.p)),
        np.concatenate((a.q, b.q)),
        a.window,
        a.resolution,
    )


def bessel_set(path: BrownianPath, d: float, pairs, scheme: str = bessel.DEFAULT_SCHEME,
               theta: float | None = None, margin: int | None = None) -> EnumeratedSet:
    """Last zeros g_{p,q} of the d-dimensional solution restarted at p.

    A value is kept only if it lies strictly inside (p, q) by more than
    ``margin`` grid steps; the default margin is 0 for the implicit and
    reflected schemes and 1 for Euler (whose threshold band touches the
    endpoints).
    """
    arr, si, ti = _indices(path, pairs)
    if margin is None:
        margin = 1 if scheme == "full_truncation_euler" else 0
    hit = bessel.last_zero_indices(path, d, si, ti, scheme, theta)
    out = _from_indices(path, arr, si, ti, hit, margin)
    out.meta["d"] = float(d)
    return out


def localize(s: EnumeratedSet, a: float, b: float) -> EnumeratedSet:
    """Values outside the open interval (a, b) become coffins."""
    keep = (s.values > a) & (s.values < b)
    vals = np.where(keep, s.values, np.nan)
    return EnumeratedSet(vals, s.p, s.q, s.window, s.resolution, dict(s.meta))


def shift_set(s: EnumeratedSet, h: float) -> EnumeratedSet:
    """Translate values, provenance and window by h."""
    return EnumeratedSet(s.values + h, s.p + h, s.q + h,
                         (s.window[0] + h, s.window[1] + h), s.resolution, dict(s.meta))


def _unmatched(x: np.ndarray, y: np.ndarray, tol: float) -> int:
    """Number of points of x with no point of y within tol (y sorted)."""
    if x.size == 0:
        return 0
    if y.size == 0:
        return int(x.size)
    j = np.searchsorted(y, x)
    lo = np.abs(x - y[np.clip(j - 1, 0, y.size - 1)])
    hi = np.abs(x - y[np.clip(j, 0, y.size - 1)])
    return int(np.count_nonzero(np.minimum(lo, hi) > tol))


def stationarity_gap(builder: Callable[[BrownianPath], EnumeratedSet], path: BrownianPath,
                     h: float, tol: float) -> float:
    """Mismatch between builder(path) and h + builder(shift(path, h)).

    Only points inside the common window count; the result is the number
    of unmatched points (both directions) over the number of points.
    """
    a = builder(path)
    hs = path.grid.snap(h)
    b = shift_set(builder(shift(path, hs)), hs)
    lo = max(a.window[0], b.window[0])
    hi = min(a.window[1], b.window[1])
    if not lo < hi:
        raise DomainError("the two sets have no common window")
    x = a.points()
    y = b.points()
    x = x[(x > lo) & (x < hi)]
    y = y[(y > lo) & (y < hi)]
    total = x.size + y.size
    if total == 0:
        return 0.0
    return (_unmatched(x, y, tol) + _unmatched(y, x, tol)) / total
