"""Two-sided Brownian paths on dyadic grids.

A path is sampled from two independent increment streams glued at time 0:
the stream ``+`` carries the increments on [0, inf) and the stream ``-``
the increments of t -> B(-t).  Values are obtained by cumulative sums
outwards from 0, so a node value does not depend on the sampled window.

Internally a path keeps the raw cumulative sums plus a scalar offset and
reports ``raw - offset``.  Shifts only move the offset and the time axis,
which makes the shift group law hold bit-exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import rng
from .errors import CapacityError, DomainError

MAX_LEVEL = 30
MAX_NODES = 1 << 28


@dataclass(frozen=True)
class GridSpec:
    """Dyadic grid ``left + i * 2**-level`` covering [left, right]."""

    left: float
    right: float
    level: int

    def __post_init__(self):
        if not self.left < self.right:
            raise DomainError(f"empty grid [{self.left}, {self.right}]")
        if self.level < 0:
            raise DomainError("grid level must be >= 0")
        if self.level > MAX_LEVEL:
            raise CapacityError(f"grid level {self.level} exceeds {MAX_LEVEL}")
        for end in (self.left, self.right):
            k = end * 2.0 ** self.level
            if k != math.floor(k):
                raise DomainError(f"grid end {end} is not a multiple of 2^-{self.level}")
        if self.size > MAX_NODES:
            raise CapacityError(f"grid with {self.size} nodes exceeds the memory guard")

    @property
    def step(self) -> float:
        return 2.0 ** -self.level

    @property
    def size(self) -> int:
        return int(round((self.right - self.left) * 2.0 ** self.level)) + 1

    @property
    def first(self) -> int:
        """Global index (time * 2**level) of the leftmost node."""
        return int(round(self.left * 2.0 ** self.level))

    def times(self) -> np.ndarray:
        return (self.first + np.arange(self.size)) * self.step

    def time_at(self, idx):
        """Time of array index ``idx`` (int or integer array)."""
        if isinstance(idx, (int, np.integer)):
            return float((self.first + int(idx)) * self.step)
        return (self.first + np.asarray(idx)) * self.step

    def contains(self, t: float) -> bool:
        return self.left <= t <= self.right

    def index(self, t: float) -> int:
        """Array index of the node at time ``t``; raises if ``t`` is off-grid."""
        x = (t - self.left) * 2.0 ** self.level
        i = int(round(x))
        if abs(x - i) > 1e-6 or not 0 <= i < self.size:
            raise DomainError(f"time {t} is not a node of {self}")
        return i

    def snap(self, t: float) -> float:
        return round(t * 2.0 ** self.level) * self.step


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Grid values of a two-sided Brownian path.

    ``lineage`` lists the operations applied since sampling; together with
    ``seed`` and ``grid`` it determines the values.
    """

    grid: GridSpec
    raw: np.ndarray = field(repr=False)
    seed: int
    lineage: tuple = ()
    offset: float = 0.0

    @cached_property
    def values(self) -> np.ndarray:
        v = self.raw - self.offset if self.offset != 0.0 else self.raw.copy()
        v.setflags(write=False)
        return v

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()

    @property
    def step(self) -> float:
        return self.grid.step

    @property
    def level(self) -> int:
        return self.grid.level

    def index(self, t: float) -> int:
        return self.grid.index(t)

    def time_at(self, idx):
        return self.grid.time_at(idx)

    def value(self, t: float) -> float:
        return float(self.values[self.index(t)])

    def window(self, s: float, t: float) -> "IncrementView":
        return IncrementView(self, s, t)

    def to_csv(self, fh) -> None:
        fh.write("t,value\n")
        for t, v in zip(self.times.tolist(), self.values.tolist()):
            fh.write(f"{t:.12g},{v:.17g}\n")


@dataclass(frozen=True)
class IncrementView:
    """Access to ``B_v - B_u`` for u, v in [s, t] only."""

    source: BrownianPath
    s: float
    t: float

    def __post_init__(self):
        if not self.s < self.t:
            raise DomainError("increment window needs s < t")
        self.source.index(self.s)
        self.source.index(self.t)

    def increment(self, u: float, v: float) -> float:
        if not (self.s <= u <= self.t and self.s <= v <= self.t):
            raise DomainError(f"({u}, {v}) outside the window [{self.s}, {self.t}]")
        vals = self.source.values
        return float(vals[self.source.index(v)] - vals[self.source.index(u)])

    def values(self) -> np.ndarray:
        """Path on [s, t] recentred at s."""
        i, j = self.source.index(self.s), self.source.index(self.t)
        v = self.source.values[i:j + 1]
        return v - v[0]

    def increments(self) -> np.ndarray:
        i, j = self.source.index(self.s), self.source.index(self.t)
        return np.diff(self.source.values[i:j + 1])


def _cumulative(first: int, incs: np.ndarray) -> np.ndarray:
    """Node values from increments over [k, k+1], k = first, first+1, ...

    The window must contain time 0 (``first <= 0 <= first + len(incs)``).
    """
    n = incs.size + 1
    out = np.empty(n)
    z = -first
    out[z] = 0.0
    np.cumsum(incs[z:], out=out[z + 1:])
    if z > 0:
        np.cumsum(-incs[:z][::-1], out=out[:z][::-1])
    return out


def sample_path(grid: GridSpec, seed: int) -> BrownianPath:
    """Sample B on ``grid`` with B(0) = 0.

    The increment over [k h, (k+1) h] is ``sqrt(h) * N_k`` where ``N_k`` is
    entry ``k`` of the counter-based stream keyed by (seed, level); negative
    ``k`` use a disjoint stream.  Windows not containing 0 are cut out of
    the path sampled from 0.
    """
    lo = min(grid.first, 0)
    hi = max(grid.first + grid.size - 1, 0)
    if hi - lo + 1 > MAX_NODES:
        raise CapacityError("window too far from 0 for the memory guard")
    incs = rng.signed_normals(seed, ("inc", grid.level), lo, hi) * math.sqrt(grid.step)
    full = _cumulative(lo, incs)
    a = grid.first - lo
    raw = full[a:a + grid.size].copy() if (a or full.size != grid.size) else full
    raw.setflags(write=False)
    return BrownianPath(grid, raw, int(seed))


def refine(path: BrownianPath, extra_levels: int, seed: int) -> BrownianPath:
    """Brownian bridge midpoint refinement by ``extra_levels`` levels.

    The midpoint at global index ``k`` of level ``L`` gets the neighbour mean
    plus ``sqrt(h/4) * N`` with h the coarse step and ``N`` entry ``k`` of
    the stream (seed, 'refine', L).  Hence refining by 1 twice with the same
    seed equals refining by 2 once.
    """
    if extra_levels < 1:
        raise DomainError("extra_levels must be >= 1")
    g = path.grid
    new = GridSpec(g.left, g.right, g.level + extra_levels)  # capacity check
    raw = path.raw
    level = g.level
    for _ in range(extra_levels):
        h = 2.0 ** -level
        level += 1
        first = int(round(g.left * 2.0 ** level))
        # midpoints sit at odd offsets from the first node
        ks = first + 1 + 2 * np.arange(raw.size - 1)
        noise = rng.signed_normals(seed, ("refine", level), int(ks[0]), int(ks[-1]) + 1)[::2]
        out = np.empty(2 * raw.size - 1)
        out[::2] = raw
        out[1::2] = 0.5 * (raw[:-1] + raw[1:]) + math.sqrt(h / 4.0) * noise
        raw = out
    raw.setflags(write=False)
    return BrownianPath(new, raw, path.seed,
                        path.lineage + (("refine", (extra_levels, int(seed))),), path.offset)


def restrict(path: BrownianPath, level: int) -> BrownianPath:
    """Subsample onto the coarser grid of the given level (exact node values)."""
    g = path.grid
    if level > g.level:
        raise DomainError("restrict can only coarsen")
    if level == g.level:
        return path
    new = GridSpec(g.left, g.right, level)
    stride = 1 << (g.level - level)
    raw = path.raw[::stride]
    return BrownianPath(new, raw, path.seed, path.lineage + (("restrict", level),), path.offset)


def crop(path: BrownianPath, a: float, b: float) -> BrownianPath:
    """The same path on the sub-window [a, b] (values unchanged)."""
    i, j = path.index(a), path.index(b)
    new = GridSpec(path.grid.left + i * path.step, path.grid.left + j * path.step, path.level)
    return BrownianPath(new, path.raw[i:j + 1], path.seed,
                        path.lineage + (("crop", (new.left, new.right)),), path.offset)


def shift(path: BrownianPath, u: float) -> BrownianPath:
    """Levy shift: t -> path(u + t) - path(u), on [left - u, right - u].

    Off-grid ``u`` is snapped to the nearest node and the snap is recorded
    in the lineage.
    """
    g = path.grid
    us = g.snap(u)
    lineage = path.lineage
    if us != u:
        lineage = lineage + (("snap", float(u)),)
    if not g.contains(us):
        raise DomainError(f"shift {u} leaves no overlap with [{g.left}, {g.right}]")
    if us == 0.0 and g.contains(0.0):
        return BrownianPath(g, path.raw, path.seed, lineage + (("shift", 0.0),), path.offset)
    i = g.index(us)
    new = GridSpec(g.left - us, g.right - us, g.level)
    return BrownianPath(new, path.raw, path.seed, lineage + (("shift", us),), float(path.raw[i]))


def reflect(path: BrownianPath) -> BrownianPath:
    """Time reflection t -> path(-t)."""
    g = path.grid
    new = GridSpec(-g.right, -g.left, g.level)
    raw = path.raw[::-1]
    lin = path.lineage
    if lin and lin[-1] == ("reflect", None):
        lin = lin[:-1]
    else:
        lin = lin + (("reflect", None),)
    return BrownianPath(new, raw, path.seed, lin, path.offset)


def negate(path: BrownianPath) -> BrownianPath:
    """Sign change t -> -path(t)."""
    lin = path.lineage
    if lin and lin[-1] == ("negate", None):
        lin = lin[:-1]
    else:
        lin = lin + (("negate", None),)
    raw = -path.raw
    raw.setflags(write=False)
    return BrownianPath(path.grid, raw, path.seed, lin, -path.offset)


def from_values(grid: GridSpec, values, seed: int = 0, label: str = "synthetic") -> BrownianPath:
    """Wrap a deterministic array as a path (for tests and controls)."""
    raw = np.array(values, dtype=float)
    if raw.shape != (grid.size,):
        raise DomainError(f"expected {grid.size} values, got {raw.shape}")
    raw.setflags(write=False)
    return BrownianPath(grid, raw, int(seed), ((label, None),))
