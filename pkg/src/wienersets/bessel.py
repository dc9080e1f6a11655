"""Squared Bessel paths driven by a shared Brownian path.

The process solves dZ = 2 sqrt(Z) dB + d dt with Z(s0) = 0.  Three
pathwise schemes are available:

``implicit_sqrt`` (default)
    drift-implicit step for X = sqrt(Z), dX = dB + (d-1)/(2X) dt:
    X' = (y + sqrt(y^2 + 2(d-1)h)) / 2 with y = X + dB.  For d < 1 the
    step returns 0 when y <= sqrt(2(1-d)h) (no real root); for d > 1, y is
    floored at 0 so a zero step lands Z exactly on (d-1)h/2.  The map is
    nondecreasing in both y and d, so solutions on a shared driver are
    ordered in d and coalesce exactly at the first common zero step; for
    d = 1 it is the Lindley recursion and reproduces (B - running min)^2.
    For d >= 2 the default threshold admits only exact zeros, so the zero
    set after the start is empty (0 is polar).
``full_truncation_euler``
    Z' = max(Z + d h + 2 sqrt(max(Z, 0)) dB, 0).
``reflected_square``
    Z = (B - running min)^2, exact for d = 1 only.

The case d = 0 is the zero process for every scheme.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DomainError, UsageError
from .paths import BrownianPath

SCHEMES = {
    "implicit_sqrt": K.IMPLICIT,
    "full_truncation_euler": K.EULER,
    "reflected_square": K.REFLECTED,
}
DEFAULT_SCHEME = "implicit_sqrt"
DEFAULT_BETA = 4.0


def _check(d: float, scheme: str) -> int:
    if d < 0:
        raise DomainError(f"dimension must be >= 0, got {d}")
    if scheme not in SCHEMES:
        raise UsageError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}")
    if scheme == "reflected_square" and d != 1.0:
        raise UsageError("reflected_square is exact only for d = 1")
    return SCHEMES[scheme]


def default_theta(d: float, h: float, scheme: str = DEFAULT_SCHEME, beta: float = DEFAULT_BETA) -> float:
    """Zero threshold used when none is given.

    Euler: beta * h.  For the implicit scheme with d < 2 a zero step
    (y <= 0, or y <= sqrt(2(1-d)h) when d < 1) lands Z at or below
    max((d-1)h/2, 0), so the threshold sits just above that value.  For
    d >= 2 the point 0 is polar and the implicit step never produces 0, so
    only exact zeros count (the threshold is 1e-12 h).  The reflected
    scheme hits 0 exactly.
    """
    if scheme == "full_truncation_euler":
        return beta * h
    if d >= 2.0:
        return 1e-12 * h
    c = max(0.5 * (d - 1.0) * h, 0.0)
    return c * (1.0 + 1e-9) + 1e-12 * h


@dataclass(frozen=True, eq=False)
class SquaredBesselPath:
    dim: float
    driver: BrownianPath = field(repr=False)
    start: float
    values: np.ndarray = field(repr=False)
    zero_threshold: float
    scheme: str = DEFAULT_SCHEME

    @property
    def start_index(self) -> int:
        """Driver-grid index of the start node."""
        return self.driver.index(self.start)

    @property
    def times(self) -> np.ndarray:
        i = self.start_index
        return self.driver.time_at(np.arange(i, i + self.values.size))

    @property
    def step(self) -> float:
        return self.driver.step

    def to_csv(self, fh) -> None:
        fh.write("t,z\n")
        for t, z in zip(self.times.tolist(), self.values.tolist()):
            fh.write(f"{t:.12g},{z:.17g}\n")


@dataclass(frozen=True)
class ZeroSet:
    indices: np.ndarray  # driver-grid indices, ascending
    threshold: float
    times: np.ndarray

    def to_csv(self, fh) -> None:
        fh.write("t\n")
        for t in self.times.tolist():
            fh.write(f"{t:.12g}\n")


def solve(driver: BrownianPath, d: float, s0: float = 0.0, scheme: str = DEFAULT_SCHEME,
          theta: float | None = None, end: float | None = None) -> SquaredBesselPath:
    """Solve from Z(s0) = 0 up to ``end`` (default: right end of the driver)."""
    code = _check(d, scheme)
    s = driver.index(s0)
    e = driver.grid.size - 1 if end is None else driver.index(end)
    if e < s:
        raise DomainError("end before start")
    h = driver.step
    if theta is None:
        theta = default_theta(d, h, scheme)
    if d == 0.0:
        z = np.zeros(e - s + 1)
    else:
        z = K.solve(driver.raw, s, e, float(d), h, code)
    z.setflags(write=False)
    return SquaredBesselPath(float(d), driver, float(driver.time_at(s)), z, float(theta), scheme)


def zero_set(Z: SquaredBesselPath, theta: float | None = None) -> ZeroSet:
    """Grid nodes (from the start on) where Z <= theta."""
    if theta is None:
        theta = Z.zero_threshold
    if not theta > 0:
        raise DomainError("zero threshold must be positive")
    idx = np.flatnonzero(Z.values <= theta) + Z.start_index
    return ZeroSet(idx, float(theta), Z.driver.time_at(idx))


def last_zero(Z: SquaredBesselPath, s: float, t: float) -> float:
    """g_{s,t}: last grid time u in [s, t] with Z(u) <= theta, Z restarted at s.

    Returns s when there is no zero after s.  If ``Z`` was not started at
    ``s`` it is re-solved from ``s`` on the same driver and settings.
    """
    drv = Z.driver
    i, j = drv.index(s), drv.index(t)
    if j <= i:
        raise DomainError("last_zero needs s < t")
    if Z.start_index != i or Z.values.size < j - i + 1:
        Z = solve(drv, Z.dim, s, Z.scheme, Z.zero_threshold, t)
    seg = Z.values[: j - i + 1]
    hits = np.flatnonzero(seg <= Z.zero_threshold)
    return float(drv.time_at(i + hits[-1]))


def last_zero_indices(driver: BrownianPath, d: float, starts, ends,
                      scheme: str = DEFAULT_SCHEME, theta: float | None = None) -> np.ndarray:
    """Vectorized g_{s,t} over many windows given as driver-grid indices."""
    code = _check(d, scheme)
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    if d == 0.0:
        return ends.copy()
    if theta is None:
        theta = default_theta(d, driver.step, scheme)
    order = np.lexsort((ends, starts))
    out = np.empty_like(starts)
    out[order] = K.last_zeros(driver.raw, float(d), driver.step, float(theta), code,
                              starts[order], ends[order])
    return out


def last_zeros(driver: BrownianPath, d: float, pairs, scheme: str = DEFAULT_SCHEME,
               theta: float | None = None) -> np.ndarray:
    """g_{s,t} for each (s, t) in ``pairs`` (times)."""
    p, q = _pair_arrays(pairs)
    si = np.array([driver.index(x) for x in p], dtype=np.int64)
    ti = np.array([driver.index(x) for x in q], dtype=np.int64)
    if np.any(ti <= si):
        raise DomainError("every window needs s < t")
    return driver.time_at(last_zero_indices(driver, d, si, ti, scheme, theta))


def _pair_arrays(pairs):
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 2:
        return arr[:, 0], arr[:, 1]
    raise DomainError("pairs must be a sequence of (s, t)")


def log_integral(Z: SquaredBesselPath, g: float, T: float, eps, floor: float | None = None):
    """Trapezoid value of the integral of 1/max(Z, floor) over [g + eps, T].

    ``eps`` may be a scalar or an array; g + eps is rounded up to the
    next grid node.  The default floor is the grid step h (which equals
    theta/4 for the default Euler threshold 4h).
    """
    scalar = np.ndim(eps) == 0
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    h = Z.step
    if floor is None:
        floor = h
    i0 = Z.start_index
    iT = Z.driver.index(T) - i0
    if iT >= Z.values.size:
        raise DomainError("Z is not defined up to T")
    lo = g + eps
    if np.any(lo >= T) or g < Z.start:
        raise DomainError("empty integration range: need start <= g and g + eps < T")
    # first node >= g + eps, in Z coordinates
    ia = np.ceil((lo - Z.start) / h - 1e-9).astype(np.int64)
    cum = K.cumtrap_inverse(np.ascontiguousarray(Z.values[: iT + 1]), h, float(floor))
    out = cum[ia]
    return float(out[0]) if scalar else out
