"""Honest indexations tau_{s,t}: evaluation, regularization, duality,
nestedness audits and exponential-time splitting samples."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from . import bessel, rng
from .errors import DomainError, UsageError
from .paths import BrownianPath, GridSpec, reflect, sample_path

KINDS = ("min", "max", "drifted_min", "bessel")


@dataclass(frozen=True)
class HonestIndexer:
    """tau_{s,t} for one of the built-in families.

    ``min``/``max``: grid argmin/argmax of B on [s, t] (earliest node);
    ``drifted_min``: argmin of B_u + kappa*u; ``bessel``: last zero g_{s,t}
    of the d-dimensional squared Bessel solution restarted at s.
    """

    kind: str = "min"
    kappa: float = 0.0
    d: float | None = None
    scheme: str = bessel.DEFAULT_SCHEME
    theta: float | None = None
    beta: float = bessel.DEFAULT_BETA

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown indexer kind {self.kind!r}")
        if self.kind == "bessel" and self.d is None:
            raise UsageError("bessel indexer needs a dimension d")

    @property
    def is_dual(self) -> bool:
        return False

    def tau_indices(self, path: BrownianPath, si, ti) -> np.ndarray:
        si = np.asarray(si, dtype=np.int64)
        ti = np.asarray(ti, dtype=np.int64)
        if self.kind == "bessel":
            theta = self.theta
            if theta is None and self.scheme == "full_truncation_euler":
                theta = self.beta * path.step
            return bessel.last_zero_indices(path, self.d, si, ti, self.scheme, theta)
        raw = -path.raw if self.kind == "max" else path.raw
        kappa = self.kappa if self.kind == "drifted_min" else 0.0
        return K.argmins(np.ascontiguousarray(raw), si, ti, float(kappa), path.step,
                         path.grid.first)

    def taus(self, path: BrownianPath, s, t) -> np.ndarray:
        si, ti = _node_indices(path, s, t)
        return path.time_at(self.tau_indices(path, si, ti))

    def tau(self, path: BrownianPath, s: float, t: float) -> float:
        return float(self.taus(path, [s], [t])[0])

    def running(self, path: BrownianPath, T: float) -> tuple[np.ndarray, np.ndarray]:
        """(q, tau_{0,q}) for every grid node q in (0, T]."""
        i0, iT = path.index(0.0), path.index(T)
        if iT <= i0:
            raise DomainError("horizon must be positive")
        idx = np.arange(i0, iT + 1)
        if self.kind == "bessel":
            theta = self.theta
            if theta is None and self.scheme == "full_truncation_euler":
                theta = self.beta * path.step
            Z = bessel.solve(path, self.d, 0.0, self.scheme, theta, T)
            hit = np.where(Z.values <= Z.zero_threshold, idx, i0)
            arg = np.maximum.accumulate(hit)
        else:
            v = path.raw[i0:iT + 1]
            if self.kind == "max":
                v = -v
            if self.kind == "drifted_min":
                v = v + self.kappa * path.time_at(np.arange(i0, iT + 1))
            runmin = np.minimum.accumulate(v)
            new = np.ones(v.size, dtype=bool)
            new[1:] = v[1:] < runmin[:-1]
            arg = np.maximum.accumulate(np.where(new, idx, i0))
        return path.time_at(idx[1:]), path.time_at(arg[1:])


@dataclass(frozen=True)
class DualIndexer:
    """tau-hat_{s,t} = -tau_{-t,-s} evaluated on the time-reflected path."""

    base: HonestIndexer

    @property
    def is_dual(self) -> bool:
        return True

    def taus(self, path: BrownianPath, s, t) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return -self.base.taus(reflect(path), -t, -s)

    def tau(self, path: BrownianPath, s: float, t: float) -> float:
        return float(self.taus(path, [s], [t])[0])

    def running(self, path: BrownianPath, T: float):
        q = path.time_at(np.arange(path.index(0.0) + 1, path.index(T) + 1))
        return q, self.taus(path, np.zeros_like(q), q)


def dual(ix):
    """Dual indexation; dual(dual(ix)) is ix itself."""
    if isinstance(ix, DualIndexer):
        return ix.base
    return DualIndexer(ix)


def _node_indices(path, s, t):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    g = path.grid
    lv = 2.0 ** g.level
    xs, xt = (s - g.left) * lv, (t - g.left) * lv
    si, ti = np.rint(xs).astype(np.int64), np.rint(xt).astype(np.int64)
    bad = (np.abs(xs - si) > 1e-6) | (np.abs(xt - ti) > 1e-6) | (si < 0) | (ti >= g.size)
    if np.any(bad):
        raise DomainError("window endpoints must be grid nodes inside the path domain")
    if np.any(ti < si):
        raise DomainError("windows need s <= t")
    return si, ti


@dataclass(frozen=True)
class Regularized:
    """Monotone envelope of q -> tau_{0,q} on the grid nodes of (0, T]."""

    t: np.ndarray
    raw: np.ndarray
    envelope: np.ndarray
    step: float

    def jump_indices(self) -> np.ndarray:
        return np.flatnonzero(np.diff(self.envelope) > 0) + 1

    def diagonal_jump_fraction(self, slack_steps: float = 2.0) -> float:
        """Share of jumps that land within ``slack_steps`` steps of the diagonal."""
        j = self.jump_indices()
        if j.size == 0:
            return 1.0
        ok = self.envelope[j] >= self.t[j] - slack_steps * self.step - 1e-12
        return float(np.mean(ok))


def monotone_envelope(values: np.ndarray) -> np.ndarray:
    """out[i] = min(values[i:]): the largest nondecreasing minorant."""
    return np.minimum.accumulate(np.asarray(values)[::-1])[::-1]


def regularize(ix, path: BrownianPath, T: float) -> Regularized:
    """tau-tilde(t) = min over grid nodes q >= t of tau_{0,q}.

    On a grid the infimum over q > t of the continuum statement becomes a
    minimum over q >= t, which keeps the envelope below the diagonal.
    """
    q, tau = ix.running(path, T)
    return Regularized(q, tau, monotone_envelope(tau), path.step)


def nestedness_audit(ix, path: BrownianPath, items, tol_steps: float = 2.0) -> dict:
    """Violations of tau_{s,t} = tau_{u,v} on {tau_{s,t} in (u, v)}.

    ``items`` is an array of rows (s, t, u, v) with (u, v) inside (s, t).
    """
    arr = np.asarray(items, dtype=float).reshape(-1, 4)
    if np.any(arr[:, 2] < arr[:, 0]) or np.any(arr[:, 3] > arr[:, 1]) or np.any(arr[:, 2] >= arr[:, 3]):
        raise DomainError("each item needs s <= u < v <= t")
    outer = ix.taus(path, arr[:, 0], arr[:, 1])
    inner = ix.taus(path, arr[:, 2], arr[:, 3])
    inside = (outer > arr[:, 2]) & (outer < arr[:, 3])
    bad = inside & (np.abs(outer - inner) > tol_steps * path.step + 1e-12)
    n = arr.shape[0]
    return {
        "n": n,
        "applicable": int(inside.sum()),
        "violations": int(bad.sum()),
        "fraction": float(bad.sum()) / n if n else 0.0,
    }


def random_nested_items(path_window: tuple, level: int, n: int, seed: int) -> np.ndarray:
    """Random nested windows (s, t, u, v) on the grid of ``level``."""
    a, b = path_window
    lv = 2 ** level
    ka, kb = int(round(a * lv)), int(round(b * lv))
    u = rng.uniforms(seed, ("nested",), 0, 4 * n).reshape(n, 4)
    out = np.empty((n, 4))
    for i in range(n):
        s, t = sorted((ka + int(u[i, 0] * (kb - ka + 1)), ka + int(u[i, 1] * (kb - ka + 1))))
        if t - s < 2:
            s, t = ka, kb
        x, y = sorted((s + int(u[i, 2] * (t - s + 1)), s + int(u[i, 3] * (t - s + 1))))
        if y == x:
            x, y = s, t
        out[i] = (s / lv, t / lv, x / lv, y / lv)
    return out


PRE_FEATURES = ("tau", "b_tau", "max_pre", "occ_pre")
POST_FEATURES = ("len_post", "b_post", "max_post", "occ_post")


@dataclass(frozen=True)
class SplitSample:
    e: float
    u: float
    e_grid: float
    tau: float
    pre: dict
    post: dict

    def row(self) -> list:
        return [self.e, self.tau] + [self.pre[k] for k in PRE_FEATURES] + [
            self.post[k] for k in POST_FEATURES]


def split_columns() -> list:
    return ["e", "tau"] + [f"pre_{k}" for k in PRE_FEATURES] + [f"post_{k}" for k in POST_FEATURES]


def sample_split(ix, lam: float, seed: int, replicate: int = 0, level: int = 12,
                 pad: float = 0.5, stream: str = "split") -> SplitSample:
    """One draw of (e, tau_{0,e}, pre features, post features).

    e = -log(U)/lam with U from the dedicated stream (seed, stream + ':exp')
    at position ``replicate``; the path comes from an independent seed.  e
    is rounded down to the grid (a geometric number of steps), the path is
    sampled on [-pad, e_grid + pad].
    """
    if not lam > 0:
        raise DomainError("rate must be positive")
    u = float(rng.uniforms(seed, (stream + ":exp",), replicate, 1)[0])
    e = -math.log(u) / lam
    h = 2.0 ** -level
    eg = math.floor(e / h) * h
    path = sample_path(GridSpec(-pad, eg + pad, level), rng.derive_seed(seed, stream + ":path", replicate))
    i0 = path.index(0.0)
    ie = path.index(eg)
    v = path.values
    if ie > i0:
        tau = ix.tau(path, 0.0, eg)
    else:
        tau = 0.0
    it = path.index(tau)
    pre_seg = v[i0:it + 1]
    post_seg = v[it:] - v[it]
    pre = {
        "tau": tau,
        "b_tau": float(v[it]),
        "max_pre": float(pre_seg.max()),
        "occ_pre": float(np.count_nonzero(pre_seg[:-1] > 0) * h),
    }
    post = {
        "len_post": eg - tau,
        "b_post": float(v[ie] - v[it]),
        "max_post": float(post_seg[: ie - it + 1].max()),
        "occ_post": float(np.count_nonzero(post_seg[1:] > 0) * h),
    }
    return SplitSample(e, u, eg, tau, pre, post)
