"""Compiled inner loops (numba).

All kernels take raw grid values ``b`` of the driving path and node
indices; they never allocate per step and release the GIL so replicate
threads run in parallel.
"""
from __future__ import annotations

import numba
import numpy as np

IMPLICIT = 0
EULER = 1
REFLECTED = 2

_jit = numba.njit(cache=True, nogil=True)


@_jit
def _implicit_step(x, db, c, thr):
    # drift-implicit step for X = sqrt(Z): X' = X + dB + c / X'
    # with y floored at 0, so every step with y <= 0 lands on the same value
    y = x + db
    if c > 0.0:
        if y < 0.0:
            y = 0.0
        return 0.5 * (y + np.sqrt(y * y + 4.0 * c))
    if y <= thr:
        return 0.0
    return 0.5 * (y + np.sqrt(y * y + 4.0 * c))


@_jit
def solve(b, s, e, d, h, scheme):
    """Z on nodes s..e (inclusive) started from Z(s) = 0."""
    n = e - s + 1
    z = np.empty(n)
    z[0] = 0.0
    if scheme == IMPLICIT:
        c = 0.5 * (d - 1.0) * h
        thr = np.sqrt(max(-4.0 * c, 0.0))
        x = 0.0
        for m in range(1, n):
            x = _implicit_step(x, b[s + m] - b[s + m - 1], c, thr)
            z[m] = x * x
    elif scheme == EULER:
        zz = 0.0
        for m in range(1, n):
            zz = zz + d * h + 2.0 * np.sqrt(max(zz, 0.0)) * (b[s + m] - b[s + m - 1])
            if zz < 0.0:
                zz = 0.0
            z[m] = zz
    else:
        lo = b[s]
        for m in range(1, n):
            v = b[s + m]
            if v < lo:
                lo = v
            z[m] = (v - lo) * (v - lo)
    return z


@_jit
def last_zeros(b, d, h, theta, scheme, starts, ends):
    """Last node u in [start, end] with Z(u) <= theta, Z restarted at start.

    Windows must be sorted by (start, end); windows sharing a start share
    one solve.
    """
    nw = starts.shape[0]
    out = np.empty(nw, np.int64)
    c = 0.5 * (d - 1.0) * h
    thr = np.sqrt(max(-4.0 * c, 0.0))
    i = 0
    while i < nw:
        s = starts[i]
        j = i
        while j < nw and starts[j] == s:
            j += 1
        k = i
        last = s
        while k < j and ends[k] == s:
            out[k] = s
            k += 1
        x = 0.0
        zz = 0.0
        lo = b[s]
        m = s
        while k < j:
            m += 1
            if scheme == IMPLICIT:
                x = _implicit_step(x, b[m] - b[m - 1], c, thr)
                zz = x * x
            elif scheme == EULER:
                zz = zz + d * h + 2.0 * np.sqrt(max(zz, 0.0)) * (b[m] - b[m - 1])
                if zz < 0.0:
                    zz = 0.0
            else:
                if b[m] < lo:
                    lo = b[m]
                zz = (b[m] - lo) * (b[m] - lo)
            if zz <= theta:
                last = m
            while k < j and ends[k] == m:
                out[k] = last
                k += 1
        i = j
    return out


@_jit
def argmins(b, starts, ends, kappa, h, first):
    """Earliest argmin of b[u] + kappa * time(u) over each [start, end].

    ``first`` is the global index of node 0 so that time(u) = (first+u)*h.
    """
    nw = starts.shape[0]
    out = np.empty(nw, np.int64)
    for w in range(nw):
        s = starts[w]
        best = s
        if kappa == 0.0:
            bv = b[s]
            for m in range(s + 1, ends[w] + 1):
                if b[m] < bv:
                    bv = b[m]
                    best = m
        else:
            bv = b[s] + kappa * (first + s) * h
            for m in range(s + 1, ends[w] + 1):
                v = b[m] + kappa * (first + m) * h
                if v < bv:
                    bv = v
                    best = m
        out[w] = best
    return out


@_jit
def cumtrap_inverse(z, h, floor):
    """Cumulative trapezoid integral of 1 / max(z, floor) from the right end.

    out[i] = integral over nodes i..n-1.
    """
    n = z.shape[0]
    out = np.empty(n)
    out[n - 1] = 0.0
    prev = 1.0 / max(z[n - 1], floor)
    acc = 0.0
    for i in range(n - 2, -1, -1):
        cur = 1.0 / max(z[i], floor)
        acc += 0.5 * h * (cur + prev)
        out[i] = acc
        prev = cur
    return out
