"""Prediction modes: first-order 3D Lorenzo and the semi-Lagrangian predictor.

Both operate strictly on decoder-visible reconstructed fixed-point data, so
encoding then decoding replays identical predictions bit for bit.  The
semi-Lagrangian mode backtracks along the previous frame's velocity (RK2
midpoint when the local displacement is small, capped Euler substeps when it
is large) and samples the previous frame at the departure point.

Axis convention: i = row pairs with v, j = column pairs with u; row
displacement is v*CFL_y, column displacement is u*CFL_x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

D_MAX_DEFAULT = 2.0
N_MAX_DEFAULT = 32


@njit(cache=True, inline="always")
def _rha(x):
    """Round half away from zero to int64."""
    if x >= 0.0:
        return np.int64(math.floor(x + 0.5))
    return np.int64(-math.floor(-x + 0.5))


@njit(cache=True)
def _bilinear(frame, i_f, j_f):
    """Bilinear sample of an int64 frame, clamped, rounded to integer."""
    H, W = frame.shape
    if i_f < 0.0:
        i_f = 0.0
    elif i_f > H - 1:
        i_f = float(H - 1)
    if j_f < 0.0:
        j_f = 0.0
    elif j_f > W - 1:
        j_f = float(W - 1)
    i0 = int(math.floor(i_f))
    j0 = int(math.floor(j_f))
    if i0 > H - 1:
        i0 = H - 1
    if j0 > W - 1:
        j0 = W - 1
    i1 = min(i0 + 1, H - 1)
    j1 = min(j0 + 1, W - 1)
    a = i_f - i0
    b = j_f - j0
    val = ((1.0 - a) * (1.0 - b) * frame[i0, j0]
           + (1.0 - a) * b * frame[i0, j1]
           + a * (1.0 - b) * frame[i1, j0]
           + a * b * frame[i1, j1])
    return _rha(val)


@njit(cache=True)
def _lorenzo3d(cur, prev, i, j):
    """7-term causal stencil over reconstructed values; out of range reads 0."""
    p = np.int64(0)
    if i > 0:
        p += cur[i - 1, j] - prev[i - 1, j]
    if j > 0:
        p += cur[i, j - 1] - prev[i, j - 1]
    p += prev[i, j]
    if i > 0 and j > 0:
        p += prev[i - 1, j - 1] - cur[i - 1, j - 1]
    return p


@njit(cache=True)
def _sl_departure(up, vp, i, j, cfl_x, cfl_y, d_max, n_max):
    """Backtracked departure point (i*, j*) from vertex (i, j)."""
    H, W = up.shape
    u0 = float(up[i, j])
    v0 = float(vp[i, j])
    d_inf = max(abs(u0) * cfl_x, abs(v0) * cfl_y)
    if d_inf <= d_max:
        # RK2 midpoint
        ih = i - 0.5 * v0 * cfl_y
        jh = j - 0.5 * u0 * cfl_x
        um = float(_bilinear(up, ih, jh))
        vm = float(_bilinear(vp, ih, jh))
        return i - vm * cfl_y, j - um * cfl_x
    n = int(math.ceil(d_inf / d_max))
    if n > n_max:
        n = n_max
    fi = float(i)
    fj = float(j)
    for _ in range(n):
        us = float(_bilinear(up, fi, fj))
        vs = float(_bilinear(vp, fi, fj))
        fi -= vs * cfl_y / n
        fj -= us * cfl_x / n
        if fi < 0.0:
            fi = 0.0
        elif fi > H - 1:
            fi = float(H - 1)
        if fj < 0.0:
            fj = 0.0
        elif fj > W - 1:
            fj = float(W - 1)
    return fi, fj


@dataclass
class CflFactors:
    """Per-axis factors converting fixed-unit velocity to cells per step."""
    cfl_x: float
    cfl_y: float

    @classmethod
    def from_spacing(cls, dx: float, dy: float, dt: float, scale: float):
        return cls(cfl_x=(dt / dx) / scale, cfl_y=(dt / dy) / scale)


@dataclass
class PredictorContext:
    """Sliding two-frame window of reconstructed fixed-point data."""
    prev_u: np.ndarray  # int64 (H, W), complete frame t-1 (zeros at t=0)
    prev_v: np.ndarray
    cur_u: np.ndarray   # int64 (H, W), filled in raster order
    cur_v: np.ndarray
    t: int
    cfl: CflFactors
    d_max: float = D_MAX_DEFAULT
    n_max: int = N_MAX_DEFAULT

    @classmethod
    def fresh(cls, H, W, t, cfl, d_max=D_MAX_DEFAULT, n_max=N_MAX_DEFAULT):
        z = lambda: np.zeros((H, W), dtype=np.int64)
        return cls(z(), z(), z(), z(), t, cfl, d_max, n_max)


def bilinear(frame: np.ndarray, i_f: float, j_f: float) -> int:
    return int(_bilinear(np.ascontiguousarray(frame, dtype=np.int64),
                         float(i_f), float(j_f)))


def lorenzo3d(ctx: PredictorContext, i: int, j: int, component: str) -> int:
    cur = ctx.cur_u if component == "u" else ctx.cur_v
    prev = ctx.prev_u if component == "u" else ctx.prev_v
    return int(_lorenzo3d(cur, prev, i, j))


def sl_departure(ctx: PredictorContext, i: int, j: int) -> tuple[float, float]:
    if ctx.t < 1:
        raise ValueError("semi-Lagrangian backtracking undefined at t=0")
    return _sl_departure(ctx.prev_u, ctx.prev_v, i, j,
                         ctx.cfl.cfl_x, ctx.cfl.cfl_y, ctx.d_max, ctx.n_max)


def sl_predict(ctx: PredictorContext, i: int, j: int, component: str) -> int:
    fi, fj = sl_departure(ctx, i, j)
    prev = ctx.prev_u if component == "u" else ctx.prev_v
    return int(_bilinear(prev, fi, fj))
