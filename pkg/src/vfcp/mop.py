"""Per-block prediction-mode selection by estimated rate.

Each frame (t >= 1) is tiled into blocks; both predictors are trial-run on a
candidate buffer with the optimistic uniform bound tau', and the one with the
lower estimated rate wins.  The estimate combines the zeroth-order entropy of
folded quantization indices on a subsampled grid, a penalty for unpredictable
(overflow) samples, and the constant per-block metadata cost.  The
semi-Lagrangian mode must beat Lorenzo by a relative margin theta to be
chosen, so ties and noise-level differences default to Lorenzo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .predictors import _bilinear, _lorenzo3d, _rha, _sl_departure

MODE_LORENZO = 0
MODE_SL = 1


@dataclass(frozen=True)
class MopConfig:
    bx: int = 32
    by: int = 32
    stride: int = 2
    lam: float = 16.0
    theta: float = 3e-4

    @property
    def r_meta(self) -> float:
        """Amortized mode-bit cost per sample (two components per vertex)."""
        return 1.0 / (self.bx * self.by * 2)


@dataclass(frozen=True)
class BlockGrid:
    H: int
    W: int
    bx: int
    by: int

    @property
    def shape(self) -> tuple[int, int]:
        return (-(-self.H // self.by), -(-self.W // self.bx))

    @property
    def n_blocks(self) -> int:
        a, b = self.shape
        return a * b


def entropy_h0(counts) -> float:
    """Zeroth-order entropy (bits/sample) of a histogram."""
    h = np.asarray(counts, dtype=np.float64)
    h = h[h > 0]
    n = h.sum()
    if n == 0:
        return 0.0
    p = h / n
    return float(-(p * np.log2(p)).sum())


@njit(cache=True)
def _score_frame(uo, vo, up, vp, tau, radius, stride, bx, by, lam, rmeta,
                 theta, cfl_x, cfl_y, d_max, n_max, modes, scores):
    H, W = uo.shape
    nby = (H + by - 1) // by
    nbx = (W + bx - 1) // bx
    cand_u = uo.copy()
    cand_v = vo.copy()
    hist = np.zeros(radius, dtype=np.int64)
    touched = np.empty(2 * bx * by, dtype=np.int64)
    two_tau = 2 * tau
    for bi in range(nby):
        r0 = bi * by
        r1 = min(r0 + by, H)
        for bj in range(nbx):
            c0 = bj * bx
            c1 = min(c0 + bx, W)
            for mode in range(2):
                nt = 0
                lp = 0
                n_ok = 0
                acc = 0.0
                for i in range(r0, r1):
                    for j in range(c0, c1):
                        fi = 0.0
                        fj = 0.0
                        if mode == MODE_SL:
                            fi, fj = _sl_departure(up, vp, i, j, cfl_x, cfl_y,
                                                   d_max, n_max)
                        sample = ((i - r0) % stride == 0
                                  and (j - c0) % stride == 0)
                        for comp in range(2):
                            orig = uo[i, j] if comp == 0 else vo[i, j]
                            if mode == MODE_SL:
                                prev = up if comp == 0 else vp
                                pred = _bilinear(prev, fi, fj)
                            else:
                                cur = cand_u if comp == 0 else cand_v
                                prev = up if comp == 0 else vp
                                pred = _lorenzo3d(cur, prev, i, j)
                            r = orig - pred
                            idx = _rha(r / two_tau)
                            ok = (-radius < idx < radius
                                  and abs(r - idx * two_tau) <= tau)
                            if mode == MODE_LORENZO:
                                recon = pred + idx * two_tau if ok else orig
                                if comp == 0:
                                    cand_u[i, j] = recon
                                else:
                                    cand_v[i, j] = recon
                            if sample:
                                if ok:
                                    a = abs(idx)
                                    if hist[a] == 0:
                                        touched[nt] = a
                                        nt += 1
                                    hist[a] += 1
                                    n_ok += 1
                                else:
                                    lp += 1
                h0 = 0.0
                if n_ok > 0:
                    for k in range(nt):
                        h = float(hist[touched[k]])
                        acc += h * math.log2(h)
                    h0 = math.log2(float(n_ok)) - acc / n_ok
                if n_ok + lp > 0:
                    rate = h0 + lam * lp / (n_ok + lp) + rmeta
                else:
                    rate = rmeta
                scores[bi, bj, mode] = rate
                for k in range(nt):
                    hist[touched[k]] = 0
                if mode == MODE_LORENZO:
                    for i in range(r0, r1):
                        for j in range(c0, c1):
                            cand_u[i, j] = uo[i, j]
                            cand_v[i, j] = vo[i, j]
            r_lor = scores[bi, bj, MODE_LORENZO]
            r_sl = scores[bi, bj, MODE_SL]
            if r_lor > 0.0 and (r_lor - r_sl) / r_lor > theta:
                modes[bi, bj] = MODE_SL
            else:
                modes[bi, bj] = MODE_LORENZO


def select_modes(uo, vo, up, vp, tau_prime, radius, cfl, cfg: MopConfig | None
                 = None, d_max=2.0, n_max=32):
    """Choose per-block modes for one frame (t >= 1).

    uo/vo are the current frame's originals, up/vp the previous frame's
    reconstruction, all int64 (H, W).  Returns (modes uint8 grid, scores
    float64 grid with trailing axis [lorenzo, sl]).
    """
    cfg = cfg or MopConfig()
    H, W = uo.shape
    grid = BlockGrid(H, W, cfg.bx, cfg.by)
    nby, nbx = grid.shape
    modes = np.zeros((nby, nbx), dtype=np.uint8)
    scores = np.zeros((nby, nbx, 2), dtype=np.float64)
    if tau_prime <= 0:
        return modes, scores
    _score_frame(uo, vo, up, vp, np.int64(tau_prime), np.int64(radius),
                 cfg.stride, cfg.bx, cfg.by, cfg.lam, cfg.r_meta, cfg.theta,
                 cfl.cfl_x, cfl.cfl_y, d_max, n_max, modes, scores)
    return modes, scores
