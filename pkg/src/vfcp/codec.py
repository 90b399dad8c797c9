"""Archive codec: error-bound quantization, residual coding, serialization.

Pipeline per frame, raster order, both components per vertex:
  1. per-vertex bound xi is quantized onto the ladder e_q = tau' >> k
     (k in 0..30, code 31 = lossless) and entropy-coded once for the series;
  2. residual against the selected predictor is quantized with step 2*e_q;
     indices that overflow the symbol range, or that would break the bound,
     emit the escape symbol 0 and store the exact value on a side stream;
  3. symbol streams are Huffman-coded and the whole payload deflated.

Decoding replays the identical predictor state from reconstructed data, so
the archive is bit-exactly reproducible and decode is deterministic.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from numba import njit

from . import huffman
from .ebounds import derive_all
from .field import FieldSeries, FixedField, to_fixed
from .mop import MODE_SL, MopConfig, select_modes
from .predicates import build_critical_face_set
from .predictors import (D_MAX_DEFAULT, N_MAX_DEFAULT, CflFactors, _bilinear,
                         _lorenzo3d, _rha, _sl_departure)

MAGIC = b"VFCP"
VERSION = 1
K_MAX = 30
CODE_LOSSLESS = 31
EB_ALPHABET = 32
FLAG_IDENTITY = 0x1

PREDICTORS = ("mop", "lorenzo", "sl")


@dataclass(frozen=True)
class Config:
    """Single source of codec defaults (CLI flags map 1:1 onto these)."""
    predictor: str = "mop"        # mop | lorenzo | sl
    bx: int = 32
    by: int = 32
    stride: int = 2
    lam: float = 16.0
    theta: float = 3e-4
    radius: int = 1 << 15         # quantization index range: |idx| < radius
    d_max: float = D_MAX_DEFAULT
    n_max: int = N_MAX_DEFAULT
    backend: str = "zlib"         # zlib | identity
    stats: bool = False

    def __post_init__(self):
        if self.predictor not in PREDICTORS:
            raise ValueError(f"unknown predictor {self.predictor!r}")
        if self.backend not in ("zlib", "identity"):
            raise ValueError(f"unknown backend {self.backend!r}")

    @property
    def mop(self) -> MopConfig:
        return MopConfig(bx=self.bx, by=self.by, stride=self.stride,
                         lam=self.lam, theta=self.theta)


def tau_from_eps(eps: float, scale: float) -> int:
    """Integer bound tau' honoring eps after both rounding steps.

    Fixed-point conversion already spends up to 0.5 fixed units, so the
    residual budget is the largest integer strictly below eps*S - 0.5.
    """
    return max(0, int(math.floor(eps * scale - 0.5)))


def quantize_eb(xi: int, tau_prime: int, k_max: int = K_MAX) -> int:
    """Ladder code for a vertex bound: e_q = tau' >> k, or CODE_LOSSLESS."""
    if tau_prime <= 0 or xi <= 0:
        return CODE_LOSSLESS
    if xi >= tau_prime:
        return 0
    m = (tau_prime + xi - 1) // xi  # ceil(tau'/xi)
    k = (m - 1).bit_length()        # smallest k with 2^k >= tau'/xi
    if k > k_max or (tau_prime >> k) == 0:
        return CODE_LOSSLESS
    return k


def eb_from_code(code: int, tau_prime: int) -> int:
    return 0 if code == CODE_LOSSLESS else tau_prime >> code


def _quantize_eb_vec(xi: np.ndarray, tau_prime: int) -> np.ndarray:
    """Vectorized quantize_eb over an int64 array; returns uint8 codes."""
    codes = np.full(xi.shape, CODE_LOSSLESS, dtype=np.uint8)
    if tau_prime <= 0:
        return codes
    pos = xi > 0
    m = np.empty_like(xi)
    m[pos] = (tau_prime + xi[pos] - 1) // xi[pos]
    m[~pos] = 1
    k = np.zeros(xi.shape, dtype=np.int64)
    big = m > 1
    k[big] = np.ceil(np.log2(m[big].astype(np.float64))).astype(np.int64)
    # float log2 can land one off at exact powers of two; correct both ways
    k = np.where((k > 0) & (np.left_shift(np.int64(1), np.maximum(k - 1, 0))
                            >= m), k - 1, k)
    k = np.where(np.left_shift(np.int64(1), np.minimum(k, 62)) < m, k + 1, k)
    ok = pos & (k <= K_MAX) & ((tau_prime >> np.minimum(k, K_MAX)) > 0)
    codes[ok] = k[ok].astype(np.uint8)
    return codes


@njit(cache=True)
def _encode_frame(uo, vo, up, vp, cu, cv, eq, modes, use_modes, by, bx,
                  cfl_x, cfl_y, d_max, n_max, radius,
                  qd, qd_pos, ll, ll_pos):
    H, W = uo.shape
    for i in range(H):
        for j in range(W):
            e = eq[i, j]
            if e == 0:
                cu[i, j] = uo[i, j]
                cv[i, j] = vo[i, j]
                ll[ll_pos] = uo[i, j]
                ll[ll_pos + 1] = vo[i, j]
                ll_pos += 2
                continue
            sl = use_modes and modes[i // by, j // bx] == MODE_SL
            fi = 0.0
            fj = 0.0
            if sl:
                fi, fj = _sl_departure(up, vp, i, j, cfl_x, cfl_y,
                                       d_max, n_max)
            two_e = 2 * e
            for comp in range(2):
                orig = uo[i, j] if comp == 0 else vo[i, j]
                if sl:
                    pred = _bilinear(up if comp == 0 else vp, fi, fj)
                else:
                    if comp == 0:
                        pred = _lorenzo3d(cu, up, i, j)
                    else:
                        pred = _lorenzo3d(cv, vp, i, j)
                r = orig - pred
                idx = _rha(r / two_e)
                if -radius < idx < radius and abs(r - idx * two_e) <= e:
                    qd[qd_pos] = idx + radius
                    recon = pred + idx * two_e
                else:
                    qd[qd_pos] = 0
                    recon = orig
                    ll[ll_pos] = orig
                    ll_pos += 1
                qd_pos += 1
                if comp == 0:
                    cu[i, j] = recon
                else:
                    cv[i, j] = recon
    return qd_pos, ll_pos


@njit(cache=True)
def _decode_frame(up, vp, cu, cv, eq, modes, use_modes, by, bx,
                  cfl_x, cfl_y, d_max, n_max, radius,
                  qd, qd_pos, ll, ll_pos):
    H, W = cu.shape
    for i in range(H):
        for j in range(W):
            e = eq[i, j]
            if e == 0:
                cu[i, j] = ll[ll_pos]
                cv[i, j] = ll[ll_pos + 1]
                ll_pos += 2
                continue
            sl = use_modes and modes[i // by, j // bx] == MODE_SL
            fi = 0.0
            fj = 0.0
            if sl:
                fi, fj = _sl_departure(up, vp, i, j, cfl_x, cfl_y,
                                       d_max, n_max)
            two_e = 2 * e
            for comp in range(2):
                if sl:
                    pred = _bilinear(up if comp == 0 else vp, fi, fj)
                else:
                    if comp == 0:
                        pred = _lorenzo3d(cu, up, i, j)
                    else:
                        pred = _lorenzo3d(cv, vp, i, j)
                sym = qd[qd_pos]
                qd_pos += 1
                if sym == 0:
                    recon = ll[ll_pos]
                    ll_pos += 1
                else:
                    recon = pred + (sym - radius) * two_e
                if comp == 0:
                    cu[i, j] = recon
                else:
                    cv[i, j] = recon
    return qd_pos, ll_pos


_HEADER = struct.Struct("<4sHHIIIdddidqHHHIdddHB")


@dataclass
class Archive:
    H: int
    W: int
    T: int
    dx: float
    dy: float
    dt: float
    scale: float
    eps: float
    tau_prime: int
    config: Config
    q_xi: bytes
    q_d: bytes
    l_d: bytes
    lossless_stream: bytes
    mode_bitmap: bytes
    stats: "CompressStats | None" = dc_field(default=None, compare=False)

    @property
    def sections(self) -> tuple[bytes, ...]:
        return (self.q_xi, self.q_d, self.l_d,
                self.lossless_stream, self.mode_bitmap)

    def to_bytes(self) -> bytes:
        cfg = self.config
        flags = FLAG_IDENTITY if cfg.backend == "identity" else 0
        scale_log2 = round(math.log2(self.scale))
        head = _HEADER.pack(
            MAGIC, VERSION, flags, self.H, self.W, self.T,
            self.dx, self.dy, self.dt, scale_log2, self.eps, self.tau_prime,
            cfg.bx, cfg.by, cfg.stride, cfg.radius,
            cfg.lam, cfg.theta, cfg.d_max, cfg.n_max,
            PREDICTORS.index(cfg.predictor))
        parts = [head]
        squash = (lambda b: b) if cfg.backend == "identity" else \
            (lambda b: zlib.compress(b, 6))
        for sec in self.sections:
            payload = squash(sec)
            parts.append(struct.pack("<QQ", len(payload), len(sec)))
            parts.append(payload)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Archive":
        if len(blob) < _HEADER.size or blob[:4] != MAGIC:
            raise ValueError("not a VFCP archive")
        (magic, version, flags, H, W, T, dx, dy, dt, scale_log2, eps, tau,
         bx, by, stride, radius, lam, theta, d_max, n_max,
         pred_idx) = _HEADER.unpack_from(blob, 0)
        if version != VERSION:
            raise ValueError(f"unsupported archive version {version}")
        backend = "identity" if flags & FLAG_IDENTITY else "zlib"
        cfg = Config(predictor=PREDICTORS[pred_idx], bx=bx, by=by,
                     stride=stride, lam=lam, theta=theta, radius=radius,
                     d_max=d_max, n_max=n_max, backend=backend)
        off = _HEADER.size
        secs = []
        for _ in range(5):
            stored, raw = struct.unpack_from("<QQ", blob, off)
            off += 16
            payload = blob[off:off + stored]
            if len(payload) != stored:
                raise ValueError("truncated archive section")
            off += stored
            sec = payload if backend == "identity" else zlib.decompress(payload)
            if len(sec) != raw:
                raise ValueError("section length mismatch")
            secs.append(sec)
        return cls(H, W, T, dx, dy, dt, 2.0 ** scale_log2, eps, tau, cfg,
                   *secs)

    @property
    def nbytes(self) -> int:
        return len(self.to_bytes())

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Archive":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass
class CompressStats:
    """Optional diagnostics captured during compression."""
    symbols: np.ndarray          # int32 raw residual symbols (0 = overflow)
    signed_indices: np.ndarray   # int32, overflow samples excluded
    overflow_count: int
    lossless_vertices: int
    modes: np.ndarray            # uint8 (T-1, nby, nbx); empty if T < 2
    critical_faces: int


@dataclass(frozen=True)
class DecodeStats:
    """Working-set accounting for the streaming decode loop."""
    aux_component_buffers: int   # 2D int64 buffers alive at once

    @property
    def aux_frames(self) -> float:
        return self.aux_component_buffers / 2.0


def _mode_grid_shape(H, W, cfg: Config):
    return (-(-H // cfg.by), -(-W // cfg.bx))


def compress(f: FieldSeries, eps: float, config: Config | None = None,
             relative: bool = False) -> Archive:
    """Compress a field series under a uniform pointwise error bound eps.

    With relative=True, eps is interpreted as a fraction of the joint value
    range.  Every critical-point trajectory of the input is preserved
    exactly by construction.
    """
    cfg = config or Config()
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if relative:
        eps = eps * f.value_range()
    ff = to_fixed(f)
    cfs = build_critical_face_set(ff)
    tau = tau_from_eps(eps, ff.scale)
    eb = derive_all(ff, cfs, tau)
    codes = _quantize_eb_vec(eb.xi, tau)
    eq = np.where(codes == CODE_LOSSLESS, 0,
                  tau >> np.minimum(codes, K_MAX).astype(np.int64))
    eq3 = eq.reshape(f.T, f.H, f.W)

    uo3 = ff.frames("u")
    vo3 = ff.frames("v")
    cfl = CflFactors.from_spacing(f.dx, f.dy, f.dt, ff.scale)
    nby, nbx = _mode_grid_shape(f.H, f.W, cfg)
    n = f.n_samples
    qd = np.zeros(2 * n, dtype=np.int32)
    ll = np.zeros(2 * n, dtype=np.int64)
    qd_pos = 0
    ll_pos = 0
    modes_all = np.zeros((max(f.T - 1, 0), nby, nbx), dtype=np.uint8)

    prev_u = np.zeros((f.H, f.W), dtype=np.int64)
    prev_v = np.zeros((f.H, f.W), dtype=np.int64)
    cur_u = np.empty_like(prev_u)
    cur_v = np.empty_like(prev_v)
    zero_modes = np.zeros((nby, nbx), dtype=np.uint8)
    for t in range(f.T):
        if t == 0 or tau == 0 or cfg.predictor == "lorenzo":
            modes_t = zero_modes
        elif cfg.predictor == "sl":
            modes_t = np.ones((nby, nbx), dtype=np.uint8)
        else:
            modes_t, _ = select_modes(uo3[t], vo3[t], prev_u, prev_v, tau,
                                      cfg.radius, cfl, cfg.mop,
                                      cfg.d_max, cfg.n_max)
        if t >= 1:
            modes_all[t - 1] = modes_t
        qd_pos, ll_pos = _encode_frame(
            uo3[t], vo3[t], prev_u, prev_v, cur_u, cur_v, eq3[t],
            modes_t, t >= 1, cfg.by, cfg.bx,
            cfl.cfl_x, cfl.cfl_y, cfg.d_max, np.int64(cfg.n_max),
            np.int64(cfg.radius), qd, qd_pos, ll, ll_pos)
        prev_u, cur_u = cur_u, prev_u
        prev_v, cur_v = cur_v, prev_v

    qd_used = qd[:qd_pos]
    archive = Archive(
        H=f.H, W=f.W, T=f.T, dx=f.dx, dy=f.dy, dt=f.dt,
        scale=ff.scale, eps=eps, tau_prime=tau, config=cfg,
        q_xi=huffman.encode(codes.astype(np.int64), EB_ALPHABET),
        q_d=huffman.encode(qd_used.astype(np.int64), 2 * cfg.radius),
        l_d=np.packbits(eb.lossless).tobytes(),
        lossless_stream=ll[:ll_pos].astype("<i8").tobytes(),
        mode_bitmap=np.packbits(modes_all.reshape(-1)).tobytes(),
    )
    if cfg.stats:
        signed = qd_used[qd_used != 0] - cfg.radius
        archive.stats = CompressStats(
            symbols=qd_used.copy(),
            signed_indices=signed.astype(np.int32),
            overflow_count=int((qd_used == 0).sum()),
            lossless_vertices=eb.lossless_count,
            modes=modes_all,
            critical_faces=len(cfs),
        )
    return archive


def decompress_with_stats(a: Archive) -> tuple[FieldSeries, DecodeStats]:
    cfg = a.config
    n = a.H * a.W * a.T
    codes = huffman.decode(a.q_xi)
    if codes.size != n:
        raise ValueError("eb code stream length mismatch")
    tau = a.tau_prime
    eq = np.where(codes == CODE_LOSSLESS, 0,
                  tau >> np.minimum(codes, K_MAX))
    eq3 = eq.reshape(a.T, a.H, a.W)
    ld = np.unpackbits(np.frombuffer(a.l_d, dtype=np.uint8))[:n]
    if not np.array_equal(ld.astype(bool), eq == 0):
        raise ValueError("lossless bitmap disagrees with eb codes")
    qd = huffman.decode(a.q_d)
    ll = np.frombuffer(a.lossless_stream, dtype="<i8").astype(np.int64)
    nby, nbx = _mode_grid_shape(a.H, a.W, cfg)
    n_mode_bits = max(a.T - 1, 0) * nby * nbx
    mode_bits = np.unpackbits(
        np.frombuffer(a.mode_bitmap, dtype=np.uint8))[:n_mode_bits]
    modes_all = mode_bits.reshape(max(a.T - 1, 0), nby, nbx).astype(np.uint8)

    cfl = CflFactors.from_spacing(a.dx, a.dy, a.dt, a.scale)
    # float64 keeps every reconstructed fixed value exact, so re-fixing at
    # the archive's scale reproduces the decoder's integers bit for bit
    out_u = np.empty((a.T, a.H, a.W), dtype=np.float64)
    out_v = np.empty((a.T, a.H, a.W), dtype=np.float64)
    # streaming working set: exactly two frames of each component
    prev_u = np.zeros((a.H, a.W), dtype=np.int64)
    prev_v = np.zeros((a.H, a.W), dtype=np.int64)
    cur_u = np.empty_like(prev_u)
    cur_v = np.empty_like(prev_v)
    zero_modes = np.zeros((nby, nbx), dtype=np.uint8)
    qd_pos = 0
    ll_pos = 0
    inv = 1.0 / a.scale
    for t in range(a.T):
        modes_t = modes_all[t - 1] if t >= 1 else zero_modes
        qd_pos, ll_pos = _decode_frame(
            prev_u, prev_v, cur_u, cur_v, eq3[t], modes_t, t >= 1,
            cfg.by, cfg.bx, cfl.cfl_x, cfl.cfl_y, cfg.d_max,
            np.int64(cfg.n_max), np.int64(cfg.radius),
            qd, qd_pos, ll, ll_pos)
        out_u[t] = cur_u * inv
        out_v[t] = cur_v * inv
        prev_u, cur_u = cur_u, prev_u
        prev_v, cur_v = cur_v, prev_v
    if qd_pos != qd.size:
        raise ValueError("residual stream length mismatch")
    if ll_pos != ll.size:
        raise ValueError("lossless stream length mismatch")
    fs = FieldSeries(a.H, a.W, a.T, a.dx, a.dy, a.dt,
                     out_u.reshape(-1), out_v.reshape(-1))
    return fs, DecodeStats(aux_component_buffers=4)


def decompress(a: Archive) -> FieldSeries:
    return decompress_with_stats(a)[0]


def reconstruct_fixed(a: Archive) -> FixedField:
    """Reconstruction as integers at the archive's scale (no float round trip)."""
    fs = decompress(a)
    return to_fixed(fs, scale=a.scale)
