"""Critical-point trajectory extraction and original-vs-reconstruction checks.

Crossed faces are graph nodes; every tet crossed by a trajectory has exactly
two crossed faces and contributes the edge joining them, so components are
simple paths or cycles.  Verification compares face predicates and the full
node/edge sets between the original and the reconstruction, both converted
at the same fixed-point scale.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field import FieldSeries, FixedField, psnr, to_fixed
from .mesh import cell_triangles, prism_tets, tet_faces, vid_to_tij
from .predicates import CriticalFaceSet, build_critical_face_set, crossing_point


class TopologyError(AssertionError):
    """A tet with 1 or >= 3 crossed faces: impossible under exact predicates."""


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        while p != self.parent[p]:
            self.parent[p] = self.parent[self.parent[p]]
            p = self.parent[p]
        return p

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


@dataclass
class TrajectoryGraph:
    nodes: dict           # FaceKey -> (x, y, t) crossing position
    edges: frozenset      # frozenset of (FaceKey, FaceKey) sorted pairs
    components: list      # ordered FaceKey chains
    loops: list           # bool per component

    @property
    def n_components(self) -> int:
        return len(self.components)

    def component_points(self, k: int):
        return [self.nodes[f] for f in self.components[k]]


def _candidate_tets(face, H, W, T):
    """Tets containing `face`, found by scanning around its first vertex."""
    a = face[0]
    fa = set(face)
    t, i, j = vid_to_tij(a, H, W)
    for slab in (t - 1, t):
        if not (0 <= slab < T - 1):
            continue
        for ci in range(max(0, i - 1), min(H - 1, i + 1)):
            for cj in range(max(0, j - 1), min(W - 1, j + 1)):
                for tri in cell_triangles(ci, cj, slab, H, W):
                    for tet in prism_tets(tri, slab, H, W, T):
                        if fa <= set(tet):
                            yield tet


def extract_trajectories(ff: FixedField, dx=1.0, dy=1.0, dt=1.0,
                         cfs: CriticalFaceSet | None = None) -> TrajectoryGraph:
    """Link crossed faces through tets into ordered trajectory chains."""
    if cfs is None:
        cfs = build_critical_face_set(ff)
    positives = cfs.members
    edges = set()
    seen_tets = set()
    for f in positives:
        for tet in _candidate_tets(f, ff.H, ff.W, ff.T):
            if tet in seen_tets:
                continue
            seen_tets.add(tet)
            crossed = [g for g in tet_faces(tet) if g in positives]
            if len(crossed) != 2:
                raise TopologyError(
                    f"tet {tet} has {len(crossed)} crossed faces (expected 2)")
            edges.add(tuple(sorted((crossed[0], crossed[1]))))

    adj = {f: [] for f in positives}
    uf = _UnionFind()
    for f in positives:
        uf.find(f)
    for f, g in edges:
        adj[f].append(g)
        adj[g].append(f)
        uf.union(f, g)
    for f, nbrs in adj.items():
        if len(nbrs) > 2:
            raise TopologyError(f"face {f} has degree {len(nbrs)}")

    groups = {}
    for f in positives:
        groups.setdefault(uf.find(f), []).append(f)

    components = []
    loops = []
    for members in groups.values():
        endpoints = sorted(f for f in members if len(adj[f]) <= 1)
        is_loop = not endpoints
        start = endpoints[0] if endpoints else min(members)
        chain = [start]
        prev = None
        cur = start
        while True:
            nxt = None
            for g in adj[cur]:
                if g != prev and (g != start or len(chain) > 2):
                    nxt = g
                    break
            if nxt is None or nxt == start:
                break
            chain.append(nxt)
            prev, cur = cur, nxt
        if len(chain) != len(members):
            raise TopologyError("component is not a simple path or cycle")
        components.append(chain)
        loops.append(is_loop)

    order = sorted(range(len(components)), key=lambda k: components[k][0])
    nodes = {f: crossing_point(f, ff, dx, dy, dt) for f in positives}
    return TrajectoryGraph(
        nodes=nodes,
        edges=frozenset(edges),
        components=[components[k] for k in order],
        loops=[loops[k] for k in order],
    )


@dataclass(frozen=True)
class VerifyReport:
    cr: float
    psnr: float
    max_abs_err: float
    fc_t: int            # slice faces whose predicate flipped
    fc_s: int            # slab faces whose predicate flipped
    n_traj_orig: int
    n_traj_recon: int
    isomorphic: bool     # identical node AND edge sets

    @property
    def ok(self) -> bool:
        return self.fc_t == 0 and self.fc_s == 0 and self.isomorphic

    def lines(self):
        yield f"fc_t={self.fc_t}"
        yield f"fc_s={self.fc_s}"
        yield f"n_traj_orig={self.n_traj_orig}"
        yield f"n_traj_recon={self.n_traj_recon}"
        yield f"isomorphic={str(self.isomorphic).lower()}"
        yield f"cr={self.cr:.6g}"
        yield f"psnr={self.psnr:.6g}"
        yield f"max_abs_err={self.max_abs_err:.6g}"


def verify(orig: FieldSeries, recon: FieldSeries,
           archive_size: int | None = None,
           scale: float | None = None) -> VerifyReport:
    """Compare predicates and trajectory graphs at a common fixed-point scale.

    `scale` should come from the archive header; when omitted it defaults to
    the automatic scale of the original (identical to what compression used).
    """
    if (orig.H, orig.W, orig.T) != (recon.H, recon.W, recon.T):
        raise ValueError("dimension mismatch between original and reconstruction")
    ff_o = to_fixed(orig, scale=scale)
    ff_r = to_fixed(recon, scale=ff_o.scale)
    cfs_o = build_critical_face_set(ff_o)
    cfs_r = build_critical_face_set(ff_r)
    fc_t = len(cfs_o.slice_faces ^ cfs_r.slice_faces)
    fc_s = len(cfs_o.slab_faces ^ cfs_r.slab_faces)
    g_o = extract_trajectories(ff_o, orig.dx, orig.dy, orig.dt, cfs=cfs_o)
    g_r = extract_trajectories(ff_r, orig.dx, orig.dy, orig.dt, cfs=cfs_r)
    iso = (set(g_o.nodes) == set(g_r.nodes)) and (g_o.edges == g_r.edges)
    q = psnr(orig, recon, archive_size)
    return VerifyReport(
        cr=q.cr, psnr=q.psnr_joint, max_abs_err=q.max_abs_err,
        fc_t=fc_t, fc_s=fc_s,
        n_traj_orig=g_o.n_components, n_traj_recon=g_r.n_components,
        isomorphic=iso,
    )


@dataclass
class ResidualStats:
    """Distribution summaries of a quantization-index stream."""
    folded_pmf: np.ndarray        # P(|idx| = m), m = 0.. (overflow excluded)
    tail_ccdf: np.ndarray         # P(|idx| >= m)
    overflow_rate: float
    run_lengths: np.ndarray       # maximal runs of the center symbol
    run_ccdf: np.ndarray          # P(run >= L), L = 1..max
    run_mean: float
    run_percentiles: dict         # {75: ..., 80: ..., 85: ..., 90: ...}

    def write_pmf_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["magnitude", "pmf", "ccdf"])
            for m, (p, c) in enumerate(zip(self.folded_pmf, self.tail_ccdf)):
                w.writerow([m, f"{p:.10g}", f"{c:.10g}"])

    def write_runs_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run_length", "ccdf"])
            for L, c in enumerate(self.run_ccdf, start=1):
                w.writerow([L, f"{c:.10g}"])
            w.writerow([])
            w.writerow(["mean", f"{self.run_mean:.10g}"])
            for q, val in sorted(self.run_percentiles.items()):
                w.writerow([f"p{q}", f"{val:.10g}"])


def residual_stats(symbols: np.ndarray, radius: int) -> ResidualStats:
    """Summarize a raw residual symbol stream (0 = overflow escape)."""
    symbols = np.asarray(symbols, dtype=np.int64)
    overflow = symbols == 0
    mags = np.abs(symbols[~overflow] - radius)
    n = mags.size
    if n:
        counts = np.bincount(mags)
        pmf = counts / n
        ccdf = pmf[::-1].cumsum()[::-1]
    else:
        pmf = np.array([0.0])
        ccdf = np.array([0.0])

    # maximal runs of the center symbol (signed index 0) in stream order
    is_center = symbols == radius
    runs = []
    cur = 0
    for c in is_center:
        if c:
            cur += 1
        elif cur:
            runs.append(cur)
            cur = 0
    if cur:
        runs.append(cur)
    runs = np.asarray(runs, dtype=np.int64)
    if runs.size:
        max_run = int(runs.max())
        rc = np.bincount(runs, minlength=max_run + 1)[1:]
        run_ccdf = rc[::-1].cumsum()[::-1] / runs.size
        mean = float(runs.mean())
        pct = {q: float(np.percentile(runs, q)) for q in (75, 80, 85, 90)}
    else:
        run_ccdf = np.array([0.0])
        mean = 0.0
        pct = {q: 0.0 for q in (75, 80, 85, 90)}
    ov_rate = float(overflow.mean()) if symbols.size else 0.0
    return ResidualStats(folded_pmf=pmf, tail_ccdf=ccdf, overflow_rate=ov_rate,
                         run_lengths=runs, run_ccdf=run_ccdf, run_mean=mean,
                         run_percentiles=pct)


def write_trajectory_csv(graph: TrajectoryGraph, path) -> None:
    """component id, ordered crossing points, loop flag."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "x", "y", "t", "loop"])
        for k, chain in enumerate(graph.components):
            flag = int(graph.loops[k])
            for f in chain:
                x, y, t = graph.nodes[f]
                w.writerow([k, f"{x:.9g}", f"{y:.9g}", f"{t:.9g}", flag])
