"""End-to-end acceptance suite.

The sweep fixture runs the full grid of generator kinds x dims x seeds x
error bounds x predictors once and every topology/rate criterion is asserted
against its collected results.  Original-side topology is computed once per
field and reused across the 12 codec settings, which keeps the whole sweep
inside its wall-clock budget; each run still performs a complete compress,
decompress and reconstruction-side comparison.
"""

import random
import time
import tracemalloc
from dataclasses import dataclass
from itertools import product

import numpy as np
import pytest

from vfcp import (Archive, CflFactors, Config, MopConfig, build_critical_face_set,
                  compress, decompress, decompress_with_stats,
                  derive_all, entropy_h0, extract_trajectories, face_has_cp_values,
                  gen_synthetic, psnr, select_modes, to_fixed, verify)
from vfcp.mesh import iter_tets, tet_faces
from vfcp.mop import MODE_LORENZO

from conftest import make_fixed
from test_predicates import degenerate_triples, oracle_face, triples

KINDS = ("moving_vortex", "vortex_pair", "translation", "random_fourier")
DIMS = ((32, 32, 8), (64, 64, 16), (96, 96, 24))
SEEDS = (0, 1, 2, 3, 4)
EPS_REL = (0.001, 0.01, 0.05, 0.2)
PREDICTORS = ("lorenzo", "sl", "mop")

SWEEP_BUDGET_SECONDS = 300.0


@dataclass(frozen=True)
class RunResult:
    cr: float
    psnr: float
    max_abs_err: float
    eps_abs: float
    fc_t: int
    fc_s: int
    isomorphic: bool

    @property
    def preserved(self) -> bool:
        return self.fc_t == 0 and self.fc_s == 0 and self.isomorphic


@pytest.fixture(scope="module")
def sweep():
    """All 720 runs; per-run topology checks mirror verify() exactly."""
    results = {}
    t0 = time.perf_counter()
    for kind, (H, W, T), seed in product(KINDS, DIMS, SEEDS):
        f = gen_synthetic(kind, H, W, T, seed=seed)
        ff_o = to_fixed(f)
        cfs_o = build_critical_face_set(ff_o)
        g_o = extract_trajectories(ff_o, cfs=cfs_o)
        for pred, eps in product(PREDICTORS, EPS_REL):
            a = compress(f, eps, Config(predictor=pred), relative=True)
            assert a.scale == ff_o.scale
            r = decompress(a)
            ff_r = to_fixed(r, scale=a.scale)
            cfs_r = build_critical_face_set(ff_r)
            g_r = extract_trajectories(ff_r, cfs=cfs_r)
            q = psnr(f, r, a.nbytes)
            results[(kind, (H, W, T), seed, pred, eps)] = RunResult(
                cr=q.cr, psnr=q.psnr_joint, max_abs_err=q.max_abs_err,
                eps_abs=a.eps,
                fc_t=len(cfs_o.slice_faces ^ cfs_r.slice_faces),
                fc_s=len(cfs_o.slab_faces ^ cfs_r.slab_faces),
                isomorphic=(set(g_o.nodes) == set(g_r.nodes)
                            and g_o.edges == g_r.edges),
            )
    elapsed = time.perf_counter() - t0
    return results, elapsed


class TestCriterion1TrajectoryPreservation:
    def test_all_runs_preserve_topology(self, sweep):
        results, _ = sweep
        assert len(results) == 720
        bad = [k for k, r in results.items() if not r.preserved]
        assert not bad, bad[:10]

    def test_within_runtime_budget(self, sweep):
        _, elapsed = sweep
        assert elapsed < SWEEP_BUDGET_SECONDS, f"sweep took {elapsed:.0f}s"


class TestCriterion2ErrorBound:
    def test_max_error_within_eps_on_every_run(self, sweep):
        results, _ = sweep
        for key, r in results.items():
            assert r.max_abs_err <= r.eps_abs, (key, r.max_abs_err, r.eps_abs)


def rational_oracle(pts, ids):
    """Exact-rational origin-in-hull test.

    Generic position: the origin is strictly inside the hull iff all three
    exact barycentric coordinates are strictly positive.  Any vanishing
    sub-determinant falls through to the full symbolic-perturbation oracle.
    """
    (ax, ay), (bx, by), (cx, cy) = (tuple(map(int, p)) for p in pts)
    d_ab = ax * by - ay * bx
    d_bc = bx * cy - by * cx
    d_ca = cx * ay - cy * ax
    if d_ab and d_bc and d_ca:
        df = d_ab + d_bc + d_ca
        if df == 0:
            return oracle_face(pts, ids)
        from fractions import Fraction
        bary = (Fraction(d_bc, df), Fraction(d_ca, df), Fraction(d_ab, df))
        return all(w > 0 for w in bary)
    return oracle_face(pts, ids)


class TestCriterion3PredicateOracle:
    def test_100k_triples_agree_with_exact_rational_oracle(self):
        rng = random.Random(1234)
        n_checked = 0
        for pts in triples(85_000, rng, 10 ** 9):
            ids = sorted(rng.sample(range(10 ** 6), 3))
            assert face_has_cp_values(*pts, *ids) == rational_oracle(pts, ids), pts
            n_checked += 1
        # small coordinate range makes exact ties common; use the full
        # symbolic-perturbation oracle
        for pts in triples(5_000, rng, 6):
            ids = sorted(rng.sample(range(100), 3))
            assert face_has_cp_values(*pts, *ids) == oracle_face(pts, ids), pts
            n_checked += 1
        # forced degeneracies: zeros, duplicated values, collinear, axis hits
        for pts in degenerate_triples(10_000, rng, 8):
            ids = sorted(rng.sample(range(100), 3))
            assert face_has_cp_values(*pts, *ids) == oracle_face(pts, ids), pts
            n_checked += 1
        assert n_checked == 100_000


class TestCriterion4EbSoundness:
    GRID = (4, 4, 3)

    def test_10k_adversarial_perturbations_zero_flips(self):
        rng = np.random.default_rng(2024)
        H, W, T = self.GRID
        n = H * W * T
        n_perturbations = 0
        for g in range(25):
            lim = int(rng.choice([8, 100, 10 ** 6]))
            u = rng.integers(-lim, lim + 1, n)
            v = rng.integers(-lim, lim + 1, n)
            ff = make_fixed(u, v, H, W, T)
            cfs = build_critical_face_set(ff)
            eb = derive_all(ff, cfs, int(rng.choice([3, lim // 2 + 1, 10 ** 8])))
            for _ in range(400):
                du = rng.integers(-eb.xi, eb.xi + 1)
                dv = rng.integers(-eb.xi, eb.xi + 1)
                pf = make_fixed(u + du, v + dv, H, W, T)
                assert build_critical_face_set(pf) == cfs, g
                n_perturbations += 1
        assert n_perturbations == 10_000

    def test_exhaustive_corner_perturbations(self):
        # every +/-xi sign pattern on each face's six components
        rng = np.random.default_rng(7)
        H, W, T = self.GRID
        n = H * W * T
        u = rng.integers(-60, 61, n)
        v = rng.integers(-60, 61, n)
        ff = make_fixed(u, v, H, W, T)
        cfs = build_critical_face_set(ff)
        eb = derive_all(ff, cfs, 10 ** 6)
        from vfcp.mesh import all_faces
        for face in sorted(all_faces(H, W, T)):
            a, b, c = face
            before = face in cfs.members
            xis = [int(eb.xi[a]), int(eb.xi[b]), int(eb.xi[c])]
            for signs in product((-1, 1), repeat=6):
                pu = [int(u[w]) + s * x for w, s, x
                      in zip(face, signs[:3], xis)]
                pv = [int(v[w]) + s * x for w, s, x
                      in zip(face, signs[3:], xis)]
                after = face_has_cp_values((pu[0], pv[0]), (pu[1], pv[1]),
                                           (pu[2], pv[2]), a, b, c)
                assert after == before, (face, signs)


class TestCriterion5SemiLagrangianAdvantage:
    def test_sl_beats_lorenzo_on_translation_at_1pct(self, sweep):
        results, _ = sweep
        for dims, seed in product(DIMS, SEEDS):
            sl = results[("translation", dims, seed, "sl", 0.01)].cr
            lo = results[("translation", dims, seed, "lorenzo", 0.01)].cr
            assert sl > lo, (dims, seed, sl, lo)


class TestCriterion6MopDominance:
    def test_mop_within_3pct_of_best_on_all_kinds_at_1pct(self, sweep):
        results, _ = sweep
        for kind, dims, seed in product(KINDS, DIMS, SEEDS):
            mo = results[(kind, dims, seed, "mop", 0.01)].cr
            best = max(results[(kind, dims, seed, p, 0.01)].cr
                       for p in ("lorenzo", "sl"))
            assert mo >= 0.97 * best, (kind, dims, seed, mo, best)


class TestCriterion7RateEstimator:
    def test_h0_matches_formula_within_1e_12(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            counts = rng.integers(0, 10 ** 6, rng.integers(1, 64))
            pos = counts[counts > 0]
            if pos.size == 0:
                expected = 0.0
            else:
                p = pos / pos.sum()
                expected = float(-(p * np.log2(p)).sum())
            assert abs(entropy_h0(counts) - expected) < 1e-12

    def test_full_overflow_rate_is_lambda_plus_metadata(self):
        cfg = MopConfig(bx=4, by=4, stride=1, lam=16.0)
        rng = np.random.default_rng(1)
        uo = rng.integers(10 ** 6, 10 ** 7, (4, 4))
        z = np.zeros((4, 4), dtype=np.int64)
        _, scores = select_modes(uo.astype(np.int64), uo.astype(np.int64),
                                 z, z, 1, 2, CflFactors(1e-6, 1e-6), cfg)
        assert (scores == cfg.lam + cfg.r_meta).all()

    def test_gate_at_exactly_theta_selects_lorenzo(self):
        # equal rates => relative improvement == theta == 0: gate must not fire
        cfg = MopConfig(bx=8, by=8, theta=0.0)
        c = np.full((8, 8), 21, dtype=np.int64)
        modes, scores = select_modes(c, c, c, c, 16, 1 << 15,
                                     CflFactors(1e-6, 1e-6), cfg)
        assert scores[0, 0, 0] == scores[0, 0, 1]
        assert modes[0, 0] == MODE_LORENZO


class TestCriterion8Lemma1Parity:
    def test_every_tet_has_zero_or_two_crossed_faces(self):
        f = gen_synthetic("moving_vortex", 16, 16, 4, seed=3)
        ff = to_fixed(f)
        positives = build_critical_face_set(ff).members
        crossed_counts = set()
        for tet in iter_tets(ff.H, ff.W, ff.T):
            crossed_counts.add(sum(g in positives for g in tet_faces(tet)))
        assert crossed_counts <= {0, 2}
        assert 2 in crossed_counts  # the vortex actually crosses tets

    def test_parity_enforced_across_sweep(self, sweep):
        # extract_trajectories raises TopologyError on any 1- or 3+-crossed
        # tet; a completed sweep is itself the parity assertion over all runs
        results, _ = sweep
        assert len(results) == 720


class TestCriterion9DeterminismAndStreaming:
    def test_byte_identical_archives(self):
        f = gen_synthetic("random_fourier", 32, 32, 8, seed=2)
        assert compress(f, 0.01, relative=True).to_bytes() == \
            compress(f, 0.01, relative=True).to_bytes()

    def test_decompress_recompress_identical_critical_face_set(self):
        f = gen_synthetic("vortex_pair", 32, 32, 8, seed=1)
        a1 = compress(f, 0.01, relative=True)
        r1 = decompress(a1)
        cfs_orig = build_critical_face_set(to_fixed(f, scale=a1.scale))
        cfs_r1 = build_critical_face_set(to_fixed(r1, scale=a1.scale))
        assert cfs_r1 == cfs_orig
        a2 = compress(r1, a1.eps)  # same absolute bound
        r2 = decompress(a2)
        cfs_r2 = build_critical_face_set(to_fixed(r2, scale=a2.scale))
        cfs_r1_at_a2 = build_critical_face_set(to_fixed(r1, scale=a2.scale))
        assert cfs_r2 == cfs_r1_at_a2

    def test_decoder_streams_two_frames_at_256x256x64(self):
        H, W, T = 256, 256, 64
        f = gen_synthetic("translation", H, W, T, seed=0)
        a = compress(f, 0.01, relative=True)
        blob = a.to_bytes()
        del f, a

        a = Archive.from_bytes(blob)
        tracemalloc.start()
        base, _ = tracemalloc.get_traced_memory()
        recon, ds = decompress_with_stats(a)
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()

        # instrumented contract: two frames of reconstruction state per
        # component, nothing frame-count-dependent beyond output + streams
        assert ds.aux_component_buffers == 4
        assert ds.aux_frames == 2.0
        n = H * W * T
        out_bytes = 2 * n * 8                   # float64 u and v
        stream_bytes = 3 * 2 * n * 8            # decoded symbol/eb/side arrays
        frame_bytes = 4 * H * W * 8             # the streaming window
        budget = out_bytes + stream_bytes + frame_bytes + (64 << 20)
        assert peak - base < budget, (peak - base, budget)
        # a per-frame history would add T * frame_bytes ~ 134 MB on top
        assert recon.u.size == n


class TestCriterion10RateDistortionMonotonicity:
    EPS_CHAIN = (0.001, 0.01, 0.05)

    def test_psnr_decreases_and_cr_increases_for_mop(self, sweep):
        results, _ = sweep
        for kind, dims, seed in product(KINDS, DIMS, SEEDS):
            runs = [results[(kind, dims, seed, "mop", e)]
                    for e in self.EPS_CHAIN]
            crs = [r.cr for r in runs]
            psnrs = [r.psnr for r in runs]
            assert crs[0] < crs[1] < crs[2], (kind, dims, seed, crs)
            assert psnrs[0] > psnrs[1] > psnrs[2], (kind, dims, seed, psnrs)
