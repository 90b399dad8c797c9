import random
from fractions import Fraction

import numpy as np
import pytest

from vfcp import (build_critical_face_set, derive_all, derive_triangle_eb,
                  derive_vertex_eb, face_eb_sound, face_has_cp_values,
                  to_fixed)
from vfcp.ebounds import _eb_one
from vfcp.mesh import vid

from conftest import make_fixed


def linf_segment_distance(px, py, qx, qy):
    """Exact L-inf distance from the origin to segment [p, q] (Fraction).

    min over t in [0,1] of max(|p + t(q-p)|) is piecewise linear; evaluate at
    the endpoints and at every breakpoint of either |coordinate| and of the
    two |x| = |y| crossings.
    """
    dx, dy = qx - px, qy - py
    cands = [Fraction(0), Fraction(1)]
    if dx:
        cands.append(Fraction(-px, dx))
    if dy:
        cands.append(Fraction(-py, dy))
    if dx != dy:
        cands.append(Fraction(py - px, dx - dy))
    if dx + dy:
        cands.append(Fraction(-(px + py), dx + dy))
    vals = [max(abs(px + t * dx), abs(py + t * dy))
            for t in cands if 0 <= t <= 1]
    return min(vals)


def linf_triangle_distance(pts):
    return min(linf_segment_distance(*p, *q)
               for p, q in ((pts[0], pts[1]), (pts[1], pts[2]),
                            (pts[2], pts[0])))


class TestReferenceDerivation:
    def test_documented_example_exact(self):
        assert derive_triangle_eb(2, -1, -1, 0, 1, -1) == 1.0

    def test_same_sign_branch_dominates(self):
        assert derive_triangle_eb(5, 4, 3, 1, 2, 1) >= 3.0

    def test_degenerate_returns_zero(self):
        # collinear value vectors: M = 0
        assert derive_triangle_eb(1, 2, 3, 1, 2, 3) == 0.0

    def test_zero_vertex_returns_zero(self):
        assert derive_triangle_eb(0, 2, 1, 0, 1, 2) == 0.0


class TestSoundFaceBound:
    def test_strictly_below_exact_distance(self):
        rng = random.Random(31)
        for _ in range(3000):
            lim = rng.choice([3, 20, 1 << 12, (1 << 30) - 1])
            pts = [(rng.randint(-lim, lim), rng.randint(-lim, lim))
                   for _ in range(3)]
            (u0, v0), (u1, v1), (u2, v2) = pts
            e = face_eb_sound(u0, u1, u2, v0, v1, v2)
            d = linf_triangle_distance(pts)
            assert e < d or (e == 0 and d == 0), (pts, e, d)
            assert e + 1 >= d, (pts, e, d)  # tight: largest such integer

    def test_compiled_twin_agrees(self):
        rng = random.Random(7)
        for _ in range(3000):
            lim = rng.choice([2, 50, (1 << 30) - 1])
            vals = [rng.randint(-lim, lim) for _ in range(6)]
            u0, u1, u2, v0, v1, v2 = vals
            a = face_eb_sound(u0, u1, u2, v0, v1, v2)
            b = int(_eb_one(np.int64(u0), np.int64(v0), np.int64(u1),
                            np.int64(v1), np.int64(u2), np.int64(v2)))
            assert a == b, vals

    def test_symmetric_in_vertices(self):
        rng = random.Random(3)
        for _ in range(300):
            u = [rng.randint(-99, 99) for _ in range(3)]
            v = [rng.randint(-99, 99) for _ in range(3)]
            base = face_eb_sound(u[0], u[1], u[2], v[0], v[1], v[2])
            perm = [1, 2, 0]
            assert base == face_eb_sound(*(u[k] for k in perm),
                                         *(v[k] for k in perm))

    def test_touching_origin_forces_lossless(self):
        # origin on an edge: no perturbation allowance at all
        assert face_eb_sound(-2, 2, 5, -2, 2, 1) == 0
        assert face_eb_sound(0, 3, 4, 0, 5, 1) == 0

    def test_perturbations_within_bound_never_flip(self):
        rng = random.Random(19)
        checked = 0
        for _ in range(800):
            lim = rng.choice([4, 100, 1 << 20])
            vals = [rng.randint(-lim, lim) for _ in range(6)]
            u0, u1, u2, v0, v1, v2 = vals
            before = face_has_cp_values((u0, v0), (u1, v1), (u2, v2), 0, 1, 2)
            if before:
                continue
            e = face_eb_sound(u0, u1, u2, v0, v1, v2)
            if e == 0:
                continue
            checked += 1
            deltas = [[rng.randint(-e, e) for _ in range(6)]
                      for _ in range(20)]
            deltas += [[e] * 6, [-e] * 6, [e, -e, e, -e, e, -e],
                       [-e, e, -e, e, -e, e]]
            for d in deltas:
                p = [x + dd for x, dd in zip(vals, d)]
                after = face_has_cp_values((p[0], p[3]), (p[1], p[4]),
                                           (p[2], p[5]), 0, 1, 2)
                assert not after, (vals, e, d)
        assert checked > 100


@pytest.fixture(scope="module")
def small(vortex_small):
    ff = to_fixed(vortex_small)
    cfs = build_critical_face_set(ff)
    tau = 1 << 16
    return ff, cfs, derive_all(ff, cfs, tau), tau


class TestVertexBounds:

    def test_capped_by_tau(self, small):
        _, _, eb, tau = small
        assert (eb.xi <= tau).all() and (eb.xi >= 0).all()
        assert eb.tau_prime == tau

    def test_positive_face_vertices_lossless(self, small):
        _, cfs, eb, _ = small
        for f in cfs.members:
            for v in f:
                assert eb.xi[v] == 0 and eb.lossless[v]

    def test_matches_scalar_derivation(self, small):
        ff, cfs, eb, tau = small
        rng = random.Random(2)
        sample = rng.sample(range(ff.n_samples), 60)
        sample += [v for f in list(cfs.members)[:5] for v in f]
        for v in sample:
            xi, lossless = derive_vertex_eb(v, ff, cfs, tau)
            assert xi == eb.xi[v] and lossless == bool(eb.lossless[v]), v

    def test_translation_not_everything_lossless(self, translation_small):
        ff = to_fixed(translation_small)
        cfs = build_critical_face_set(ff)
        eb = derive_all(ff, cfs, 1 << 20)
        assert eb.lossless_count < ff.n_samples // 2

    def test_zero_tau_all_lossless(self, vortex_small):
        ff = to_fixed(vortex_small)
        cfs = build_critical_face_set(ff)
        eb = derive_all(ff, cfs, 0)
        assert eb.lossless_count == ff.n_samples


class TestGridSoundness:
    def test_random_grid_perturbations_preserve_all_predicates(self):
        # randomized adversarial oracle on small grids (unit-sized version
        # of the acceptance run)
        rng = np.random.default_rng(99)
        H, W, T = 4, 4, 3
        n = H * W * T
        for _ in range(10):
            u = rng.integers(-50, 51, n)
            v = rng.integers(-50, 51, n)
            ff = make_fixed(u, v, H, W, T)
            cfs = build_critical_face_set(ff)
            eb = derive_all(ff, cfs, 10 ** 6)
            for _ in range(30):
                du = rng.integers(-eb.xi, eb.xi + 1)
                dv = rng.integers(-eb.xi, eb.xi + 1)
                pf = make_fixed(u + du, v + dv, H, W, T)
                assert build_critical_face_set(pf) == cfs
