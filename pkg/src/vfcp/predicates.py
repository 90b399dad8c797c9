"""Exact, degeneracy-free predicates on fixed-point vector values.

The face-level test asks whether the origin lies in the convex hull of the
three vertex VALUE vectors.  Ties are broken by simulation of simplicity:
the value of the vertex with global id k is symbolically perturbed, smaller
ids by larger epsilons, the virtual origin (id -1) most of all.  Every
determinant is evaluated in exact (arbitrary-precision) integer arithmetic,
so the outcome is deterministic under all degeneracies and never zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

from .field import FixedField
from .mesh import face_classes


def _det3(r0, r1, r2):
    """Determinant of three (x, y, w) rows, exact ints."""
    (a, b, c), (d, e, f), (g, h, i) = r0, r1, r2
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


# row choices in the perturbation expansion: original, +eps in x, +eps in y
_CHOICES = (None, 0, 1)
_UNIT = {0: (1, 0, 0), 1: (0, 1, 0)}


def orient2_sos(p0, p1, p2, id0, id1, id2) -> int:
    """Sign (+1/-1) of the homogeneous 3x3 orientation determinant under SoS.

    Points are integer 2-vectors; ids must be distinct.  A zero determinant
    is resolved by expanding the determinant of the perturbed points and
    returning the sign of the dominant nonzero term; the term order follows
    the graded perturbation schedule (smaller id => larger epsilon, x before
    y within a point).
    """
    if id0 == id1 or id1 == id2 or id0 == id2:
        raise ValueError(f"duplicate ids in orientation test: {id0},{id1},{id2}")
    x0, y0 = int(p0[0]), int(p0[1])
    x1, y1 = int(p1[0]), int(p1[1])
    x2, y2 = int(p2[0]), int(p2[1])
    det = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if det > 0:
        return 1
    if det < 0:
        return -1

    # canonical row order: ascending id, flip sign for odd permutation parity
    rows = sorted(((id0, (x0, y0, 1)), (id1, (x1, y1, 1)), (id2, (x2, y2, 1))))
    order = sorted(range(3), key=[id0, id1, id2].__getitem__)
    parity = 1
    perm = list(order)
    for i in range(3):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            parity = -parity

    ids = [r[0] for r in rows]
    pts = [r[1] for r in rows]
    terms = []
    for c0 in _CHOICES:
        for c1 in _CHOICES:
            for c2 in _CHOICES:
                choices = (c0, c1, c2)
                factors = tuple((ids[r], choices[r]) for r in range(3)
                                if choices[r] is not None)
                if not factors:
                    continue  # the unperturbed determinant, already zero
                mat = [pts[r] if choices[r] is None else _UNIT[choices[r]]
                       for r in range(3)]
                coeff = _det3(*mat)
                if coeff:
                    # epsilon exponent sum compares like its descending rank tuple
                    key = tuple(sorted(factors, reverse=True))
                    terms.append((key, coeff))
    key, coeff = min(terms)
    return parity * (1 if coeff > 0 else -1)


def face_has_cp_values(va, vb, vc, ida, idb, idc) -> bool:
    """Robust inside-origin test on three value vectors (Alg.-2 style).

    Fast path: if the three pairwise determinants are all nonzero the SoS
    outcome equals the plain sign test.  Otherwise run the full consistency
    test with the origin carrying virtual id -1.
    """
    uxa, uya = int(va[0]), int(va[1])
    uxb, uyb = int(vb[0]), int(vb[1])
    uxc, uyc = int(vc[0]), int(vc[1])
    d1 = uxa * uyb - uya * uxb  # det(a, b)
    d2 = uxb * uyc - uyb * uxc  # det(b, c)
    d3 = uxc * uya - uyc * uxa  # det(c, a)
    if d1 and d2 and d3:
        return (d1 > 0) == (d2 > 0) == (d3 > 0)

    pts = ((uxa, uya), (uxb, uyb), (uxc, uyc))
    ids = (ida, idb, idc)
    s = orient2_sos(*pts, *ids)
    origin = (0, 0)
    for i in range(3):
        q = [pts[0], pts[1], pts[2]]
        qid = [ids[0], ids[1], ids[2]]
        q[i] = origin
        qid[i] = -1
        if orient2_sos(*q, *qid) != s:
            return False
    return True


def face_has_cp(face, ff: FixedField) -> bool:
    """Predicate P_f for a FaceKey on a fixed field."""
    a, b, c = face
    u, v = ff.u_fp, ff.v_fp
    return face_has_cp_values(
        (u[a], v[a]), (u[b], v[b]), (u[c], v[c]), a, b, c)


def origin_barycentric(a, b, c):
    """Exact rational barycentric coordinates of the origin w.r.t. values a,b,c.

    Valid when the face tests positive; (alpha, beta, gamma) sum to 1 exactly.
    """
    d_ab = int(a[0]) * int(b[1]) - int(a[1]) * int(b[0])
    d_bc = int(b[0]) * int(c[1]) - int(b[1]) * int(c[0])
    d_ca = int(c[0]) * int(a[1]) - int(c[1]) * int(a[0])
    df = d_ab + d_bc + d_ca
    assert df != 0, "degenerate positive face: SoS forbids D_f = 0"
    return (Fraction(d_bc, df), Fraction(d_ca, df), Fraction(d_ab, df))


@dataclass(frozen=True)
class CriticalFaceSet:
    """Faces flagged positive on the ORIGINAL fixed-point data."""
    slice_faces: frozenset
    slab_faces: frozenset
    scale: float = field(default=1.0, compare=False)

    @property
    def members(self) -> frozenset:
        return self.slice_faces | self.slab_faces

    def __len__(self):
        return len(self.slice_faces) + len(self.slab_faces)


_PAD = -(1 << 62)  # key padding: shorter factor tuples compare smaller


@njit(cache=True)
def _sos_sign(x0, y0, x1, y1, x2, y2, id0, id1, id2):
    """Compiled twin of orient2_sos for |coords| < 2^30 (terms fit int64)."""
    det = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if det > 0:
        return 1
    if det < 0:
        return -1
    # sort rows by id (insertion sort on 3), tracking permutation parity
    ids = np.empty(3, dtype=np.int64)
    xs = np.empty(3, dtype=np.int64)
    ys = np.empty(3, dtype=np.int64)
    ids[0], ids[1], ids[2] = id0, id1, id2
    xs[0], xs[1], xs[2] = x0, x1, x2
    ys[0], ys[1], ys[2] = y0, y1, y2
    parity = 1
    for i in range(1, 3):
        k = i
        while k > 0 and ids[k - 1] > ids[k]:
            ids[k - 1], ids[k] = ids[k], ids[k - 1]
            xs[k - 1], xs[k] = xs[k], xs[k - 1]
            ys[k - 1], ys[k] = ys[k], ys[k - 1]
            parity = -parity
            k -= 1

    best0 = np.int64(1 << 62)
    best1 = np.int64(0)
    best2 = np.int64(0)
    best_coeff = np.int64(0)
    # choice per row: -1 original, 0 x-unit, 1 y-unit
    for c0 in range(-1, 2):
        for c1 in range(-1, 2):
            for c2 in range(-1, 2):
                if c0 == -1 and c1 == -1 and c2 == -1:
                    continue
                # rows as (rx, ry, rw)
                if c0 == -1:
                    a0, a1, a2 = xs[0], ys[0], np.int64(1)
                elif c0 == 0:
                    a0, a1, a2 = np.int64(1), np.int64(0), np.int64(0)
                else:
                    a0, a1, a2 = np.int64(0), np.int64(1), np.int64(0)
                if c1 == -1:
                    b0, b1, b2 = xs[1], ys[1], np.int64(1)
                elif c1 == 0:
                    b0, b1, b2 = np.int64(1), np.int64(0), np.int64(0)
                else:
                    b0, b1, b2 = np.int64(0), np.int64(1), np.int64(0)
                if c2 == -1:
                    d0, d1, d2 = xs[2], ys[2], np.int64(1)
                elif c2 == 0:
                    d0, d1, d2 = np.int64(1), np.int64(0), np.int64(0)
                else:
                    d0, d1, d2 = np.int64(0), np.int64(1), np.int64(0)
                coeff = (a0 * (b1 * d2 - b2 * d1)
                         - a1 * (b0 * d2 - b2 * d0)
                         + a2 * (b0 * d1 - b1 * d0))
                if coeff == 0:
                    continue
                # factor codes 2*id+choice, descending with padding
                k0 = np.int64(_PAD)
                k1 = np.int64(_PAD)
                k2 = np.int64(_PAD)
                nf = 0
                if c0 != -1:
                    k0 = 2 * ids[0] + c0
                    nf = 1
                if c1 != -1:
                    f = 2 * ids[1] + c1
                    if nf == 0:
                        k0 = f
                    else:
                        k1 = f
                    nf += 1
                if c2 != -1:
                    f = 2 * ids[2] + c2
                    if nf == 0:
                        k0 = f
                    elif nf == 1:
                        k1 = f
                    else:
                        k2 = f
                    nf += 1
                # sort the (at most 3) codes descending
                if k1 > k0:
                    k0, k1 = k1, k0
                if k2 > k1:
                    k1, k2 = k2, k1
                if k1 > k0:
                    k0, k1 = k1, k0
                smaller = (k0 < best0
                           or (k0 == best0 and k1 < best1)
                           or (k0 == best0 and k1 == best1 and k2 < best2))
                if smaller:
                    best0, best1, best2 = k0, k1, k2
                    best_coeff = coeff
    if best_coeff > 0:
        return parity
    return -parity


@njit(cache=True)
def _face_cp_sos(ua, va, ub, vb, uc, vc, ida, idb, idc):
    """Compiled Alg.-2 consistency test (origin carries virtual id -1)."""
    s = _sos_sign(ua, va, ub, vb, uc, vc, ida, idb, idc)
    if _sos_sign(0, 0, ub, vb, uc, vc, -1, idb, idc) != s:
        return False
    if _sos_sign(ua, va, 0, 0, uc, vc, ida, -1, idc) != s:
        return False
    if _sos_sign(ua, va, ub, vb, 0, 0, ida, idb, -1) != s:
        return False
    return True


@njit(cache=True)
def _face_scan(u, v, A, B, C, pos):
    """Predicate per face; |values| < 2^30 keeps every term exact in int64.

    Non-degenerate faces take the plain sign test (equivalent to the SoS
    outcome when no determinant vanishes); the rest run the full symbolic
    tie-break inline.
    """
    for k in range(A.size):
        a, b, c = A[k], B[k], C[k]
        d1 = u[a] * v[b] - v[a] * u[b]
        d2 = u[b] * v[c] - v[b] * u[c]
        d3 = u[c] * v[a] - v[c] * u[a]
        if d1 != 0 and d2 != 0 and d3 != 0:
            pos[k] = (d1 > 0 and d2 > 0 and d3 > 0) or \
                     (d1 < 0 and d2 < 0 and d3 < 0)
        else:
            pos[k] = _face_cp_sos(u[a], v[a], u[b], v[b], u[c], v[c], a, b, c)


def build_critical_face_set(ff: FixedField) -> CriticalFaceSet:
    """Test every face of the space-time mesh; keep the positives."""
    uf, vf = ff.u_fp, ff.v_fp
    slice_pos = set()
    slab_pos = set()
    for _, is_slice, A, B, C in face_classes(ff.H, ff.W, ff.T):
        pos = np.zeros(A.size, dtype=np.bool_)
        _face_scan(uf, vf, A, B, C, pos)
        bucket = slice_pos if is_slice else slab_pos
        for idx in np.flatnonzero(pos):
            bucket.add((int(A[idx]), int(B[idx]), int(C[idx])))
    return CriticalFaceSet(frozenset(slice_pos), frozenset(slab_pos), ff.scale)


def crossing_point(face, ff: FixedField, dx=1.0, dy=1.0, dt=1.0):
    """Geometric (x, y, t) of the zero crossing on a positive face."""
    from .mesh import vid_to_tij

    a, b, c = face
    u, v = ff.u_fp, ff.v_fp
    al, be, ga = origin_barycentric((u[a], v[a]), (u[b], v[b]), (u[c], v[c]))
    pos = []
    for w, wgt in ((a, al), (b, be), (c, ga)):
        t, i, j = vid_to_tij(w, ff.H, ff.W)
        pos.append((wgt * j, wgt * i, wgt * t))
    x = float(sum(p[0] for p in pos)) * dx
    y = float(sum(p[1] for p in pos)) * dy
    tt = float(sum(p[2] for p in pos)) * dt
    return (x, y, tt)
