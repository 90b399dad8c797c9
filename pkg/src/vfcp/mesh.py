"""Implicit space-time simplicial mesh over the regular grid.

Each frame is triangulated with the v00--v11 diagonal; each triangle is
extruded over a time slab and split into three conforming tetrahedra.
Triangle vertex order is ascending global index, which makes the diagonal
choice on shared prism walls deterministic across neighboring prisms.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np


def vid(t: int, i: int, j: int, H: int, W: int) -> int:
    return t * H * W + i * W + j


def vid_to_tij(v: int, H: int, W: int) -> tuple[int, int, int]:
    hw = H * W
    t, r = divmod(v, hw)
    i, j = divmod(r, W)
    return t, i, j


def cell_triangles(i, j, t, H, W):
    """The two same-time triangles of cell (i, j) at frame t, sorted vertex order."""
    if not (0 <= i < H - 1 and 0 <= j < W - 1):
        raise IndexError(f"cell ({i},{j}) out of range for {H}x{W} grid")
    v00 = vid(t, i, j, H, W)
    v10 = v00 + 1        # (i, j+1)
    v01 = v00 + W        # (i+1, j)
    v11 = v00 + W + 1    # (i+1, j+1)
    return (v00, v01, v11), (v00, v10, v11)


def prism_tets(tri, t, H, W, T):
    """Fixed 3-tet split of the prism extruded from `tri` over slab [t, t+1].

    tri must be in ascending global-index order (a, b, c).  The split is
    tau1=(a,b,c,c'), tau2=(a,b,b',c'), tau3=(a,a',b',c') with primes one
    slab up; neighboring prisms then agree on shared quad-wall diagonals.
    """
    if t >= T - 1:
        raise IndexError(f"slab {t} out of range for T={T}")
    hw = H * W
    a, b, c = tri
    ap, bp, cp = a + hw, b + hw, c + hw
    return ((a, b, c, cp), (a, b, bp, cp), (a, ap, bp, cp))


def tet_faces(tet):
    """The four faces of a tet as sorted FaceKey triples."""
    return [tuple(sorted(f)) for f in combinations(tet, 3)]


def iter_tets(H, W, T):
    """All tets of the space-time mesh, slab by slab."""
    for t in range(T - 1):
        for i in range(H - 1):
            for j in range(W - 1):
                for tri in cell_triangles(i, j, t, H, W):
                    yield from prism_tets(tri, t, H, W, T)


def incident_faces(v, H, W, T):
    """All faces containing v, from tets of the slabs adjacent to v's frame.

    Authoritative definition by tet scan + dedupe (the 6-case enumeration in
    the derivation loop is a subset of this set).  Interior vertices at
    interior times have at most 36 faces.
    """
    t, vi, vj = vid_to_tij(v, H, W)
    faces = set()
    for slab in (t - 1, t):
        if not (0 <= slab < T - 1):
            continue
        for ci in range(max(0, vi - 1), min(H - 1, vi + 1)):
            for cj in range(max(0, vj - 1), min(W - 1, vj + 1)):
                for tri in cell_triangles(ci, cj, slab, H, W):
                    for tet in prism_tets(tri, slab, H, W, T):
                        if v not in tet:
                            continue
                        for f in tet_faces(tet):
                            if v in f:
                                faces.add(f)
    return faces


def _face_classes_iter(H, W, T):
    hw = H * W
    ii, jj = np.meshgrid(np.arange(H - 1, dtype=np.int64),
                         np.arange(W - 1, dtype=np.int64), indexing="ij")
    cell0 = (ii * W + jj).ravel()  # per-frame cell anchors

    frame0 = (np.arange(T, dtype=np.int64) * hw)[:, None]
    v00 = (frame0 + cell0[None, :]).ravel()
    # slice faces, all frames
    yield ("slice_lower", True, v00, v00 + W, v00 + W + 1)
    yield ("slice_upper", True, v00, v00 + 1, v00 + W + 1)

    slab0 = (np.arange(T - 1, dtype=np.int64) * hw)[:, None]

    def spread(anchors):
        return (slab0 + anchors[None, :]).ravel()

    # edges of the per-frame triangulation
    hi, hj = np.meshgrid(np.arange(H, dtype=np.int64),
                         np.arange(W - 1, dtype=np.int64), indexing="ij")
    h_x = spread((hi * W + hj).ravel())
    vi_, vj_ = np.meshgrid(np.arange(H - 1, dtype=np.int64),
                           np.arange(W, dtype=np.int64), indexing="ij")
    v_x = spread((vi_ * W + vj_).ravel())
    d_x = spread(cell0)

    for name, x, y in (("h", h_x, h_x + 1),
                       ("v", v_x, v_x + W),
                       ("d", d_x, d_x + W + 1)):
        yield (f"wall_{name}1", False, x, y, y + hw)
        yield (f"wall_{name}2", False, x, x + hw, y + hw)

    c = spread(cell0)
    # internal faces of the two prisms of each cell
    yield ("int_lower_a", False, c, c + W, c + W + 1 + hw)
    yield ("int_lower_b", False, c, c + W + hw, c + W + 1 + hw)
    yield ("int_upper_a", False, c, c + 1, c + W + 1 + hw)
    yield ("int_upper_b", False, c, c + 1 + hw, c + W + 1 + hw)


_CLASS_CACHE: dict = {}
_CACHE_SAMPLE_LIMIT = 2_000_000  # keep cached index arrays modest


def face_classes(H, W, T):
    """Every face of the mesh as vectorized classes, without duplicates.

    Returns a list of (name, is_slice, A, B, C) where A < B < C are int64
    vertex-id arrays.  Slice faces are the per-frame triangles; slab faces
    are the prism walls (two per triangulation edge) and the two internal
    splitting faces per prism.  Small meshes are cached.
    """
    key = (H, W, T)
    cached = _CLASS_CACHE.get(key)
    if cached is not None:
        return cached
    classes = list(_face_classes_iter(H, W, T))
    if H * W * T <= _CACHE_SAMPLE_LIMIT:
        _CLASS_CACHE[key] = classes
    return classes


def all_faces(H, W, T):
    """Every FaceKey of the mesh as a set (test/oracle helper)."""
    out = set()
    for _, _, a, b, c in face_classes(H, W, T):
        out.update(zip(a.tolist(), b.tolist(), c.tolist()))
    return out
