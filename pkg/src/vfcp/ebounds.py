"""Per-face sufficient error bounds and per-vertex minimum bounds.

`derive_triangle_eb` is the textbook real-valued derivation (ratio bounds
plus same-sign branches).  Its branches are individually motivated but they
do not compose soundly: one vertex may consume a large ratio allowance and
flip its sign while another vertex's allowance was justified by that very
sign.  The pipeline therefore uses a geometric bound that is sound by
construction: the L-infinity distance D from the origin to the triangle of
value vectors.  Perturbing every component by at most eb moves every convex
combination of the vertices by at most eb in the same norm, so with eb
strictly below D the origin can never enter the hull and a negative face
stays negative.  Positive faces are forced lossless, so they are exact.

Pipeline bounds are the largest integer STRICTLY below D, evaluated in
exact integer arithmetic: strictness matters because a perturbation of
exactly D can land the origin on the hull boundary, handing the decision to
the symbolic tie-breaker.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .field import FixedField
from .mesh import face_classes, incident_faces
from .predicates import CriticalFaceSet

_EB_INF = np.int64(1 << 62)


def derive_triangle_eb(u0, u1, u2, v0, v1, v2) -> float:
    """Real-valued textbook bound for one triangle (vertex 2 = target).

    Kept as the documented reference derivation; the pipeline uses
    face_eb_sound instead (see module docstring).
    """
    m0 = u2 * v0 - u0 * v2
    m1 = u1 * v2 - u2 * v1
    m2 = u0 * v1 - u1 * v0
    m = m0 + m1 + m2
    if m == 0:
        return 0.0
    eb = abs(m) / (abs(u1 - u0) + abs(v0 - v1))
    if abs(u1) + abs(v1) != 0:
        eb = min(eb, abs(m1) / (abs(u1) + abs(v1)))
    else:
        return 0.0
    if abs(u0) + abs(v0) != 0:
        eb = min(eb, abs(m0) / (abs(u0) + abs(v0)))
    else:
        return 0.0
    if (u0 > 0 and u1 > 0 and u2 > 0) or (u0 < 0 and u1 < 0 and u2 < 0):
        eb = max(eb, abs(u2))
    if (v0 > 0 and v1 > 0 and v2 > 0) or (v0 < 0 and v1 < 0 and v2 < 0):
        eb = max(eb, abs(v2))
    return float(eb)


def _edge_eb_py(px, py, qx, qy) -> int:
    """Largest int strictly below the L-inf origin-to-segment distance.

    Exact: the distance is a min of rationals evaluated at the segment
    endpoints and at the breakpoints of max(|x(t)|, |y(t)|).
    """
    dx, dy = qx - px, qy - py
    best = max(abs(px), abs(py)) - 1
    best = min(best, max(abs(qx), abs(qy)) - 1)
    events = []
    if dx != 0:
        events.append((-px, dx))
    if dy != 0:
        events.append((-py, dy))
    if dx != dy:
        events.append((py - px, dx - dy))
    if dx + dy != 0:
        events.append((-(px + py), dx + dy))
    for n, d in events:
        if d < 0:
            n, d = -n, -d
        if 0 <= n <= d:
            a = max(abs(px * d + n * dx), abs(py * d + n * dy))
            best = min(best, (a - 1) // d)
    return best


def face_eb_sound(u0, u1, u2, v0, v1, v2) -> int:
    """Uniform per-face bound: largest int strictly below the L-inf
    distance from the origin to the triangle of value vectors (exact ints,
    pure-Python reference for the compiled kernel)."""
    u0, u1, u2 = int(u0), int(u1), int(u2)
    v0, v1, v2 = int(v0), int(v1), int(v2)
    e = min(_edge_eb_py(u0, v0, u1, v1),
            _edge_eb_py(u1, v1, u2, v2),
            _edge_eb_py(u2, v2, u0, v0))
    return max(e, 0)


@njit(cache=True, inline="always")
def _edge_eb(px, py, qx, qy):
    """Compiled twin of _edge_eb_py; |coords| < 2^30 keeps terms in int64."""
    dx = qx - px
    dy = qy - py
    best = max(abs(px), abs(py)) - np.int64(1)
    e1 = max(abs(qx), abs(qy)) - np.int64(1)
    if e1 < best:
        best = e1
    for which in range(4):
        if which == 0:
            if dx == 0:
                continue
            n, d = -px, dx
        elif which == 1:
            if dy == 0:
                continue
            n, d = -py, dy
        elif which == 2:
            if dx == dy:
                continue
            n, d = py - px, dx - dy
        else:
            if dx + dy == 0:
                continue
            n, d = -(px + py), dx + dy
        if d < 0:
            n, d = -n, -d
        if 0 <= n <= d:
            a = max(abs(px * d + n * dx), abs(py * d + n * dy))
            e = (a - np.int64(1)) // d
            if e < best:
                best = e
    return best


@njit(cache=True, inline="always")
def _eb_one(u0, v0, u1, v1, u2, v2):
    e = _edge_eb(u0, v0, u1, v1)
    e1 = _edge_eb(u1, v1, u2, v2)
    if e1 < e:
        e = e1
    e1 = _edge_eb(u2, v2, u0, v0)
    if e1 < e:
        e = e1
    if e < 0:
        e = np.int64(0)
    return e


@njit(cache=True)
def _eb_scan(u, v, A, B, C, xi):
    """Scatter-min of the uniform per-face bound into all three vertices."""
    for k in range(A.size):
        a, b, c = A[k], B[k], C[k]
        e = _eb_one(u[a], v[a], u[b], v[b], u[c], v[c])
        if e < xi[a]:
            xi[a] = e
        if e < xi[b]:
            xi[b] = e
        if e < xi[c]:
            xi[c] = e


@dataclass(frozen=True)
class EbAssignment:
    xi: np.ndarray        # int64 per-vertex bound in fixed units
    lossless: np.ndarray  # bool per-vertex, xi == 0
    tau_prime: int

    @property
    def lossless_count(self) -> int:
        return int(self.lossless.sum())


def derive_vertex_eb(v, ff: FixedField, C: CriticalFaceSet, tau_prime: int):
    """Scalar per-vertex derivation over the full incident face set."""
    u, w = ff.u_fp, ff.v_fp
    members = C.members
    xi = int(tau_prime)
    for f in incident_faces(v, ff.H, ff.W, ff.T):
        if f in members:
            return 0, True
        a, b, c = f
        e = face_eb_sound(u[a], u[b], u[c], w[a], w[b], w[c])
        xi = min(xi, e)
    return xi, xi == 0


def derive_all(ff: FixedField, C: CriticalFaceSet, tau_prime: int) -> EbAssignment:
    """Per-vertex bounds over every face of the mesh.

    Equivalent to running derive_vertex_eb for each vertex: every face
    containing v belongs to a tet incident to v, so the per-face scatter-min
    covers exactly the incident set.  Vertices of positive faces are zeroed
    afterwards (each of the three would hit the immediate-return branch).
    """
    n = ff.n_samples
    xi = np.full(n, int(tau_prime), dtype=np.int64)
    uf, vf = ff.u_fp, ff.v_fp
    for _, _, A, B, C_ in face_classes(ff.H, ff.W, ff.T):
        _eb_scan(uf, vf, A, B, C_, xi)
    for f in C.members:
        for w in f:
            xi[w] = 0
    return EbAssignment(xi=xi, lossless=xi == 0, tau_prime=int(tau_prime))
