"""Axis-aligned bounding-volume hierarchy over convex planar polygons.

Packing is flat-array so the traversal kernels can be compiled with numba.
Surfaces are referenced by index; a second, small "dynamic" polygon set
(the moving train) is tested by brute force alongside the tree.
"""

from __future__ import annotations

import numba
import numpy as np

LEAF_SIZE = 4
_STACK = 64
_INSIDE_TOL = 1e-9


def pack_polygons(surfaces):
    """Pack surfaces into the arrays used by the kernels.

    Returns a tuple ``(normals, offsets, verts, edge_normals, nverts)``.
    Vertex arrays are padded to the largest polygon; ``edge_normals[s, k]``
    is the in-plane inward normal of edge k, so a point p of the plane is
    inside when ``edge_normals[s, k] @ (p - verts[s, k]) >= 0`` for all k.
    """
    count = len(surfaces)
    kmax = max((len(s.vertices) for s in surfaces), default=3)
    normals = np.zeros((count, 3))
    offsets = np.zeros(count)
    verts = np.zeros((count, kmax, 3))
    enorms = np.zeros((count, kmax, 3))
    nverts = np.zeros(count, dtype=np.int64)
    for i, s in enumerate(surfaces):
        v = s.vertices
        k = len(v)
        normals[i] = s.normal
        offsets[i] = s.offset
        verts[i, :k] = v
        nverts[i] = k
        for j in range(k):
            e = v[(j + 1) % k] - v[j]
            m = np.cross(s.normal, e)
            enorms[i, j] = m / np.linalg.norm(m)
    return normals, offsets, verts, enorms, nverts


def build_bvh(surfaces):
    """Median-split BVH over surface bounding boxes.

    Returns ``(node_lo, node_hi, left, right, start, count, prims)``; a node
    with ``left == -1`` is a leaf covering ``prims[start:start + count]``.
    """
    n = len(surfaces)
    lo = np.array([s.vertices.min(axis=0) for s in surfaces]).reshape(n, 3)
    hi = np.array([s.vertices.max(axis=0) for s in surfaces]).reshape(n, 3)
    cent = 0.5 * (lo + hi)
    prims = np.arange(n, dtype=np.int64)
    nodes = []  # (lo, hi, left, right, start, count)

    def build(begin, end):
        idx = len(nodes)
        sel = prims[begin:end]
        nodes.append(None)
        blo = lo[sel].min(axis=0) if len(sel) else np.zeros(3)
        bhi = hi[sel].max(axis=0) if len(sel) else np.zeros(3)
        if end - begin <= LEAF_SIZE:
            nodes[idx] = (blo, bhi, -1, -1, begin, end - begin)
            return idx
        ext = cent[sel].max(axis=0) - cent[sel].min(axis=0)
        axis = int(np.argmax(ext))
        # Stable sort keeps the tree identical across runs.
        order = np.argsort(cent[sel, axis], kind="stable")
        prims[begin:end] = sel[order]
        mid = (begin + end) // 2
        left = build(begin, mid)
        right = build(mid, end)
        nodes[idx] = (blo, bhi, left, right, begin, end - begin)
        return idx

    build(0, n)
    node_lo = np.array([nd[0] for nd in nodes]).reshape(-1, 3)
    node_hi = np.array([nd[1] for nd in nodes]).reshape(-1, 3)
    left = np.array([nd[2] for nd in nodes], dtype=np.int64)
    right = np.array([nd[3] for nd in nodes], dtype=np.int64)
    start = np.array([nd[4] for nd in nodes], dtype=np.int64)
    count = np.array([nd[5] for nd in nodes], dtype=np.int64)
    return node_lo, node_hi, left, right, start, count, prims


@numba.njit(cache=True)
def _poly_t(s, ox, oy, oz, dx, dy, dz, normals, offsets, verts, enorms, nverts):
    """Ray parameter of the hit on polygon ``s``, or -1.0 when missed."""
    nx, ny, nz = normals[s, 0], normals[s, 1], normals[s, 2]
    den = nx * dx + ny * dy + nz * dz
    if abs(den) < 1e-14:
        return -1.0
    t = (offsets[s] - (nx * ox + ny * oy + nz * oz)) / den
    px, py, pz = ox + t * dx, oy + t * dy, oz + t * dz
    for k in range(nverts[s]):
        m = (enorms[s, k, 0] * (px - verts[s, k, 0]) + enorms[s, k, 1] * (py - verts[s, k, 1])
             + enorms[s, k, 2] * (pz - verts[s, k, 2]))
        if m < -_INSIDE_TOL:
            return -1.0
    return t


@numba.njit(cache=True)
def _box_hit(lo, hi, ox, oy, oz, dx, dy, dz, tmin, tmax):
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    t0, t1 = tmin, tmax
    for a in range(3):
        if abs(d[a]) < 1e-300:
            if o[a] < lo[a] - 1e-9 or o[a] > hi[a] + 1e-9:
                return False
            continue
        inv = 1.0 / d[a]
        ta = (lo[a] - 1e-9 - o[a]) * inv
        tb = (hi[a] + 1e-9 - o[a]) * inv
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
        if t0 > t1:
            return False
    return True


@numba.njit(cache=True)
def nearest_hit(o, d, tmin, tmax, excl0, excl1, bvh, geom, dyn):
    """Closest polygon hit with ``tmin < t < tmax`` along ``o + t d``.

    ``excl0``/``excl1`` are surface indices to ignore (-1 for none); dynamic
    surfaces are numbered after the static ones. Returns ``(index, t)``
    with index -1 when nothing is hit.
    """
    node_lo, node_hi, left, right, start, count, prims = bvh
    normals, offsets, verts, enorms, nverts = geom
    ox, oy, oz = o[0], o[1], o[2]
    dx, dy, dz = d[0], d[1], d[2]
    best = -1
    best_t = tmax
    if node_lo.shape[0] > 0 and count[0] > 0:
        stack = np.empty(_STACK, dtype=np.int64)
        sp = 0
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            nd = stack[sp]
            if not _box_hit(node_lo[nd], node_hi[nd], ox, oy, oz, dx, dy, dz, tmin, best_t):
                continue
            if left[nd] < 0:
                for q in range(start[nd], start[nd] + count[nd]):
                    s = prims[q]
                    if s == excl0 or s == excl1:
                        continue
                    t = _poly_t(s, ox, oy, oz, dx, dy, dz, normals, offsets, verts, enorms, nverts)
                    if t > tmin and t < best_t:
                        best_t = t
                        best = s
            else:
                stack[sp] = left[nd]
                stack[sp + 1] = right[nd]
                sp += 2
    dn, doff, dv, de, dk = dyn
    base = normals.shape[0]
    for s in range(dn.shape[0]):
        if s + base == excl0 or s + base == excl1:
            continue
        t = _poly_t(s, ox, oy, oz, dx, dy, dz, dn, doff, dv, de, dk)
        if t > tmin and t < best_t:
            best_t = t
            best = s + base
    return best, best_t


@numba.njit(cache=True)
def segments_blocked(p0, p1, excl, eps, bvh, geom, dyn):
    """For each segment ``p0[i] -> p1[i]``, whether any polygon lies strictly between.

    Hits within ``eps`` metres of either endpoint are ignored, as are the
    surfaces listed in ``excl[i]``.
    """
    m = p0.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    d = np.empty(3)
    for i in range(m):
        length = 0.0
        for a in range(3):
            d[a] = p1[i, a] - p0[i, a]
            length += d[a] * d[a]
        length = np.sqrt(length)
        if length <= 2 * eps:
            continue
        for a in range(3):
            d[a] /= length
        s, _ = nearest_hit(p0[i], d, eps, length - eps, excl[i, 0], excl[i, 1], bvh, geom, dyn)
        out[i] = s >= 0
    return out
