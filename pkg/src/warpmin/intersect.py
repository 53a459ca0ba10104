"""Triangle-triangle intersection tests in chart coordinates.

Surfaces are compared as subsets of the chart quotient: each triangle is
canonicalized with its anchor vertex wrapped into the fundamental domain
and the other mesh is additionally tested at the neighboring periodic
images, so contacts across a periodic seam are not missed.

The pair test is the interval method: each triangle is cut by the other
triangle's plane and the two cut segments are compared on their common
line.  Exactly coplanar pairs fall back to a 2D overlap test.  All
near-contacts within `tol` count as intersections, which makes the
disjointness checks conservative.
"""

from __future__ import annotations

import numpy as np

from .mesh import AnnulusMesh, triangle_edge_vectors

__all__ = ["mesh_intersections", "triangle_soup", "pair_segments"]

_PAIR_CHUNK = 65536


def triangle_soup(mesh: AnnulusMesh) -> np.ndarray:
    """Canonical (T, 3, 3) vertex array: anchor wrapped, edges minimal-image."""
    p0 = mesh.points[mesh.tris[:, 0]].copy()
    u, w, _ = triangle_edge_vectors(mesh)
    for k, P in enumerate(mesh.periods):
        if P is not None:
            p0[:, k] -= P * np.floor(p0[:, k] / P)
    return np.stack([p0, p0 + u, p0 + w], axis=1)


def _image_offsets(periods, include_negative: bool) -> list[np.ndarray]:
    offs = [np.zeros(3)]
    for k, P in enumerate(periods):
        if P is None:
            continue
        e = np.zeros(3)
        e[k] = P
        offs.append(e.copy())
        if include_negative:
            offs.append(-e)
    return offs


def _aabbs(V: np.ndarray):
    return V.min(axis=1), V.max(axis=1)


def pair_segments(T1: np.ndarray, T2: np.ndarray, tol: float = 1e-9):
    """Interval intersection test for paired triangles.

    Parameters are (M, 3, 3) vertex arrays.  Returns (mask, P, Q) where
    mask flags intersecting pairs and P, Q are the segment endpoints
    (equal for point contacts).
    """
    M = T1.shape[0]
    mask = np.zeros(M, dtype=bool)
    P = np.zeros((M, 3))
    Q = np.zeros((M, 3))
    if M == 0:
        return mask, P, Q

    N1 = np.cross(T1[:, 1] - T1[:, 0], T1[:, 2] - T1[:, 0])
    N2 = np.cross(T2[:, 1] - T2[:, 0], T2[:, 2] - T2[:, 0])
    n1 = np.linalg.norm(N1, axis=1)
    n2 = np.linalg.norm(N2, axis=1)
    ok = (n1 > 1e-300) & (n2 > 1e-300)
    N1u = np.where(ok[:, None], N1 / np.maximum(n1, 1e-300)[:, None], 0.0)
    N2u = np.where(ok[:, None], N2 / np.maximum(n2, 1e-300)[:, None], 0.0)

    dv = np.einsum("mij,mj->mi", T1 - T2[:, 0:1, :], N2u)
    du = np.einsum("mij,mj->mi", T2 - T1[:, 0:1, :], N1u)
    e = tol
    rej = ok & (np.all(dv > e, axis=1) | np.all(dv < -e, axis=1)
                | np.all(du > e, axis=1) | np.all(du < -e, axis=1))
    coplanar = ok & ~rej & np.all(np.abs(dv) <= e, axis=1)
    D = np.cross(N1u, N2u)
    dnorm = np.linalg.norm(D, axis=1)
    lineal = ok & ~rej & ~coplanar & (dnorm > 1e-12)

    if np.any(lineal):
        s1, x1lo, x1hi, has1 = _plane_cut(T1, dv, D, e)
        s2, x2lo, x2hi, has2 = _plane_cut(T2, du, D, e)
        lo = np.maximum(s1[:, 0], s2[:, 0])
        hi = np.minimum(s1[:, 1], s2[:, 1])
        hit = lineal & has1 & has2 & (hi >= lo - e)
        span = s1[:, 1] - s1[:, 0]
        t_lo = np.where(span > 1e-300, (lo - s1[:, 0]) / np.maximum(span, 1e-300), 0.0)
        t_hi = np.where(span > 1e-300, (hi - s1[:, 0]) / np.maximum(span, 1e-300), 0.0)
        seg = x1hi - x1lo
        P_hit = x1lo + np.clip(t_lo, 0.0, 1.0)[:, None] * seg
        Q_hit = x1lo + np.clip(t_hi, 0.0, 1.0)[:, None] * seg
        mask |= hit
        P[hit] = P_hit[hit]
        Q[hit] = Q_hit[hit]

    if np.any(coplanar):
        for m in np.flatnonzero(coplanar):
            contact, point = _coplanar_contact(T1[m], T2[m], tol)
            if contact:
                mask[m] = True
                P[m] = point
                Q[m] = point
    return mask, P, Q


def _plane_cut(T: np.ndarray, d: np.ndarray, D: np.ndarray, e: float):
    """Cut segment of each triangle with the paired plane.

    Collects vertices lying on the plane and strict edge crossings into
    candidate slots, then returns the extreme points along direction D.
    """
    M = T.shape[0]
    cand = np.zeros((M, 6, 3))
    valid = np.zeros((M, 6), dtype=bool)
    for i in range(3):
        valid[:, i] = np.abs(d[:, i]) <= e
        cand[:, i] = T[:, i]
    for slot, (i, j) in enumerate(((0, 1), (1, 2), (2, 0)), start=3):
        di, dj = d[:, i], d[:, j]
        straddle = ((di > e) & (dj < -e)) | ((di < -e) & (dj > e))
        denom = di - dj
        t = np.where(np.abs(denom) > 1e-300, di / np.where(denom == 0, 1.0, denom), 0.0)
        cand[:, slot] = T[:, i] + t[:, None] * (T[:, j] - T[:, i])
        valid[:, slot] = straddle
    s = np.einsum("msj,mj->ms", cand, D)
    s_masked_min = np.where(valid, s, np.inf)
    s_masked_max = np.where(valid, s, -np.inf)
    has = np.any(valid, axis=1)
    imin = np.argmin(s_masked_min, axis=1)
    imax = np.argmax(s_masked_max, axis=1)
    rows = np.arange(M)
    smin = s_masked_min[rows, imin]
    smax = s_masked_max[rows, imax]
    xlo = cand[rows, imin]
    xhi = cand[rows, imax]
    interval = np.column_stack([np.where(has, smin, 0.0), np.where(has, smax, 0.0)])
    return interval, xlo, xhi, has


def _coplanar_contact(t1: np.ndarray, t2: np.ndarray, tol: float):
    n = np.cross(t1[1] - t1[0], t1[2] - t1[0])
    drop = int(np.argmax(np.abs(n)))
    keep = [k for k in range(3) if k != drop]
    a = t1[:, keep]
    b = t2[:, keep]

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    def inside(pt, tri):
        s1 = orient(tri[0], tri[1], pt)
        s2 = orient(tri[1], tri[2], pt)
        s3 = orient(tri[2], tri[0], pt)
        neg = (s1 < -tol) or (s2 < -tol) or (s3 < -tol)
        pos = (s1 > tol) or (s2 > tol) or (s3 > tol)
        return not (neg and pos)

    for i in range(3):
        if inside(a[i], b):
            return True, t1[i]
        if inside(b[i], a):
            return True, t2[i]
    for i in range(3):
        p, q = a[i], a[(i + 1) % 3]
        for j in range(3):
            r, s = b[j], b[(j + 1) % 3]
            d1 = orient(r, s, p)
            d2 = orient(r, s, q)
            d3 = orient(p, q, r)
            d4 = orient(p, q, s)
            if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
                (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
            ):
                t = d1 / (d1 - d2)
                point = t1[i] + t * (t1[(i + 1) % 3] - t1[i])
                return True, point
    return False, np.zeros(3)


def _grid_candidates(minB, maxB, minA, maxA, tol):
    """Spatial-hash candidate pairs; cells sized to the median box diagonal."""
    diam = np.median(maxB - minB, axis=0)
    cell = float(np.max(diam)) * 2.0 + tol
    if cell <= 0:
        cell = 1.0
    table: dict[tuple, list] = {}
    lo_idx = np.floor(minB / cell).astype(np.int64)
    hi_idx = np.floor(maxB / cell).astype(np.int64)
    for t in range(minB.shape[0]):
        for ix in range(lo_idx[t, 0], hi_idx[t, 0] + 1):
            for iy in range(lo_idx[t, 1], hi_idx[t, 1] + 1):
                for iz in range(lo_idx[t, 2], hi_idx[t, 2] + 1):
                    table.setdefault((ix, iy, iz), []).append(t)
    la = np.floor((minA - tol) / cell).astype(np.int64)
    ha = np.floor((maxA + tol) / cell).astype(np.int64)
    ia_list = []
    ib_list = []
    for t in range(minA.shape[0]):
        seen = set()
        for ix in range(la[t, 0], ha[t, 0] + 1):
            for iy in range(la[t, 1], ha[t, 1] + 1):
                for iz in range(la[t, 2], ha[t, 2] + 1):
                    for b in table.get((ix, iy, iz), ()):
                        if b not in seen:
                            seen.add(b)
                            ia_list.append(t)
                            ib_list.append(b)
    if not ia_list:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.asarray(ia_list, dtype=np.int64), np.asarray(ib_list, dtype=np.int64)


def mesh_intersections(
    mesh_a: AnnulusMesh,
    mesh_b: AnnulusMesh | None = None,
    mode: str = "brute",
    tol: float = 1e-9,
) -> np.ndarray:
    """Intersection segments between two meshes (or a mesh with itself).

    In self mode, triangle pairs sharing an identification class are
    skipped: those are mesh neighbors whose shared edges are legitimate
    contacts.  Returns an (K, 2, 3) array of segment endpoints in the
    first mesh's coordinates; K = 0 means the surfaces are disjoint.
    """
    if mode not in ("brute", "grid"):
        raise ValueError(f"unknown intersection mode {mode!r}")
    self_mode = mesh_b is None
    other = mesh_a if self_mode else mesh_b
    VA = triangle_soup(mesh_a)
    VB0 = triangle_soup(other)
    clsA = mesh_a.ident[mesh_a.tris]
    clsB = other.ident[other.tris]
    minA, maxA = _aabbs(VA)
    offsets = _image_offsets(mesh_a.periods, include_negative=not self_mode)
    segments = []
    TB = VB0.shape[0]
    row_chunk = max(1, int(8_000_000 // max(TB, 1)))
    for off in offsets:
        VB = VB0 + off[None, None, :]
        minB, maxB = _aabbs(VB)
        zero_off = not np.any(off)
        if mode == "grid":
            pairs_ia, pairs_ib = _grid_candidates(minB, maxB, minA, maxA, tol)
            pair_iter = [(pairs_ia, pairs_ib)]
        else:
            pair_iter = _brute_pairs(minA, maxA, minB, maxB, tol, row_chunk)
        for ia, ib in pair_iter:
            if ia.size == 0:
                continue
            if self_mode:
                if zero_off:
                    keep = ia < ib
                else:
                    keep = ia != ib
                ia, ib = ia[keep], ib[keep]
            if self_mode and ia.size:
                shared = np.zeros(ia.size, dtype=bool)
                for p in range(3):
                    for q in range(3):
                        shared |= clsA[ia, p] == clsB[ib, q]
                ia, ib = ia[~shared], ib[~shared]
            for s in range(0, ia.size, _PAIR_CHUNK):
                sl = slice(s, s + _PAIR_CHUNK)
                hit, Pe, Qe = pair_segments(VA[ia[sl]], VB[ib[sl]], tol)
                if np.any(hit):
                    segments.append(np.stack([Pe[hit], Qe[hit]], axis=1))
    if not segments:
        return np.zeros((0, 2, 3))
    return np.concatenate(segments, axis=0)


def _brute_pairs(minA, maxA, minB, maxB, tol, row_chunk):
    TA = minA.shape[0]
    for start in range(0, TA, row_chunk):
        sl = slice(start, min(start + row_chunk, TA))
        over = np.ones((sl.stop - sl.start, minB.shape[0]), dtype=bool)
        for k in range(3):
            over &= minA[sl, k][:, None] <= maxB[None, :, k] + tol
            over &= minB[None, :, k] <= maxA[sl, k][:, None] + tol
        ia, ib = np.nonzero(over)
        yield ia + start, ib
