"""Run diagnostics: traces, sheet censuses, curvature proxy, disk topology.

These quantify the qualitative structure of solved surfaces: that plane
traces are vertical graphs, that sheets accumulate at the equatorial
slice through a fixed transversal, that discrete curvature concentrates
near the axes, and that small balls meet the surface in disks.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .charts import BoxChart
from .errors import DomainError
from .intersect import triangle_soup
from .mesh import AnnulusMesh, wrap_diff
from .metric import christoffel_diag
from .solver import metric_vertex_normals

__all__ = [
    "Transversal",
    "CensusResult",
    "LaminationReport",
    "trace_monotonicity",
    "sheet_census",
    "curvature_map",
    "disk_check",
    "lamination_trend",
]

_TOUCH = 1e-9


def _monotone(vals: np.ndarray) -> tuple[bool, float]:
    d = np.diff(vals)
    if d.size == 0:
        return True, 0.0
    s = 1.0 if float(np.sum(d)) >= 0 else -1.0
    worst = float(np.max(-s * d))
    return worst <= 1e-12, max(worst, 0.0)


def _plane_chains(mesh: AnnulusMesh, c: float):
    """Ordered polylines where the mesh crosses the plane phi = c (mod period)."""
    pts = mesh.points
    periods = mesh.periods
    per = periods[0]
    edges = np.concatenate(
        [mesh.tris[:, [0, 1]], mesh.tris[:, [1, 2]], mesh.tris[:, [2, 0]]]
    )
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    key_of = {}
    node_pts = []
    for idx, (i, j) in enumerate(edges):
        Pi = pts[int(i)]
        d = wrap_diff(pts[int(j)] - Pi, periods)
        if d[0] == 0.0:
            continue
        lo, hi = sorted((Pi[0], Pi[0] + d[0]))
        if per is not None:
            k0 = int(np.floor((lo - c) / per))
            cands = [c + k * per for k in range(k0, k0 + 3)]
        else:
            cands = [c]
        for cv in cands:
            if lo < cv < hi:
                t = (cv - Pi[0]) / d[0]
                key_of[idx] = len(node_pts)
                node_pts.append(Pi + t * d)
                break
    if not node_pts:
        return []
    node_pts = np.asarray(node_pts)

    edge_index = {}
    for idx, (i, j) in enumerate(edges):
        edge_index[(int(i), int(j))] = idx
    adj: dict[int, list[int]] = {}
    for tri in mesh.tris:
        a, b, cc = (int(v) for v in tri)
        nodes = []
        for e in ((a, b), (b, cc), (cc, a)):
            k = edge_index[(min(e), max(e))]
            if k in key_of:
                nodes.append(key_of[k])
        if len(nodes) == 2:
            adj.setdefault(nodes[0], []).append(nodes[1])
            adj.setdefault(nodes[1], []).append(nodes[0])
    chains = []
    seen = set()
    order = sorted(adj, key=lambda v: (len(adj[v]) != 1, v))
    for start in order:
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        prev, node = None, start
        while True:
            nxt = [v for v in adj[node] if v != prev and v not in seen]
            if not nxt:
                break
            prev, node = node, nxt[0]
            chain.append(node)
            seen.add(node)
        chains.append(node_pts[chain])
    return chains


def trace_monotonicity(mesh: AnnulusMesh, plane_count: int = 16) -> dict:
    """Check that plane traces phi = const are graphs with z monotone in theta.

    Samples plane_count phi values, extracts the crossing polylines, and
    tests both theta and z for strict monotonicity along each.  Returns
    the pass fraction over planes that hit the mesh, the worst violation,
    and the number of skipped (missed) planes.
    """
    if plane_count < 1:
        raise DomainError("plane_count must be positive")
    offset = 0.5371
    values = (np.arange(plane_count) + offset) * (np.pi / plane_count)
    planes = []
    passed = 0
    hit = 0
    worst = {"phi": None, "violation": 0.0}
    for c in values:
        chains = _plane_chains(mesh, float(c))
        if not chains:
            planes.append({"phi": float(c), "chains": 0, "passed": None})
            continue
        hit += 1
        ok = True
        vio = 0.0
        for chain in chains:
            th_ok, th_v = _monotone(chain[:, 1])
            z_ok, z_v = _monotone(chain[:, 2])
            ok = ok and th_ok and z_ok
            vio = max(vio, th_v, z_v)
        if ok:
            passed += 1
        elif vio > worst["violation"]:
            worst = {"phi": float(c), "violation": vio}
        planes.append(
            {"phi": float(c), "chains": len(chains), "passed": ok, "violation": vio}
        )
    return {
        "fraction": passed / hit if hit else float("nan"),
        "planes_hit": hit,
        "planes_skipped": plane_count - hit,
        "worst": worst,
        "planes": planes,
    }


@dataclass(frozen=True)
class Transversal:
    """Vertical probe segment {phi*, theta*, 0 < z <= delta} and its mirror."""

    phi_star: float = 1.1
    theta_star: float = 0.8
    delta: float = 3.1
    margin: float = 0.2

    def __post_init__(self):
        if not (0.0 < self.delta < np.pi):
            raise DomainError(f"delta = {self.delta:.6g} outside (0, pi)")
        if not (self.margin <= self.phi_star <= np.pi - self.margin):
            raise DomainError("phi_star too close to the axes")

    def to_dict(self) -> dict:
        return {
            "phi_star": self.phi_star,
            "theta_star": self.theta_star,
            "delta": self.delta,
        }


@dataclass
class CensusResult:
    positive: np.ndarray
    negative: np.ndarray
    touched: bool
    transversal: Transversal

    @property
    def count_positive(self) -> int:
        return int(self.positive.size)

    @property
    def count_negative(self) -> int:
        return int(self.negative.size)

    @property
    def two_sided(self) -> bool:
        return self.count_positive > 0 and self.count_negative > 0

    @property
    def min_abs_height(self) -> float:
        vals = np.abs(np.concatenate([self.positive, self.negative]))
        return float(np.min(vals)) if vals.size else float("nan")

    def merged(self) -> np.ndarray:
        return np.sort(np.concatenate([self.negative, self.positive]))

    @property
    def gap_cv(self) -> float:
        gaps = np.diff(self.merged())
        if gaps.size < 2:
            return float("nan")
        return float(np.std(gaps) / np.mean(gaps))

    def spacing_ratios(self) -> np.ndarray:
        z = self.positive  # descending toward Gamma
        if z.size < 2:
            return np.zeros(0)
        return z[1:] / z[:-1]

    def to_dict(self) -> dict:
        return {
            "count_positive": self.count_positive,
            "count_negative": self.count_negative,
            "two_sided": self.two_sided,
            "min_abs_height": self.min_abs_height,
            "positive": self.positive.tolist(),
            "negative": self.negative.tolist(),
            "gap_cv": self.gap_cv,
            "spacing_ratios": self.spacing_ratios().tolist(),
            "touched": self.touched,
            "transversal": self.transversal.to_dict(),
        }


def _probe(mesh: AnnulusMesh, phi_s: float, th_s: float, delta: float, tol: float):
    soup = triangle_soup(mesh)
    P0 = soup[:, 0]
    u = soup[:, 1] - soup[:, 0]
    w = soup[:, 2] - soup[:, 0]
    hits = []
    touched = False
    targets = [np.array([phi_s, th_s])]
    for k, per in enumerate(mesh.periods[:2]):
        if per is not None:
            extra = []
            for tgt in targets:
                for sgn in (-1.0, 1.0):
                    t2 = tgt.copy()
                    t2[k] += sgn * per
                    extra.append(t2)
            targets.extend(extra)
    det = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
    good = np.abs(det) > 1e-14
    for tgt in targets:
        r0 = tgt[0] - P0[:, 0]
        r1 = tgt[1] - P0[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (w[:, 1] * r0 - w[:, 0] * r1) / det
            t = (-u[:, 1] * r0 + u[:, 0] * r1) / det
        lam = np.stack([1.0 - s - t, s, t], axis=1)
        inside = good & np.all(lam > tol, axis=1)
        near = good & np.all(lam > -tol, axis=1) & np.any(np.abs(lam) <= tol, axis=1)
        if np.any(near):
            touched = True
        take = inside | near
        if np.any(take):
            z = P0[take, 2] + s[take] * u[take, 2] + t[take] * w[take, 2]
            hits.append(z)
    if hits:
        z = np.sort(np.concatenate(hits))
        keep = np.ones(z.size, dtype=bool)
        keep[1:] = np.diff(z) > 1e-9
        z = z[keep]
    else:
        z = np.zeros(0)
    pos = z[(z > tol) & (z <= delta + tol)]
    neg = z[(z < -tol) & (z >= -delta - tol)]
    return pos[::-1].copy(), neg.copy(), touched


def sheet_census(
    mesh: AnnulusMesh, transversal: Transversal | None = None, tol: float = _TOUCH
) -> CensusResult:
    """Count and order the surface crossings of a vertical transversal.

    Crossing heights are deduplicated at the touch tolerance; if the
    probe grazes a vertex or edge, it is perturbed once and re-run.
    Positive heights are returned descending (approaching the slice
    {z = 0} from above), negative ascending.
    """
    t = transversal or Transversal()
    pos, neg, touched = _probe(mesh, t.phi_star, t.theta_star, t.delta, tol)
    if touched:
        pos2, neg2, touched2 = _probe(
            mesh, t.phi_star + 8.9e-5, t.theta_star + 1.37e-4, t.delta, tol
        )
        if not touched2:
            return CensusResult(pos2, neg2, False, t)
        return CensusResult(pos2, neg2, True, t)
    return CensusResult(pos, neg, False, t)


def _axis_distance(mesh: AnnulusMesh, profile) -> np.ndarray:
    phi = mesh.points[:, 0]
    pm = phi - np.pi * np.floor(phi / np.pi) if isinstance(mesh.chart, BoxChart) else phi
    ang = np.minimum(pm, np.pi - pm)
    return profile.omega(mesh.points[:, 2]) * ang


def curvature_map(
    mesh: AnnulusMesh,
    metric,
    profile=None,
    band_edges: tuple = (0.1, 0.5),
) -> dict:
    """Per-vertex second-fundamental-form magnitude proxy |A|^2.

    One-ring vertex offsets are corrected to normal coordinates with the
    metric's Christoffel symbols, expressed in an orthonormal frame, and
    fit by a quadratic height function over the tangent plane; the proxy
    is the squared Frobenius norm of its Hessian.  Boundary, axis, and
    valence-deficient vertices are excluded (NaN).  On a slice {z = a}
    the proxy matches 2 (omega'/omega)^2.
    """
    V = mesh.n_vertices
    pts = mesh.points
    edges = np.concatenate(
        [mesh.tris[:, [0, 1]], mesh.tris[:, [1, 2]], mesh.tris[:, [2, 0]]]
    )
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    on_boundary = np.zeros(V, dtype=bool)
    on_boundary[np.unique(uniq[counts == 1])] = True
    neighbors: list[list[int]] = [[] for _ in range(V)]
    for i, j in uniq:
        neighbors[int(i)].append(int(j))
        neighbors[int(j)].append(int(i))

    G = metric.diag(pts)
    dG = metric.diag_jac(pts)
    # the christoffel symbols are undefined where the metric degenerates
    # (coordinate axes); those vertices are excluded from the fit below
    with np.errstate(divide="ignore", invalid="ignore"):
        gammas = christoffel_diag(G, dG)
    normals = metric_vertex_normals(mesh, metric)
    sqg = np.sqrt(G)

    proxy = np.full(V, np.nan)
    for v in range(V):
        if on_boundary[v] or mesh.axis[v]:
            continue
        ring = neighbors[v]
        if len(ring) < 5:
            continue
        n_frame = sqg[v] * normals[v]
        nn = np.linalg.norm(n_frame)
        if nn < 1e-12:
            continue
        n_frame = n_frame / nn
        delta = wrap_diff(pts[ring] - pts[v], mesh.periods)
        xi = delta + 0.5 * np.einsum("kij,ri,rj->rk", gammas[v], delta, delta)
        eta = xi * sqg[v]
        t1 = eta[0] - np.dot(eta[0], n_frame) * n_frame
        t1n = np.linalg.norm(t1)
        if t1n < 1e-12:
            continue
        t1 = t1 / t1n
        t2 = np.cross(n_frame, t1)
        s = eta @ t1
        q = eta @ t2
        h = eta @ n_frame
        A = np.column_stack([0.5 * s * s, s * q, 0.5 * q * q, s, q])
        try:
            coef, *_ = np.linalg.lstsq(A, h, rcond=None)
        except np.linalg.LinAlgError:
            continue
        a, b, c = coef[0], coef[1], coef[2]
        proxy[v] = a * a + 2.0 * b * b + c * c

    bands = []
    if profile is not None:
        dist = _axis_distance(mesh, profile)
        lo = 0.0
        edges_list = list(band_edges) + [np.inf]
        for hi in edges_list:
            sel = (dist >= lo) & (dist < hi) & ~np.isnan(proxy)
            bands.append(
                {
                    "lo": float(lo),
                    "hi": float(hi) if np.isfinite(hi) else None,
                    "count": int(np.sum(sel)),
                    "max": float(np.max(proxy[sel])) if np.any(sel) else None,
                }
            )
            lo = hi
    return {
        "proxy": proxy,
        "bands": bands,
        "excluded": int(np.sum(np.isnan(proxy))),
    }


def disk_check(mesh: AnnulusMesh, metric, center, r: float) -> list[dict]:
    """Topology of the mesh within a ball proxy around a chart point.

    The ball is the set of identification classes within graph distance r
    (metric edge lengths, plus the chord from the center to the nearest
    vertex).  Each connected component of the induced triangle set is
    classified: a disk has Euler characteristic 1 and one boundary loop.
    """
    center = np.asarray(tuple(center), dtype=float)
    pts = mesh.points
    cls = mesh.ident
    d0 = wrap_diff(pts - center, mesh.periods)
    G0 = metric.diag(center[None, :])[0]
    chord = np.sqrt(np.einsum("vk,k,vk->v", d0, G0, d0))
    start_v = int(np.argmin(chord))
    start = int(cls[start_v])
    offset = float(chord[start_v])
    if offset > r:
        return []

    edges = np.concatenate(
        [mesh.tris[:, [0, 1]], mesh.tris[:, [1, 2]], mesh.tris[:, [2, 0]]]
    )
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    mid = pts[edges[:, 0]] + 0.5 * wrap_diff(pts[edges[:, 1]] - pts[edges[:, 0]], mesh.periods)
    Gm = metric.diag(mid)
    dvec = wrap_diff(pts[edges[:, 1]] - pts[edges[:, 0]], mesh.periods)
    lengths = np.sqrt(np.einsum("ek,ek->e", dvec * Gm, dvec))
    graph: dict[int, list[tuple[int, float]]] = {}
    for (i, j), L in zip(edges, lengths):
        a, b = int(cls[i]), int(cls[j])
        if a == b:
            continue
        graph.setdefault(a, []).append((b, float(L)))
        graph.setdefault(b, []).append((a, float(L)))

    dist = {start: offset}
    heap = [(offset, start)]
    while heap:
        d, node = heapq.heappop(heap)
        if d > dist.get(node, np.inf) or d > r:
            continue
        for nb, L in graph.get(node, ()):
            nd = d + L
            if nd <= r and nd < dist.get(nb, np.inf):
                dist[nb] = nd
                heapq.heappush(heap, (nd, nb))
    selected = {k for k, v in dist.items() if v <= r}
    if not selected:
        return []

    tri_cls = cls[mesh.tris]
    in_ball = np.all(np.isin(tri_cls, sorted(selected)), axis=1)
    sub = tri_cls[in_ball]
    if sub.shape[0] == 0:
        return []

    parent: dict[int, int] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for row in sub:
        a = find(int(row[0]))
        for v in row[1:]:
            b = find(int(v))
            if a != b:
                parent[b] = a
    comp_of = {}
    for row in sub:
        comp_of.setdefault(find(int(row[0])), []).append(row)
    out = []
    for rows in comp_of.values():
        rows = np.asarray(rows)
        cV = np.unique(rows).size
        ce = np.concatenate([rows[:, [0, 1]], rows[:, [1, 2]], rows[:, [2, 0]]])
        ce = np.sort(ce, axis=1)
        cu, cc = np.unique(ce, axis=0, return_counts=True)
        cE = cu.shape[0]
        cF = rows.shape[0]
        boundary = cu[cc == 1]
        from .mesh import _count_cycles

        loops = _count_cycles(boundary)
        chi = cV - cE + cF
        out.append(
            {
                "vertices": int(cV),
                "faces": int(cF),
                "chi": int(chi),
                "boundary_loops": int(loops),
                "disk": bool(chi == 1 and loops == 1),
            }
        )
    return out


@dataclass
class LaminationReport:
    per_n: list
    counts_nondecreasing: bool | None
    min_height_decreasing: bool | None
    all_two_sided: bool
    count_slope: float

    def to_dict(self) -> dict:
        return {
            "per_n": self.per_n,
            "counts_nondecreasing": self.counts_nondecreasing,
            "min_height_decreasing": self.min_height_decreasing,
            "all_two_sided": self.all_two_sided,
            "count_slope": self.count_slope,
        }


def lamination_trend(entries: list[dict]) -> LaminationReport:
    """Aggregate per-n censuses into the cross-n trend report.

    Each entry carries n, its CensusResult, and optionally the
    monotone-trace fraction.  With a single entry the trend verdicts are
    None and only the point-in-time fields are filled.
    """
    if not entries:
        raise DomainError("lamination_trend needs at least one record")
    entries = sorted(entries, key=lambda e: e["n"])
    per_n = []
    for e in entries:
        census: CensusResult = e["census"]
        row = {"n": int(e["n"])}
        row.update(census.to_dict())
        if "trace_fraction" in e:
            row["trace_fraction"] = e["trace_fraction"]
        per_n.append(row)
    counts = [r["count_positive"] + r["count_negative"] for r in per_n]
    heights = [r["min_abs_height"] for r in per_n]
    two_sided = all(r["two_sided"] for r in per_n)
    if len(per_n) >= 2:
        nondecr = all(b >= a for a, b in zip(counts, counts[1:]))
        decr = all(b <= a + 1e-12 for a, b in zip(heights, heights[1:]))
        slope = (counts[-1] - counts[0]) / (len(counts) - 1)
    else:
        nondecr = None
        decr = None
        slope = 0.0
    return LaminationReport(
        per_n=per_n,
        counts_nondecreasing=nondecr,
        min_height_decreasing=decr,
        all_two_sided=two_sided,
        count_slope=float(slope),
    )
