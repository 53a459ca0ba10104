"""Truncation, continuation in the tube radius, reflection, and persistence.

A full run per winding count n proceeds in stages: solve the Plateau
problem in the glued box at tube radius eps, truncate the solution to
the core band phi in [eps, pi - eps], project the core to the base
chart, adjoin its half-turn rotation image stitched along the cut
curves, then halve eps and repeat warm-started from the previous
solution.  Stage meshes are persisted content-addressed under a run
directory together with a manifest and solve telemetry.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .charts import BaseChart, BoxChart, build_glue_profile, project_mesh_to_base
from .errors import AssemblyError, PipelineError
from .mesh import (
    AnnulusMesh,
    build_initial_annulus,
    mesh_topology,
    riemannian_area,
    save_mesh,
    load_mesh,
    wrap_diff,
)
from .metric import BaseMetric, GluedMetric
from .solver import SolveConfig, SolveResult, minimize_area
from .warp import WarpProfile

__all__ = [
    "CutCurve",
    "CutReport",
    "ContinuationSchedule",
    "StageRecord",
    "AssemblyReport",
    "truncate_to_core",
    "phi_stations",
    "resample_rings",
    "continuation_run",
    "reflect_and_assemble",
    "run_sequence",
    "pole_embedding",
]

_SNAP = 1e-12
# vertices closer than this to a truncation wall are snapped onto it;
# any looser and solved vertices hugging the wall spawn near-duplicate
# cut points whose copies register as phantom seam contacts
_WALL_SNAP = 1e-6


@dataclass
class CutCurve:
    """Ordered polyline where the surface crosses a truncation wall."""

    indices: np.ndarray
    points: np.ndarray
    wall: str
    closed: bool
    theta_monotone: bool
    z_monotone: bool
    theta_violation: float
    z_violation: float

    def to_dict(self) -> dict:
        return {
            "wall": self.wall,
            "length": int(self.indices.size),
            "closed": self.closed,
            "theta_monotone": self.theta_monotone,
            "z_monotone": self.z_monotone,
            "theta_violation": self.theta_violation,
            "z_violation": self.z_violation,
        }


@dataclass
class CutReport:
    curves: list
    kept: int
    clipped: int
    dropped: int
    seam_vertices: np.ndarray

    @property
    def monotone_fraction(self) -> float:
        if not self.curves:
            return 1.0
        good = sum(1 for c in self.curves if c.theta_monotone)
        return good / len(self.curves)

    def to_dict(self) -> dict:
        return {
            "curves": [c.to_dict() for c in self.curves],
            "kept": self.kept,
            "clipped": self.clipped,
            "dropped": self.dropped,
            "monotone_fraction": self.monotone_fraction,
        }


def _wall_values(lo: float, hi: float, eps: float) -> list[float]:
    out = []
    k0 = int(np.floor(lo / np.pi)) - 1
    k1 = int(np.ceil(hi / np.pi)) + 1
    for k in range(k0, k1 + 1):
        for c in (k * np.pi + eps, k * np.pi + (np.pi - eps)):
            if lo < c < hi:
                out.append(c)
    return out


def _monotone_stats(vals: np.ndarray) -> tuple[bool, float]:
    d = np.diff(vals)
    if d.size == 0:
        return True, 0.0
    s = 1.0 if float(np.sum(d)) >= 0 else -1.0
    worst = float(np.max(-s * d))
    return worst <= _SNAP, max(worst, 0.0)


def truncate_to_core(mesh: AnnulusMesh, eps: float):
    """Clip a box-chart mesh to the core band phi mod pi in [eps, pi - eps].

    Triangles fully inside are kept untouched; triangles crossing a wall
    phi = eps or pi - eps (mod pi) are split, with the cut vertices
    snapped exactly onto the wall and shared between neighbors.  Original
    vertices within _WALL_SNAP of a wall are snapped onto it and treated
    as seam vertices directly.  Returns the clipped mesh and a CutReport
    whose curves are the ordered wall polylines with their monotonicity
    verdicts.
    """
    if not isinstance(mesh.chart, BoxChart):
        raise PipelineError("truncate_to_core expects a box-chart mesh")
    if not (0.0 < eps < np.pi / 2.0):
        raise PipelineError(f"eps = {eps:.6g} outside (0, pi/2)")
    periods = mesh.periods
    pts = mesh.points.copy()
    pm = pts[:, 0] - np.pi * np.floor(pts[:, 0] / np.pi)
    low_d = pm - eps
    high_d = (np.pi - eps) - pm
    on_low = np.abs(low_d) <= _WALL_SNAP
    on_high = np.abs(high_d) <= _WALL_SNAP
    pts[on_low, 0] -= low_d[on_low]
    pts[on_high, 0] += high_d[on_high]
    sign = np.where(np.minimum(low_d, high_d) > 0.0, 1, -1)
    sign[on_low | on_high] = 0
    wall_of = np.where(on_low, 0, 1)

    tri_sign = sign[mesh.tris]
    pos = (tri_sign > 0).sum(axis=1)
    neg = (tri_sign < 0).sum(axis=1)
    if not np.any(pos > 0):
        raise PipelineError("surface lies entirely inside the tubes")

    # guard: a triangle must not be able to straddle two walls at once
    u = wrap_diff(pts[mesh.tris[:, 1]] - pts[mesh.tris[:, 0]], periods)[:, 0]
    w = wrap_diff(pts[mesh.tris[:, 2]] - pts[mesh.tris[:, 0]], periods)[:, 0]
    extent = np.maximum(np.maximum(np.abs(u), np.abs(w)), np.abs(u - w))
    gap = min(2.0 * eps, np.pi - 2.0 * eps)
    mixed = (pos > 0) & (neg > 0)
    if np.any(extent[mixed] >= 0.95 * gap):
        raise PipelineError(
            "mesh too coarse across the tube walls; refine the phi rings"
        )

    # interpolated cut vertices, one per strictly crossing edge
    edges = np.concatenate(
        [mesh.tris[:, [0, 1]], mesh.tris[:, [1, 2]], mesh.tris[:, [2, 0]]]
    )
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    cross = sign[edges[:, 0]] * sign[edges[:, 1]] == -1
    cut_id: dict[tuple[int, int], int] = {}
    cut_pts = []
    cut_fixed = []
    cut_ring = []
    cut_wall = []
    for i, j in edges[cross]:
        i, j = int(i), int(j)
        Pi = pts[i]
        d = wrap_diff(pts[j] - pts[i], periods)
        lo, hi = sorted((Pi[0], Pi[0] + d[0]))
        walls = _wall_values(lo, hi, eps)
        if len(walls) != 1:
            raise PipelineError(
                f"edge ({i},{j}) crosses {len(walls)} walls; refine the mesh"
            )
        c = walls[0]
        t = (c - Pi[0]) / d[0]
        p = Pi + t * d
        p[0] = c
        cut_id[(i, j)] = len(cut_pts)
        cut_pts.append(p)
        cut_fixed.append(bool(mesh.fixed[i] and mesh.fixed[j]))
        cut_ring.append(float((1 - t) * mesh.ring_coord[i] + t * mesh.ring_coord[j]))
        side = c - np.pi * np.floor(c / np.pi)
        cut_wall.append(0 if abs(side - eps) < abs(side - (np.pi - eps)) else 1)

    def cut(i, j):
        return cut_id[(i, j) if i < j else (j, i)]

    new_tris = []  # vertices as ("o", original index) / ("c", cut index)
    seam_edges: dict[frozenset, int] = {}
    kept = clipped = dropped = 0

    def add_seam(a, b, wall):
        seam_edges.setdefault(frozenset((a, b)), wall)

    for t_idx in range(mesh.n_triangles):
        ids = [int(v) for v in mesh.tris[t_idx]]
        sg = [int(sign[v]) for v in ids]
        p_cnt = sum(1 for s in sg if s > 0)
        n_cnt = sum(1 for s in sg if s < 0)
        z_cnt = 3 - p_cnt - n_cnt
        if p_cnt == 0:
            dropped += 1
            continue
        if n_cnt == 0:
            kept += 1
            new_tris.append(tuple(("o", v) for v in ids))
            if z_cnt == 2:
                za, zb = (ids[k] for k in range(3) if sg[k] == 0)
                if wall_of[za] != wall_of[zb]:
                    raise PipelineError(
                        "mesh too coarse across the tube walls; refine the phi rings"
                    )
                add_seam(("o", za), ("o", zb), int(wall_of[za]))
            continue
        clipped += 1
        if z_cnt == 1:
            # the wall passes through one vertex and the opposite edge
            r = sg.index(0)
            W, A, B = ids[r], ids[(r + 1) % 3], ids[(r + 2) % 3]
            c = cut(A, B)
            if sg[(r + 1) % 3] > 0:
                new_tris.append((("o", W), ("o", A), ("c", c)))
            else:
                new_tris.append((("o", W), ("c", c), ("o", B)))
            add_seam(("o", W), ("c", c), cut_wall[c])
            continue
        if p_cnt == 1:
            r = sg.index(1)
        else:
            r = sg.index(-1)
        X, Y, Z = ids[r], ids[(r + 1) % 3], ids[(r + 2) % 3]
        cXY = cut(X, Y)
        cZX = cut(Z, X)
        if p_cnt == 1:
            new_tris.append((("o", X), ("c", cXY), ("c", cZX)))
        else:
            new_tris.append((("c", cXY), ("o", Y), ("o", Z)))
            new_tris.append((("c", cXY), ("o", Z), ("c", cZX)))
        add_seam(("c", cXY), ("c", cZX), cut_wall[cXY])

    if not new_tris:
        raise PipelineError("truncation removed every triangle")

    used = sorted({idx for tri in new_tris for kind, idx in tri if kind == "o"})
    omap = {v: k for k, v in enumerate(used)}
    n_orig = len(used)
    points = np.vstack([pts[used], np.asarray(cut_pts).reshape(-1, 3)]) if cut_pts else pts[used].copy()
    fixed = np.concatenate([mesh.fixed[used], np.asarray(cut_fixed, dtype=bool)]) if cut_pts else mesh.fixed[used].copy()
    axis = np.zeros(points.shape[0], dtype=bool)
    axis[:n_orig] = mesh.axis[used]
    ring = np.concatenate([mesh.ring_coord[used], np.asarray(cut_ring)]) if cut_pts else mesh.ring_coord[used].copy()

    def out_index(node):
        kind, idx = node
        return omap[idx] if kind == "o" else n_orig + idx

    tris = np.asarray(
        [[out_index(nd) for nd in tri] for tri in new_tris], dtype=np.int32
    )
    out = AnnulusMesh(
        points, tris, fixed, axis, mesh.chart, mesh.rings, mesh.levels, ring_coord=ring
    )

    edge_list = []
    edge_walls = []
    for nodes, wall in seam_edges.items():
        a, b = tuple(nodes)
        edge_list.append((out_index(a), out_index(b)))
        edge_walls.append(wall)
    curves = _chain_cut_curves(out, edge_list, edge_walls)
    on_wall_used = [omap[v] for v in used if sign[v] == 0]
    seam = np.sort(
        np.concatenate(
            [
                np.asarray(on_wall_used, dtype=np.int64),
                np.arange(n_orig, points.shape[0], dtype=np.int64),
            ]
        )
    )
    report = CutReport(curves, kept, clipped, dropped, seam)
    return out, report


def _chain_cut_curves(mesh, seam_edge_list, seam_edge_walls) -> list[CutCurve]:
    adj: dict[int, list[int]] = {}
    wall_at: dict[int, int] = {}
    for (a, b), wall in zip(seam_edge_list, seam_edge_walls):
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
        wall_at[a] = wall
        wall_at[b] = wall
    seen = set()
    curves = []
    starts = sorted(adj, key=lambda v: (len(adj[v]) != 1, v))
    for start in starts:
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        prev = None
        node = start
        while True:
            nxt = [v for v in adj[node] if v != prev and v not in seen]
            if not nxt:
                break
            prev, node = node, nxt[0]
            chain.append(node)
            seen.add(node)
        closed = len(chain) > 2 and chain[0] in adj.get(chain[-1], [])
        ids = np.asarray(chain, dtype=np.int64)
        pts = mesh.points[ids]
        th_ok, th_v = _monotone_stats(pts[:, 1])
        z_ok, z_v = _monotone_stats(pts[:, 2])
        if closed:
            th_ok = z_ok = False
        wall = "phi-low" if wall_at[chain[0]] == 0 else "phi-high"
        curves.append(CutCurve(ids, pts, wall, closed, th_ok, z_ok, th_v, z_v))
    return curves


@dataclass(frozen=True)
class ContinuationSchedule:
    """Tube radii eps0 / 2^j for j = 0..halvings plus the mesh layout rule."""

    eps0: float = 0.3
    halvings: int = 1
    rings: int = 24
    levels_per_wrap: int = 32
    refine_stations: bool = True

    def __post_init__(self):
        if not (0.0 < self.eps0 <= np.pi / 8.0):
            raise PipelineError(f"eps0 = {self.eps0:.6g} outside (0, pi/8]")
        if self.halvings < 0:
            raise PipelineError("halvings must be >= 0")
        if self.rings < 8 or self.levels_per_wrap < 8:
            raise PipelineError("schedule resolution too coarse (>= 8 required)")

    @property
    def eps_values(self) -> list[float]:
        return [self.eps0 / (2.0**j) for j in range(self.halvings + 1)]

    def levels(self, n: int) -> int:
        return 2 * n * self.levels_per_wrap + 1

    def to_dict(self) -> dict:
        return {
            "eps0": self.eps0,
            "halvings": self.halvings,
            "rings": self.rings,
            "levels_per_wrap": self.levels_per_wrap,
            "refine_stations": self.refine_stations,
        }


def phi_stations(rings: int, glue=None, merge_frac: float = 6.0) -> np.ndarray:
    """Ring stations: uniform on [0, pi) plus extras at the blend joints."""
    base = np.arange(rings) * (np.pi / rings)
    if glue is None:
        return base
    e, w = glue.eps, glue.blend_width
    extra = np.array([e - w, e, e + w, np.pi - e - w, np.pi - e, np.pi - e + w])
    st = np.sort(np.concatenate([base, extra]))
    st = st[(st >= 0.0) & (st < np.pi)]
    tol = (np.pi / rings) / merge_frac
    keep = [st[0]]
    for v in st[1:]:
        if v - keep[-1] > tol:
            keep.append(v)
    if (np.pi - keep[-1]) + keep[0] <= tol and len(keep) > 1:
        keep.pop()
    return np.asarray(keep)


def resample_rings(mesh: AnnulusMesh, stations: np.ndarray) -> AnnulusMesh:
    """Re-station a structured box-chart annulus at new phi positions.

    Each level is treated as a phi-graph: theta and z are interpolated
    periodically in phi at the new stations.  Requires the level-major
    structured layout produced by build_initial_annulus.
    """
    R, L = mesh.rings, mesh.levels
    if R * L != mesh.n_vertices:
        raise PipelineError("resample_rings requires a structured mesh")
    grid = mesh.points.reshape(L, R, 3)
    ring_t = mesh.ring_coord.reshape(L, R)[:, 0]
    S = stations.size
    new_pts = np.empty((L, S, 3))
    for i in range(L):
        phi = grid[i, :, 0]
        phi = phi - np.pi * np.floor(phi / np.pi)
        order = np.argsort(phi)
        x = phi[order]
        th = grid[i, order, 1]
        zz = grid[i, order, 2]
        xe = np.concatenate([x, [x[0] + np.pi]])
        the = np.concatenate([th, [th[0]]])
        ze = np.concatenate([zz, [zz[0]]])
        q = stations.copy()
        q[q < xe[0]] += np.pi
        new_pts[i, :, 0] = stations
        new_pts[i, :, 1] = np.interp(q, xe, the)
        new_pts[i, :, 2] = np.interp(q, xe, ze)
    pts = new_pts.reshape(L * S, 3)
    from .mesh import _strip_triangles

    tris = _strip_triangles(S, L, periodic_rows=True)
    fixed = np.zeros(L * S, dtype=bool)
    fixed[:S] = True
    fixed[-S:] = True
    axis = np.zeros(L * S, dtype=bool)
    out = AnnulusMesh(
        pts, tris, fixed, axis, mesh.chart, S, L,
        ring_coord=np.repeat(ring_t, S),
    )
    return out


@dataclass
class AssemblyReport:
    n_seam_vertices: int
    n_seam_edges: int
    max_seam_gap: float
    max_dihedral_deviation: float
    mean_dihedral_deviation: float
    core_area: float
    assembled_area: float
    topology: dict

    def to_dict(self) -> dict:
        return {
            "n_seam_vertices": self.n_seam_vertices,
            "n_seam_edges": self.n_seam_edges,
            "max_seam_gap": self.max_seam_gap,
            "max_dihedral_deviation": self.max_dihedral_deviation,
            "mean_dihedral_deviation": self.mean_dihedral_deviation,
            "core_area": self.core_area,
            "assembled_area": self.assembled_area,
            "topology": self.topology,
        }


def pole_embedding(profile: WarpProfile, points: np.ndarray) -> np.ndarray:
    """Local Euclidean-like embedding (omega sin phi cos theta, ..., z).

    Faithful near the degenerate axes, where the chart coordinates
    themselves cannot express angles between seam-adjacent triangles.
    """
    phi, th, z = points[:, 0], points[:, 1], points[:, 2]
    w = profile.omega(z)
    r = w * np.sin(phi)
    return np.column_stack([r * np.cos(th), r * np.sin(th), z])


def _derive_seam(core: AnnulusMesh) -> np.ndarray:
    topo_edges = np.concatenate(
        [core.tris[:, [0, 1]], core.tris[:, [1, 2]], core.tris[:, [2, 0]]]
    )
    topo_edges = np.sort(topo_edges, axis=1)
    uniq, counts = np.unique(topo_edges, axis=0, return_counts=True)
    bverts = np.unique(uniq[counts == 1])
    if bverts.size == 0:
        raise AssemblyError("core mesh has no boundary to stitch")
    pm = core.points[bverts, 0]
    pm = pm - np.pi * np.floor(pm / np.pi)
    dist = np.minimum(pm, np.pi - pm)
    dmin = float(np.min(dist))
    return bverts[dist <= dmin + 1e-9]


def reflect_and_assemble(
    core: AnnulusMesh,
    seam_indices: np.ndarray | None = None,
    profile: WarpProfile | None = None,
):
    """Adjoin the half-turn rotation image of the core along its cut seams.

    The image copy (theta + pi) is combinatorially identical, so each
    seam vertex is identified with its own image by index; geometry is
    left untouched, which keeps the area doubling exact.  Returns the
    assembled mesh (ident classes merged along the seams) plus a report
    with seam gaps, dihedral deviations measured in a local embedding,
    and the combinatorial topology.  Raises AssemblyError if the result
    is not a cylinder or the seam pairing is inconsistent.
    """
    if not isinstance(core.chart, BaseChart):
        raise AssemblyError("assembly expects a base-chart core mesh")
    seam = np.asarray(
        _derive_seam(core) if seam_indices is None else seam_indices, dtype=np.int64
    )
    if seam.size == 0:
        raise AssemblyError("empty seam index set")

    V = core.n_vertices
    T = core.n_triangles
    image_pts = core.points.copy()
    image_pts[:, 1] += np.pi

    d = image_pts[seam] - core.points[seam]
    if (
        np.max(np.abs(d[:, 0])) > 1e-9
        or np.max(np.abs(d[:, 2])) > 1e-9
        or np.max(np.abs(d[:, 1] - np.pi)) > 1e-9
    ):
        raise AssemblyError("seam vertex mismatch beyond tolerance")

    points = np.vstack([core.points, image_pts])
    tris = np.vstack([core.tris, core.tris + V]).astype(np.int32)
    fixed = np.concatenate([core.fixed, core.fixed])
    axis = np.concatenate([core.axis, core.axis])
    ident = np.arange(2 * V, dtype=np.int64)
    ident[V + seam] = seam
    assembled = AnnulusMesh(
        points,
        tris,
        fixed,
        axis,
        BaseChart(),
        core.rings,
        core.levels,
        ident=ident,
        ring_coord=np.concatenate([core.ring_coord, core.ring_coord]),
    )

    topo = mesh_topology(assembled)
    if topo["euler_characteristic"] != 0 or topo["boundary_loops"] != 2:
        raise AssemblyError(
            "assembled surface is not a cylinder: "
            f"chi = {topo['euler_characteristic']}, loops = {topo['boundary_loops']}"
        )

    if profile is None:
        from .warp import quarter_cosine_profile

        profile = quarter_cosine_profile()
    metric = BaseMetric(profile)
    a_core = riemannian_area(core, metric)
    a_asm = riemannian_area(assembled, metric)
    if abs(a_asm - 2.0 * a_core) > 1e-12 * max(a_asm, 1.0):
        raise AssemblyError(
            f"assembly area {a_asm:.12g} is not double the core {a_core:.12g}"
        )

    emb_core = pole_embedding(profile, core.points)
    emb_image = pole_embedding(profile, image_pts)
    gaps = np.linalg.norm(emb_image[seam] - emb_core[seam], axis=1)

    seam_set = set(int(s) for s in seam)
    edge_tri: dict[tuple[int, int], list[int]] = {}
    for t in range(T):
        a, b, c = (int(v) for v in core.tris[t])
        for e in ((a, b), (b, c), (c, a)):
            key = (min(e), max(e))
            edge_tri.setdefault(key, []).append(t)
    seam_edges = [
        e for e, ts in edge_tri.items()
        if len(ts) == 1 and e[0] in seam_set and e[1] in seam_set
    ]
    devs = []
    for e in seam_edges:
        t = edge_tri[e][0]
        ids = core.tris[t]
        pc = emb_core[ids]
        pi_ = emb_image[ids]
        nc = np.cross(pc[1] - pc[0], pc[2] - pc[0])
        ni = np.cross(pi_[1] - pi_[0], pi_[2] - pi_[0])
        nn = np.linalg.norm(nc) * np.linalg.norm(ni)
        # sliver triangles carry no usable plane direction
        scale = (
            np.linalg.norm(pc[1] - pc[0]) * np.linalg.norm(pc[2] - pc[0])
            * np.linalg.norm(pi_[1] - pi_[0]) * np.linalg.norm(pi_[2] - pi_[0])
        )
        if nn < 1e-8 * max(scale, 1e-300):
            continue
        # the rotation reverses the seam-adjacent winding, so a smooth
        # continuation has anti-aligned raw normals
        devs.append(float(np.arccos(np.clip(-np.dot(nc, ni) / nn, -1.0, 1.0))))
    devs = np.asarray(devs) if devs else np.zeros(1)

    report = AssemblyReport(
        n_seam_vertices=int(seam.size),
        n_seam_edges=len(seam_edges),
        max_seam_gap=float(np.max(gaps)) if gaps.size else 0.0,
        max_dihedral_deviation=float(np.max(devs)),
        mean_dihedral_deviation=float(np.mean(devs)),
        core_area=a_core,
        assembled_area=a_asm,
        topology=topo,
    )
    return assembled, report


@dataclass
class StageRecord:
    n: int
    eps: float
    status: str
    solved: AnnulusMesh
    core: AnnulusMesh
    projected: AnnulusMesh
    assembled: AnnulusMesh | None
    result: SolveResult
    cut: CutReport
    assembly: AssemblyReport | None
    core_band_area: float
    stability: float
    message: str = ""

    def summary(self) -> dict:
        out = {
            "n": self.n,
            "eps": self.eps,
            "status": self.status,
            "area": self.result.area,
            "core_band_area": self.core_band_area,
            "iterations": self.result.iterations,
            "solve_status": self.result.status,
            "residual": self.result.residual,
            "grad_inf": self.result.grad_inf,
            "wall_time": self.result.wall_time,
            "stability": self.stability,
            "cut": self.cut.to_dict() if self.cut else None,
            "assembly": self.assembly.to_dict() if self.assembly else None,
        }
        if self.message:
            out["message"] = self.message
        return out


def _stage_displacement(metric, warm: AnnulusMesh, solved: AnnulusMesh) -> float:
    d = wrap_diff(solved.points - warm.points, warm.periods)
    G = metric.diag(warm.points)
    lengths = np.sqrt(np.einsum("vk,vk->v", d * G, d))
    spacing = 2.0 * np.pi / max(warm.levels - 1, 1)
    return float(np.max(lengths)) / spacing


def continuation_run(
    profile: WarpProfile,
    n: int,
    schedule: ContinuationSchedule,
    cfg: SolveConfig | None = None,
) -> list[StageRecord]:
    """Warm-started solve sequence over the eps schedule for one n.

    Stage j solves in the glued metric with eps_j = eps0 / 2^j, starting
    from the previous stage's solution resampled onto ring stations
    refined near the new blend joints.  A stalled or unconverged stage is
    retried once on a finer ring layout; if that also fails the record is
    marked incomplete and later stages are skipped.
    """
    cfg = cfg or SolveConfig()
    records: list[StageRecord] = []
    prev: AnnulusMesh | None = None
    for eps in schedule.eps_values:
        glue = build_glue_profile(eps)
        chart = BoxChart(n=n, eps=eps)
        metric = GluedMetric(profile, glue)
        stations = phi_stations(
            schedule.rings, glue if schedule.refine_stations else None
        )
        if prev is None:
            warm = build_initial_annulus(chart, schedule.rings, schedule.levels(n))
            warm = resample_rings(warm, stations)
        else:
            warm = resample_rings(prev, stations)
        warm.chart = chart
        result = minimize_area(warm, metric, cfg)
        if not result.converged:
            finer = phi_stations(
                schedule.rings + schedule.rings // 2,
                glue if schedule.refine_stations else None,
            )
            warm = resample_rings(result.mesh, finer)
            warm.chart = chart
            retry_cfg = replace(cfg, max_iter=2 * cfg.max_iter)
            result = minimize_area(warm, metric, retry_cfg)
        stability = _stage_displacement(metric, warm, result.mesh)

        if not result.converged:
            records.append(
                StageRecord(
                    n=n,
                    eps=eps,
                    status="incomplete",
                    solved=result.mesh,
                    core=None,
                    projected=None,
                    assembled=None,
                    result=result,
                    cut=None,
                    assembly=None,
                    core_band_area=float("nan"),
                    stability=stability,
                    message=f"solve did not converge ({result.status})",
                )
            )
            break

        core, cut = truncate_to_core(result.mesh, eps)
        projected = project_mesh_to_base(core)
        a_box = riemannian_area(core, metric)
        a_base = riemannian_area(projected, BaseMetric(profile))
        if abs(a_box - a_base) > 1e-12 * max(a_base, 1.0):
            raise PipelineError(
                f"projection changed the area: {a_box:.12g} vs {a_base:.12g}"
            )
        assembled, assembly = reflect_and_assemble(
            projected, seam_indices=cut.seam_vertices, profile=profile
        )
        band_core, _ = truncate_to_core(result.mesh, schedule.eps0)
        band_area = riemannian_area(band_core, metric)
        records.append(
            StageRecord(
                n=n,
                eps=eps,
                status="complete",
                solved=result.mesh,
                core=core,
                projected=projected,
                assembled=assembled,
                result=result,
                cut=cut,
                assembly=assembly,
                core_band_area=band_area,
                stability=stability,
            )
        )
        prev = result.mesh
    return records


def _write_content_addressed(mesh: AnnulusMesh, out_dir: Path, stem: str) -> str:
    tmp = out_dir / f"{stem}-tmp.obj"
    save_mesh(mesh, tmp)
    digest = hashlib.sha256(tmp.read_bytes()).hexdigest()[:12]
    final = out_dir / f"{stem}-{digest}.obj"
    tmp.replace(final)
    tmp.with_suffix(".json").replace(final.with_suffix(".json"))
    return final.name


def _write_telemetry(result: SolveResult, path: Path) -> None:
    # plain repr(float) keeps full round-trip precision in portable text
    lines = ["iteration,area,grad_inf"]
    for k, a in enumerate(result.area_history):
        g = repr(float(result.grad_history[k])) if k < result.grad_history.size else ""
        lines.append(f"{k},{float(a)!r},{g}")
    path.write_text("\n".join(lines) + "\n")


def run_sequence(
    profile: WarpProfile,
    ns,
    schedule: ContinuationSchedule,
    cfg: SolveConfig,
    out_dir,
    config_fields: dict | None = None,
    config_hash: str = "",
) -> dict:
    """Run the pipeline for each n and persist everything under out_dir.

    Stage meshes are stored as content-addressed OBJ/JSON pairs, solve
    histories as CSV, and the whole run is described by manifest.json.
    Stage failures for one n are recorded without aborting the others.
    Reruns with identical configuration reproduce the manifest except
    for its created_at stamp.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from . import __version__

    manifest = {
        "tool": "warpmin",
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": config_fields or {},
        "config_hash": config_hash,
        "schedule": schedule.to_dict(),
        "solver": cfg.to_dict(),
        "records": [],
    }
    for n in ns:
        rec = {"n": int(n), "stages": [], "status": "complete"}
        try:
            stages = continuation_run(profile, n, schedule, cfg)
        except (PipelineError, AssemblyError) as exc:
            rec["status"] = "error"
            rec["message"] = str(exc)
            manifest["records"].append(rec)
            continue
        for j, st in enumerate(stages):
            entry = st.summary()
            files = {"solved": _write_content_addressed(st.solved, out, f"n{n}-s{j}-solved")}
            if st.status == "complete":
                files["core"] = _write_content_addressed(st.core, out, f"n{n}-s{j}-core")
                files["projected"] = _write_content_addressed(
                    st.projected, out, f"n{n}-s{j}-projected"
                )
                files["assembled"] = _write_content_addressed(
                    st.assembled, out, f"n{n}-s{j}-assembled"
                )
            tpath = out / f"telemetry-n{n}-s{j}.csv"
            _write_telemetry(st.result, tpath)
            entry["files"] = files
            entry["telemetry"] = tpath.name
            rec["stages"].append(entry)
            if st.status != "complete":
                rec["status"] = "incomplete"
        if not rec["stages"]:
            rec["status"] = "incomplete"
        manifest["records"].append(rec)
    manifest["status"] = (
        "complete"
        if all(r["status"] == "complete" for r in manifest["records"])
        else "incomplete"
    )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest


def load_manifest(run_dir) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no manifest.json under {run_dir}")
    return json.loads(path.read_text())


def load_stage_mesh(run_dir, record: dict, stage: int, name: str) -> AnnulusMesh:
    fname = record["stages"][stage]["files"][name]
    return load_mesh(Path(run_dir) / fname)
