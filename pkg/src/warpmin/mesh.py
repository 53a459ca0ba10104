"""Structured triangle meshes in chart coordinates.

Meshes are stored as vertex arrays in chart coordinates together with a
triangle index array.  Edge vectors are always formed through the minimal
periodic image for the chart's periodic coordinates, so a mesh may cross
a periodic seam without duplicated vertices.  Vertex identifications
(used after reflection assembly) are tracked by an `ident` class array
rather than by welding coordinates, which keeps per-copy geometry exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .charts import BaseChart, BoxChart, chart_from_dict
from .errors import DegenerateMeshError, DomainError

__all__ = [
    "AnnulusMesh",
    "wrap_diff",
    "triangle_edge_vectors",
    "triangle_areas",
    "riemannian_area",
    "vertex_masses",
    "triangle_qualities",
    "assert_mesh_quality",
    "build_initial_annulus",
    "build_slice_mesh",
    "build_graph_mesh",
    "rotate_theta",
    "mesh_topology",
    "characteristic_length",
    "save_mesh",
    "load_mesh",
]


@dataclass
class AnnulusMesh:
    """Triangle mesh with chart metadata.

    Attributes
    ----------
    points : (V, 3) float array
        Vertex coordinates in the chart of `chart`.
    tris : (T, 3) int array
        Counterclockwise vertex indices.
    fixed : (V,) bool array
        Vertices held fixed by the solver (boundary circles, poles).
    axis : (V,) bool array
        Vertices lying on a degenerate coordinate locus (sphere poles).
    chart : BaseChart or BoxChart
    rings : int
        Vertices per cross-sectional ring (periodic direction).
    levels : int
        Number of rings along the strip (or rows for slice meshes).
    ident : (V,) int array
        Identification classes; defaults to each vertex being its own
        class.  Topology is computed over classes, geometry over copies.
    ring_coord : (V,) float array
        Normalized strip parameter in [0, 1] used for resampling.
    """

    points: np.ndarray
    tris: np.ndarray
    fixed: np.ndarray
    axis: np.ndarray
    chart: object
    rings: int
    levels: int
    ident: np.ndarray = None
    ring_coord: np.ndarray = None

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        self.tris = np.ascontiguousarray(self.tris, dtype=np.int32)
        self.fixed = np.asarray(self.fixed, dtype=bool)
        self.axis = np.asarray(self.axis, dtype=bool)
        if self.ident is None:
            self.ident = np.arange(self.points.shape[0], dtype=np.int64)
        else:
            self.ident = np.asarray(self.ident, dtype=np.int64)
        if self.ring_coord is None:
            self.ring_coord = np.zeros(self.points.shape[0])
        else:
            self.ring_coord = np.asarray(self.ring_coord, dtype=float)

    @property
    def n_vertices(self) -> int:
        return self.points.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.tris.shape[0]

    @property
    def free(self) -> np.ndarray:
        return ~self.fixed

    @property
    def periods(self):
        return self.chart.periods

    def copy(self) -> "AnnulusMesh":
        return AnnulusMesh(
            self.points.copy(),
            self.tris.copy(),
            self.fixed.copy(),
            self.axis.copy(),
            self.chart,
            self.rings,
            self.levels,
            self.ident.copy(),
            self.ring_coord.copy(),
        )


def wrap_diff(d: np.ndarray, periods) -> np.ndarray:
    """Reduce coordinate differences to the minimal periodic image."""
    d = np.array(d, dtype=float, copy=True)
    for k, p in enumerate(periods):
        if p is not None:
            d[..., k] -= p * np.round(d[..., k] / p)
    return d


def triangle_edge_vectors(mesh):
    """Wrapped edge vectors u = P1 - P0, w = P2 - P0 and quadrature centroids.

    Centroids are taken in the unwrapped frame of P0 so a triangle that
    straddles a periodic seam is measured where it actually sits.
    """
    p0 = mesh.points[mesh.tris[:, 0]]
    u = wrap_diff(mesh.points[mesh.tris[:, 1]] - p0, mesh.periods)
    w = wrap_diff(mesh.points[mesh.tris[:, 2]] - p0, mesh.periods)
    centroids = p0 + (u + w) / 3.0
    return u, w, centroids


def triangle_areas(mesh, metric) -> np.ndarray:
    """Riemannian triangle areas under one-point centroid quadrature."""
    u, w, c = triangle_edge_vectors(mesh)
    G = metric.diag(c)
    E = np.einsum("tk,tk->t", u * G, u)
    F = np.einsum("tk,tk->t", u * G, w)
    H = np.einsum("tk,tk->t", w * G, w)
    Q = np.maximum(E * H - F * F, 0.0)
    return 0.5 * np.sqrt(Q)


def riemannian_area(mesh, metric) -> float:
    return float(np.sum(triangle_areas(mesh, metric)))


def vertex_masses(mesh, metric) -> np.ndarray:
    """Barycentric lumped vertex masses: one third of incident areas."""
    areas = triangle_areas(mesh, metric)
    masses = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(masses, mesh.tris[:, k], areas / 3.0)
    return masses


def triangle_qualities(mesh, metric) -> np.ndarray:
    """Shape quality in (0, 1]: metric determinant over squared trace.

    1 for a metrically right isoceles pair of edge vectors, 0 for a
    collapsed triangle.
    """
    u, w, c = triangle_edge_vectors(mesh)
    G = metric.diag(c)
    E = np.einsum("tk,tk->t", u * G, u)
    F = np.einsum("tk,tk->t", u * G, w)
    H = np.einsum("tk,tk->t", w * G, w)
    Q = np.maximum(E * H - F * F, 0.0)
    tr = E + H
    out = np.zeros_like(Q)
    ok = tr > 0
    out[ok] = 4.0 * Q[ok] / (tr[ok] * tr[ok])
    return out


def assert_mesh_quality(mesh, metric, floor: float = 1e-9):
    q = triangle_qualities(mesh, metric)
    interior = ~np.all(mesh.axis[mesh.tris], axis=1) if np.any(mesh.axis) else slice(None)
    qq = q if isinstance(interior, slice) else np.where(interior, q, 1.0)
    worst = int(np.argmin(qq))
    if qq[worst] < floor:
        raise DegenerateMeshError(worst, float(qq[worst]))


def build_initial_annulus(chart: BoxChart, rings: int, levels: int) -> AnnulusMesh:
    """Ruled helicoidal strip spanning the two boundary circles of the box.

    Level i at parameter t = i / (levels - 1) is a full phi ring of
    `rings` vertices at theta = -n pi + 2 n pi t, z = -pi + 2 pi t, so the
    initial surface satisfies theta = n z.  The first and last levels are
    the fixed boundary circles.
    """
    if rings < 3:
        raise DomainError("rings must be at least 3")
    if levels < 2:
        raise DomainError("levels must be at least 2")
    R, L = int(rings), int(levels)
    t = np.linspace(0.0, 1.0, L)
    phis = np.arange(R) * (np.pi / R)
    theta = -chart.n * np.pi + 2.0 * chart.n * np.pi * t
    z = -np.pi + 2.0 * np.pi * t
    points = np.empty((R * L, 3))
    points[:, 0] = np.tile(phis, L)
    points[:, 1] = np.repeat(theta, R)
    points[:, 2] = np.repeat(z, R)
    tris = _strip_triangles(R, L, periodic_rows=True)
    fixed = np.zeros(R * L, dtype=bool)
    fixed[:R] = True
    fixed[-R:] = True
    axis = np.zeros(R * L, dtype=bool)
    ring_coord = np.repeat(t, R)
    return AnnulusMesh(points, tris, fixed, axis, chart, R, L, ring_coord=ring_coord)


def _strip_triangles(R: int, L: int, periodic_rows: bool) -> np.ndarray:
    tris = []
    ncols = R if periodic_rows else R - 1
    for i in range(L - 1):
        for j in range(ncols):
            j2 = (j + 1) % R
            a = i * R + j
            b = i * R + j2
            c = (i + 1) * R + j
            d = (i + 1) * R + j2
            tris.append((a, b, d))
            tris.append((a, d, c))
    return np.asarray(tris, dtype=np.int32)


def build_slice_mesh(a: float, resolution: tuple[int, int] = (64, 128)) -> AnnulusMesh:
    """Latitude-longitude mesh of the round slice {z = a} in the base chart.

    resolution = (n_phi, n_theta) counts intervals; there are n_phi + 1
    phi rows including duplicated pole rows, which are marked fixed and
    axis.  Triangles touching a pole still carry positive area because
    quadrature samples the centroid.
    """
    n_phi, n_theta = int(resolution[0]), int(resolution[1])
    if n_phi < 3 or n_theta < 3:
        raise DomainError("slice resolution must be at least 3 x 3")
    if not (-np.pi - 1e-12 <= a <= np.pi + 1e-12):
        raise DomainError(f"slice height {a:.6g} outside [-pi, pi]")
    rows = n_phi + 1
    phis = np.linspace(0.0, np.pi, rows)
    thetas = np.arange(n_theta) * (2.0 * np.pi / n_theta)
    points = np.empty((rows * n_theta, 3))
    points[:, 0] = np.repeat(phis, n_theta)
    points[:, 1] = np.tile(thetas, rows)
    points[:, 2] = a
    tris = []
    for i in range(rows - 1):
        for j in range(n_theta):
            j2 = (j + 1) % n_theta
            p = i * n_theta + j
            q = i * n_theta + j2
            r = (i + 1) * n_theta + j
            s = (i + 1) * n_theta + j2
            tris.append((p, q, s))
            tris.append((p, s, r))
    tris = np.asarray(tris, dtype=np.int32)
    fixed = np.zeros(rows * n_theta, dtype=bool)
    fixed[:n_theta] = True
    fixed[-n_theta:] = True
    axis = fixed.copy()
    mesh = AnnulusMesh(points, tris, fixed, axis, BaseChart(), n_theta, rows)
    mesh.ring_coord = np.repeat(phis / np.pi, n_theta)
    return mesh


def build_graph_mesh(height_fn, amplitude: float, resolution=(64, 128)) -> AnnulusMesh:
    """Graph {z = amplitude * height_fn(phi, theta)} over the equatorial slice."""
    mesh = build_slice_mesh(0.0, resolution)
    mesh.points[:, 2] = amplitude * np.asarray(
        height_fn(mesh.points[:, 0], mesh.points[:, 1]), dtype=float
    )
    return mesh


def rotate_theta(mesh: AnnulusMesh, angle: float) -> AnnulusMesh:
    """Copy of the mesh rotated about the vertical axes by `angle` in theta."""
    out = mesh.copy()
    out.points[:, 1] += angle
    if isinstance(out.chart, BaseChart):
        th = out.points[:, 1]
        th -= 2.0 * np.pi * np.floor(th / (2.0 * np.pi))
    return out


def mesh_topology(mesh: AnnulusMesh) -> dict:
    """Combinatorial invariants computed over identification classes."""
    cls = mesh.ident[mesh.tris]
    used = np.unique(cls)
    edges = np.concatenate([cls[:, [0, 1]], cls[:, [1, 2]], cls[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    V = used.size
    E = uniq.shape[0]
    F = mesh.n_triangles
    boundary = uniq[counts == 1]
    n_loops = _count_cycles(boundary)
    return {
        "euler_characteristic": int(V - E + F),
        "vertices": int(V),
        "edges": int(E),
        "faces": int(F),
        "boundary_edges": int(boundary.shape[0]),
        "boundary_loops": int(n_loops),
        "is_manifold": bool(np.all(counts <= 2)),
    }


def _count_cycles(edges: np.ndarray) -> int:
    if edges.shape[0] == 0:
        return 0
    parent: dict[int, int] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[ra] = rb
    return len({find(int(v)) for v in edges.ravel()})


def characteristic_length(mesh: AnnulusMesh, metric) -> float:
    """Median metric edge length; the reference scale for residual tests."""
    u, w, c = triangle_edge_vectors(mesh)
    G = metric.diag(c)
    lu = np.sqrt(np.einsum("tk,tk->t", u * G, u))
    lw = np.sqrt(np.einsum("tk,tk->t", w * G, w))
    return float(np.median(np.concatenate([lu, lw])))


def save_mesh(mesh: AnnulusMesh, obj_path) -> None:
    """Write vertices and faces as OBJ plus a JSON sidecar of metadata.

    The sidecar (same stem, .json) carries the chart, resolution, fixed
    and axis flags, identification classes, and ring coordinates so a
    round trip reproduces the mesh exactly.
    """
    obj_path = Path(obj_path)
    lines = []
    for p in mesh.points:
        lines.append(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}")
    for t in mesh.tris:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    obj_path.write_text("\n".join(lines) + "\n")
    meta = {
        "chart": mesh.chart.to_dict(),
        "rings": mesh.rings,
        "levels": mesh.levels,
        "fixed": np.flatnonzero(mesh.fixed).tolist(),
        "axis": np.flatnonzero(mesh.axis).tolist(),
        "ring_coord": mesh.ring_coord.tolist(),
    }
    if not np.array_equal(mesh.ident, np.arange(mesh.n_vertices)):
        meta["ident"] = mesh.ident.tolist()
    obj_path.with_suffix(".json").write_text(json.dumps(meta, indent=1))


def load_mesh(obj_path) -> AnnulusMesh:
    obj_path = Path(obj_path)
    points = []
    tris = []
    for line in obj_path.read_text().splitlines():
        if line.startswith("v "):
            points.append([float(x) for x in line.split()[1:4]])
        elif line.startswith("f "):
            tris.append([int(x.split("/")[0]) - 1 for x in line.split()[1:4]])
    points = np.asarray(points, dtype=float)
    tris = np.asarray(tris, dtype=np.int32)
    meta = json.loads(obj_path.with_suffix(".json").read_text())
    V = points.shape[0]
    fixed = np.zeros(V, dtype=bool)
    fixed[np.asarray(meta["fixed"], dtype=int)] = True
    axis = np.zeros(V, dtype=bool)
    if meta["axis"]:
        axis[np.asarray(meta["axis"], dtype=int)] = True
    ident = np.asarray(meta["ident"], dtype=np.int64) if "ident" in meta else None
    mesh = AnnulusMesh(
        points,
        tris,
        fixed,
        axis,
        chart_from_dict(meta["chart"]),
        int(meta["rings"]),
        int(meta["levels"]),
        ident=ident,
        ring_coord=np.asarray(meta["ring_coord"], dtype=float),
    )
    return mesh
