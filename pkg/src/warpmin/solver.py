"""Discrete Plateau solver: area gradient and constrained minimization.

The discrete area functional is the one-point centroid quadrature of the
Riemannian measure over a structured triangle mesh.  Its gradient with
respect to vertex coordinates is assembled analytically, including the
dependence of the metric on the quadrature point, so a central finite
difference of the total area matches it to near machine precision.

Minimization runs a mass-preconditioned Polak-Ribiere conjugate gradient
on the normal speeds with Armijo backtracking, interleaved with an
area-safe tangential relaxation that keeps triangle shapes workable.
Free vertices are clamped to the chart box after each trial step;
boundary circles and axis vertices never move.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import DegenerateMeshError
from .mesh import (
    AnnulusMesh,
    assert_mesh_quality,
    riemannian_area,
    triangle_areas,
    triangle_edge_vectors,
    triangle_qualities,
    vertex_masses,
    rotate_theta,
)

__all__ = [
    "SolveConfig",
    "SolveResult",
    "area_gradient",
    "metric_vertex_normals",
    "mean_curvature_residual",
    "gradient_residuals",
    "minimize_area",
    "translation_disjointness",
]


@dataclass
class SolveConfig:
    """Knobs for minimize_area; defaults suit the 32 x 48 reference solve."""

    max_iter: int = 4000
    grad_tol: float = 5.0e-4
    mc_tol: float = 1.0e-3
    c1: float = 1.0e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    stall_limit: int = 50
    step_init: float = 1.0
    step_growth: float = 2.0
    step_max: float = 4.0
    precondition: bool = True
    quality_floor: float = 1.0e-9
    relax_quality: float = 0.05
    relax_strength: float = 0.5
    check_every: int = 25
    method: str = "ncg"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolveConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass
class SolveResult:
    mesh: AnnulusMesh
    converged: bool
    status: str
    iterations: int
    area: float
    residual: float
    grad_inf: float
    area_history: np.ndarray
    grad_history: np.ndarray
    wall_time: float
    message: str = ""


def area_gradient(mesh: AnnulusMesh, metric) -> np.ndarray:
    """Gradient of total quadrature area with respect to vertex coordinates.

    Returns a (V, 3) covector field.  Both the edge-vector dependence and
    the centroid dependence of the metric coefficients contribute; each
    vertex carries one third of the centroid term of every incident
    triangle.
    """
    u, w, c = triangle_edge_vectors(mesh)
    G = metric.diag(c)
    dG = metric.diag_jac(c)
    Gu = G * u
    Gw = G * w
    E = np.einsum("tk,tk->t", u, Gu)
    F = np.einsum("tk,tk->t", u, Gw)
    H = np.einsum("tk,tk->t", w, Gw)
    Q = E * H - F * F
    S = np.sqrt(np.maximum(Q, 0.0))
    inv = np.where(S > 1e-300, 0.25 / np.maximum(S, 1e-300), 0.0)

    mE = np.einsum("tkj,tk->tj", dG, u * u)
    mF = np.einsum("tkj,tk->tj", dG, u * w)
    mH = np.einsum("tkj,tk->tj", dG, w * w)
    mQ = (H[:, None] * mE + E[:, None] * mH - 2.0 * F[:, None] * mF) / 3.0

    dQ1 = 2.0 * H[:, None] * Gu - 2.0 * F[:, None] * Gw + mQ
    dQ2 = 2.0 * E[:, None] * Gw - 2.0 * F[:, None] * Gu + mQ
    dQ0 = -(2.0 * H[:, None] * Gu + 2.0 * E[:, None] * Gw
            - 2.0 * F[:, None] * (Gu + Gw)) + mQ

    grad = np.zeros_like(mesh.points)
    for k, dQk in enumerate((dQ0, dQ1, dQ2)):
        np.add.at(grad, mesh.tris[:, k], inv[:, None] * dQk)
    return grad


def metric_vertex_normals(mesh: AnnulusMesh, metric) -> np.ndarray:
    """Area-weighted unit normal vectors in the metric, per vertex.

    For a diagonal metric the Euclidean cross product of the two edge
    vectors is a conormal covector of the triangle plane; raising its
    index gives the normal direction.  Vertices whose accumulated normal
    vanishes (axis duplicates) get a zero vector.
    """
    u, w, c = triangle_edge_vectors(mesh)
    xi = np.cross(u, w)
    G = metric.diag(c)
    n_tri = xi / G
    areas = triangle_areas(mesh, metric)
    acc = np.zeros_like(mesh.points)
    for k in range(3):
        np.add.at(acc, mesh.tris[:, k], areas[:, None] * n_tri)
    Gv = metric.diag(mesh.points)
    norms = np.sqrt(np.einsum("vk,vk->v", acc * Gv, acc))
    out = np.zeros_like(acc)
    ok = norms > 1e-300
    out[ok] = acc[ok] / norms[ok, None]
    return out


def mean_curvature_residual(mesh: AnnulusMesh, metric) -> np.ndarray:
    """Per-vertex discrete mean curvature magnitude.

    The area gradient paired with the unit vertex normal, per unit lumped
    vertex mass.  On a slice {z = a} this recovers 2 omega'(a)/omega(a);
    on a discrete minimizer it vanishes to solver tolerance.  Fixed and
    axis vertices report zero.
    """
    grad = area_gradient(mesh, metric)
    normals = metric_vertex_normals(mesh, metric)
    masses = vertex_masses(mesh, metric)
    res = np.zeros(mesh.n_vertices)
    act = mesh.free & ~mesh.axis & (masses > 1e-300)
    res[act] = np.abs(np.einsum("vk,vk->v", grad[act], normals[act])) / masses[act]
    return res


def gradient_residuals(mesh: AnnulusMesh, metric, grad=None, masses=None) -> np.ndarray:
    """Per-vertex dual-metric norm of the area gradient per unit mass."""
    if grad is None:
        grad = area_gradient(mesh, metric)
    if masses is None:
        masses = vertex_masses(mesh, metric)
    Gv = metric.diag(mesh.points)
    dual = np.sqrt(np.einsum("vk,vk->v", grad * grad, 1.0 / Gv))
    res = np.zeros(mesh.n_vertices)
    act = mesh.free & (masses > 1e-300)
    res[act] = dual[act] / masses[act]
    return res


def _clamp_box(points: np.ndarray, box) -> None:
    for k, bounds in enumerate(box):
        if bounds is not None:
            np.clip(points[:, k], bounds[0], bounds[1], out=points[:, k])


def _nonaxis_min_quality(mesh: AnnulusMesh, metric) -> float:
    q = triangle_qualities(mesh, metric)
    q = q[~np.all(mesh.axis[mesh.tris], axis=1)]
    return float(np.min(q)) if q.size else 1.0


def _tangential_relax(work: AnnulusMesh, metric, area: float,
                      floor: float, strength: float, tries: int = 8):
    """Umbrella smoothing restricted to the tangent planes.

    Normal-only descent can squeeze triangles flat because it has no way
    to redistribute vertices within the surface.  This pass moves each
    free vertex toward the centroid of its one-ring, with the metric
    normal component removed so the surface shape is preserved to first
    order.  The strength is halved until the move strictly improves the
    worst non-axis triangle quality without raising the discrete area or
    breaching the quality floor.  Returns the new area, or None if no
    strength qualifies (points are then left untouched).
    """
    u, w, _ = triangle_edge_vectors(work)
    acc = np.zeros_like(work.points)
    deg = np.zeros(work.n_vertices)
    t = work.tris
    np.add.at(acc, t[:, 0], u + w)
    np.add.at(acc, t[:, 1], w - 2.0 * u)
    np.add.at(acc, t[:, 2], u - 2.0 * w)
    np.add.at(deg, t[:, 0], 2.0)
    np.add.at(deg, t[:, 1], 2.0)
    np.add.at(deg, t[:, 2], 2.0)
    delta = np.zeros_like(acc)
    pos = deg > 0
    delta[pos] = acc[pos] / deg[pos, None]

    normals = metric_vertex_normals(work, metric)
    Gv = metric.diag(work.points)
    comp = np.einsum("vk,vk->v", delta * Gv, normals)
    delta -= comp[:, None] * normals
    act = work.free & ~work.axis
    delta[~act] = 0.0

    base = work.points.copy()
    q_old = _nonaxis_min_quality(work, metric)
    s = strength
    for _ in range(tries):
        cand = base + s * delta
        _clamp_box(cand, work.chart.box)
        work.points = cand
        a_new = riemannian_area(work, metric)
        q_new = _nonaxis_min_quality(work, metric)
        if a_new <= area and q_new > max(q_old, floor):
            return a_new
        s *= 0.5
    work.points = base
    return None


def minimize_area(mesh: AnnulusMesh, metric, config: SolveConfig | None = None) -> SolveResult:
    """Minimize discrete area over the free vertices of `mesh`.

    Vertices move along their metric unit normals only; tangential motion
    is pure reparameterization for the continuum functional and only
    degrades triangle shape, so it is projected out.  The normal speeds
    follow a mass-preconditioned Polak-Ribiere conjugate gradient with
    restart, under Armijo backtracking on the (box-clamped) candidate.
    When the worst triangle quality drops below relax_quality, or the
    line search fails outright, a tangential umbrella relaxation
    redistributes vertices within the surface; the relaxation is only
    accepted when it does not raise the area, so the recorded history
    stays nonincreasing and every line-search step in it is a strict
    decrease.  Convergence is declared when the per-vertex mean-curvature
    residual drops below grad_tol.  Returns a SolveResult whose status is
    "converged", "stalled", or "max-iter".  Raises DegenerateMeshError if
    a triangle collapses below the quality floor.
    """
    cfg = config or SolveConfig()
    work = mesh.copy()
    box = work.chart.box
    free = work.free
    t0 = time.perf_counter()

    def total_area():
        return riemannian_area(work, metric)

    area = total_area()
    area_hist = [area]
    grad_hist = []
    d_speed = None
    rho_prev = None
    step = cfg.step_init
    fails = 0
    status = "max-iter"
    iterations = 0

    def try_relax():
        nonlocal area, d_speed, rho_prev, step
        a_rel = _tangential_relax(work, metric, area,
                                  cfg.quality_floor, cfg.relax_strength)
        if a_rel is None:
            return False
        if a_rel < area:
            area_hist.append(a_rel)
        area = a_rel
        d_speed = None
        rho_prev = None
        step = cfg.step_init
        return True

    for it in range(cfg.max_iter):
        iterations = it + 1
        if cfg.relax_quality > 0.0 and _nonaxis_min_quality(work, metric) < cfg.relax_quality:
            try_relax()
        g = area_gradient(work, metric)
        masses = vertex_masses(work, metric)
        normals = metric_vertex_normals(work, metric)
        pair = np.einsum("vk,vk->v", g, normals)
        act = free & ~work.axis & (masses > 1e-300)
        rho = np.zeros(work.n_vertices)
        rho[act] = pair[act] / masses[act]
        g_masked = np.where(free[:, None], g, 0.0)

        g_inf = float(np.max(np.abs(rho))) if rho.size else 0.0
        grad_hist.append(g_inf)
        if g_inf <= cfg.grad_tol:
            status = "converged"
            break

        steer = rho if cfg.precondition else np.where(act, pair, 0.0)
        if cfg.method == "ncg" and d_speed is not None and rho_prev is not None:
            num = float(np.sum(steer * (steer - rho_prev)))
            den = float(np.sum(rho_prev * rho_prev))
            beta = max(0.0, num / den) if den > 0 else 0.0
            d_speed = -steer + beta * d_speed
        else:
            d_speed = -steer
        rho_prev = steer.copy()
        d = d_speed[:, None] * normals

        slope = float(np.sum(g_masked * d))
        if slope >= 0.0:
            d_speed = -steer
            d = d_speed[:, None] * normals
            slope = float(np.sum(g_masked * d))
        accepted = False
        alpha = step
        base = work.points.copy()
        for _ in range(cfg.max_backtracks):
            cand = base.copy()
            cand[free] += alpha * d[free]
            _clamp_box(cand, box)
            pred = float(np.sum(g_masked * (cand - base)))
            work.points = cand
            a_new = total_area()
            if pred < 0.0 and a_new <= area + cfg.c1 * pred:
                # a step that folds a triangle is infeasible even if it
                # lowers the measured area
                q = triangle_qualities(work, metric)
                q = q[~np.all(work.axis[work.tris], axis=1)]
                if not q.size or float(np.min(q)) > cfg.quality_floor:
                    accepted = True
                    break
            alpha *= cfg.backtrack
        if not accepted:
            work.points = base
            d_speed = None
            step = cfg.step_init
            if cfg.relax_quality > 0.0 and try_relax():
                continue
            fails += 1
            if fails >= cfg.stall_limit:
                status = "stalled"
                break
            continue

        fails = 0
        area = a_new
        area_hist.append(area)
        step = min(alpha * cfg.step_growth, cfg.step_max)
        if cfg.check_every and iterations % cfg.check_every == 0:
            assert_mesh_quality(work, metric, cfg.quality_floor)

    assert_mesh_quality(work, metric, cfg.quality_floor)
    mc = mean_curvature_residual(work, metric)
    residual = float(np.max(mc)) if mc.size else 0.0
    g_inf = grad_hist[-1] if grad_hist else residual
    converged = status == "converged" and residual <= cfg.mc_tol
    if status == "converged" and not converged:
        status = "tolerance-miss"
    return SolveResult(
        mesh=work,
        converged=converged,
        status=status,
        iterations=iterations,
        area=area,
        residual=residual,
        grad_inf=g_inf,
        area_history=np.asarray(area_hist),
        grad_history=np.asarray(grad_hist),
        wall_time=time.perf_counter() - t0,
        message=f"{status} after {iterations} iterations",
    )


def translation_disjointness(
    mesh: AnnulusMesh,
    angles,
    mode: str = "brute",
) -> dict:
    """Check the surface against its theta-rotations for intersections.

    Rotates a copy of the mesh by each angle about the vertical axes and
    collects triangle-triangle intersection segments.  Returns a mapping
    angle -> {"disjoint": bool, "segments": array}.
    """
    from .intersect import mesh_intersections

    out = {}
    for ang in angles:
        other = rotate_theta(mesh, float(ang))
        segs = mesh_intersections(mesh, other, mode=mode)
        out[float(ang)] = {"disjoint": segs.shape[0] == 0, "segments": segs}
    return out
