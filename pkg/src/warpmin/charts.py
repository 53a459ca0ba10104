"""Charts, tube glue profiles, and coordinate walls.

Two charts cover everything the pipeline needs:

* the base chart on Omega = S2 x S1: (phi, theta, z) with phi in [0, pi]
  (poles degenerate), theta periodic with period 2 pi, z in (-pi, pi];
* the box chart on the covering domain N = S1 x [-n pi, n pi] x [-pi, pi]
  used for the glued metric: phi runs on a circle of period pi, theta and
  z are bounded but not periodic.

The glue profile alpha replaces sin(phi) near the coordinate axes so the
metric closes up smoothly across phi = 0 == pi; it equals sin exactly on
the core band [eps, pi - eps].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DomainError, GlueConstructionError
from .warp import ChartPoint, WarpProfile

__all__ = [
    "BaseChart",
    "BoxChart",
    "GlueProfile",
    "BoundaryData",
    "WallReport",
    "build_glue_profile",
    "check_glue_profile",
    "boundary_circles",
    "project_to_base",
    "project_mesh_to_base",
    "wall_mean_curvature",
    "WALL_NAMES",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class BaseChart:
    """Chart on S2 x S1; theta is the only periodic coordinate."""

    tag: str = "base"

    @property
    def periods(self) -> tuple[float | None, float | None, float | None]:
        return (None, TWO_PI, None)

    @property
    def box(self) -> tuple[tuple[float, float] | None, ...]:
        return ((0.0, np.pi), None, (-np.pi, np.pi))

    def to_dict(self) -> dict:
        return {"tag": self.tag}


@dataclass(frozen=True)
class BoxChart:
    """Covering box for the glued metric: phi periodic, theta and z clamped."""

    n: int
    eps: float
    tag: str = "box"

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"winding count n = {self.n} must be >= 1")
        if not (0.0 < self.eps < np.pi / 4.0):
            raise DomainError(f"eps = {self.eps:.6g} outside (0, pi/4)")

    @property
    def periods(self) -> tuple[float | None, float | None, float | None]:
        return (np.pi, None, None)

    @property
    def theta_bounds(self) -> tuple[float, float]:
        return (-self.n * np.pi, self.n * np.pi)

    @property
    def z_bounds(self) -> tuple[float, float]:
        return (-np.pi, np.pi)

    @property
    def box(self) -> tuple[tuple[float, float] | None, ...]:
        return (None, self.theta_bounds, self.z_bounds)

    def to_dict(self) -> dict:
        return {"tag": self.tag, "n": self.n, "eps": self.eps}


def chart_from_dict(d: dict):
    if d["tag"] == "base":
        return BaseChart()
    if d["tag"] == "box":
        return BoxChart(n=int(d["n"]), eps=float(d["eps"]))
    raise ValueError(f"unknown chart tag {d['tag']!r}")


def _smoothstep(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quintic smoothstep and its derivative; C2 contact at both ends."""
    s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    ds = 30.0 * t * t * (1.0 - t) * (1.0 - t)
    return s, ds


@dataclass(frozen=True)
class GlueProfile:
    """Even, pi-periodic replacement for sin(phi) that stays positive.

    Equal to sin on [eps, pi - eps]; blended down by a quintic smoothstep
    on [eps - blend_width, eps] (mirrored on the other side) to a constant
    cap level below sin(eps - blend_width).  The cap plateau is flat, so
    the slope conditions hold in the weak sense there and strictly on the
    blend and core regions.
    """

    eps: float
    blend_width: float
    cap: float

    def _eval(self, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        phi = np.asarray(phi, dtype=float)
        scalar = phi.ndim == 0
        psi = phi - np.pi * np.floor(phi / np.pi)
        psi = np.atleast_1d(psi)
        a = np.empty_like(psi)
        da = np.empty_like(psi)
        lo = self.eps - self.blend_width
        hi = np.pi - lo

        core = (psi >= self.eps) & (psi <= np.pi - self.eps)
        capm = (psi < lo) | (psi > hi)
        left = (psi >= lo) & (psi < self.eps)
        right = (psi > np.pi - self.eps) & (psi <= hi)

        a[capm] = self.cap
        da[capm] = 0.0
        a[core] = np.sin(psi[core])
        da[core] = np.cos(psi[core])
        if np.any(left):
            p = psi[left]
            t = (p - lo) / self.blend_width
            s, ds = _smoothstep(t)
            sp = np.sin(p)
            a[left] = s * sp + (1.0 - s) * self.cap
            da[left] = (ds / self.blend_width) * (sp - self.cap) + s * np.cos(p)
        if np.any(right):
            p = psi[right]
            t = ((np.pi - p) - lo) / self.blend_width
            s, ds = _smoothstep(t)
            sp = np.sin(p)
            a[right] = s * sp + (1.0 - s) * self.cap
            da[right] = -(ds / self.blend_width) * (sp - self.cap) + s * np.cos(p)
        if scalar:
            return a[0], da[0]
        return a, da

    def alpha(self, phi):
        return self._eval(phi)[0]

    def dalpha(self, phi):
        return self._eval(phi)[1]

    def to_dict(self) -> dict:
        return {"eps": self.eps, "blend_width": self.blend_width, "cap": self.cap}


def check_glue_profile(glue: GlueProfile, grid_size: int = 4096) -> dict:
    """Verify the glue profile conditions on a grid; returns a report dict.

    Conditions: positivity, exact agreement with sin on the core band,
    mirror symmetry, periodicity, slope signs (nonnegative left of pi/2,
    nonpositive right of it, strictly positive on blend and core), the cap
    sitting below sin(eps - blend_width), and agreement of dalpha with a
    finite difference of alpha.
    """
    eps, w = glue.eps, glue.blend_width
    psi = np.linspace(0.0, np.pi, grid_size, endpoint=False)
    a, da = glue._eval(psi)
    report: dict[str, dict] = {}

    def record(name, ok, detail):
        report[name] = {"passed": bool(ok), "detail": detail}

    record("positivity", np.all(a > 0.0), f"min alpha = {float(np.min(a)):.6g}")

    core = (psi >= eps) & (psi <= np.pi - eps)
    dev = np.abs(a[core] - np.sin(psi[core]))
    record(
        "core-exactness",
        dev.size and float(np.max(dev)) <= 1e-15,
        f"max |alpha - sin| on core = {float(np.max(dev)) if dev.size else 0:.3e}",
    )

    mirror = np.abs(glue.alpha(np.pi - psi[1:]) - a[1:])
    record(
        "symmetry",
        float(np.max(mirror)) <= 1e-13,
        f"max mirror deviation = {float(np.max(mirror)):.3e}",
    )

    per = np.abs(glue.alpha(psi + np.pi) - a)
    record(
        "periodicity",
        float(np.max(per)) <= 1e-12,
        f"max period deviation = {float(np.max(per)):.3e}",
    )

    lefthalf = (psi > 0.0) & (psi < np.pi / 2.0)
    righthalf = psi > np.pi / 2.0
    wrong_left = float(np.min(da[lefthalf])) if np.any(lefthalf) else 0.0
    wrong_right = float(np.max(da[righthalf])) if np.any(righthalf) else 0.0
    rising = (psi >= eps - w + 1e-12) & (psi < np.pi / 2.0)
    strict = float(np.min(da[rising])) if np.any(rising) else 1.0
    record(
        "derivative-sign",
        wrong_left >= -1e-12 and wrong_right <= 1e-12 and strict > 0.0,
        f"min slope left = {wrong_left:.3e}, max slope right = {wrong_right:.3e}, "
        f"min blend/core slope = {strict:.3e}",
    )

    record(
        "cap-level",
        0.0 < glue.cap < np.sin(eps - w),
        f"cap = {glue.cap:.6g}, sin(eps - blend) = {np.sin(eps - w):.6g}",
    )

    h = 1e-6
    fd = (glue.alpha(psi + h) - glue.alpha(psi - h)) / (2.0 * h)
    err = float(np.max(np.abs(fd - da)))
    record("derivative-consistency", err <= 1e-6, f"max |fd - dalpha| = {err:.3e}")

    report["passed"] = all(v["passed"] for k, v in report.items() if k != "passed")
    return report


def build_glue_profile(
    eps: float,
    blend_width: float | None = None,
    cap_level: float | None = None,
    grid_size: int = 4096,
) -> GlueProfile:
    """Construct and verify a glue profile for tube radius eps.

    blend_width defaults to eps / 2 and must lie in (0, eps / 2]; the cap
    defaults to 0.9 sin(eps - blend_width).  Raises GlueConstructionError
    naming the first violated condition.
    """
    eps = float(eps)
    if not (0.0 < eps < np.pi / 2.0):
        raise GlueConstructionError("tube-radius", f"eps = {eps:.6g} outside (0, pi/2)")
    w = eps / 2.0 if blend_width is None else float(blend_width)
    if not (0.0 < w <= eps / 2.0 + 1e-15):
        raise GlueConstructionError(
            "blend-width", f"blend_width = {w:.6g} outside (0, eps/2]"
        )
    cap = 0.9 * np.sin(eps - w) if cap_level is None else float(cap_level)
    glue = GlueProfile(eps=eps, blend_width=w, cap=cap)
    report = check_glue_profile(glue, grid_size=grid_size)
    if not report["passed"]:
        for name, entry in report.items():
            if name != "passed" and not entry["passed"]:
                raise GlueConstructionError(name, entry["detail"])
    return glue


@dataclass(frozen=True)
class BoundaryData:
    """Sampled boundary circles of the box and the axis curves of the base.

    gamma3 / gamma4 are the fixed spanning circles {theta = -+ n pi,
    z = -+ pi} in box coordinates (full phi loops).  The axis curves are
    z-polylines at phi = 0 and phi = pi in the base chart, where theta is
    degenerate.
    """

    gamma3: np.ndarray
    gamma4: np.ndarray
    axis_north: np.ndarray
    axis_south: np.ndarray
    fixed: bool = True


def boundary_circles(chart: BoxChart, resolution: int = 64) -> BoundaryData:
    if resolution < 3:
        raise ValueError("resolution must be at least 3")
    phis = np.arange(resolution) * (np.pi / resolution)
    th_lo, th_hi = chart.theta_bounds
    z_lo, z_hi = chart.z_bounds
    g3 = np.column_stack([phis, np.full_like(phis, th_lo), np.full_like(phis, z_lo)])
    g4 = np.column_stack([phis, np.full_like(phis, th_hi), np.full_like(phis, z_hi)])
    zs = np.linspace(z_lo, z_hi, resolution)
    north = np.column_stack([np.zeros_like(zs), np.zeros_like(zs), zs])
    south = np.column_stack([np.full_like(zs, np.pi), np.zeros_like(zs), zs])
    return BoundaryData(g3, g4, north, south)


def project_to_base(p) -> ChartPoint:
    """Send a covering-chart point to the base chart: theta reduced mod 2 pi."""
    if isinstance(p, ChartPoint):
        phi, theta, z = p
    else:
        phi, theta, z = (float(v) for v in p)
    if not (-1e-12 <= phi <= np.pi + 1e-12):
        raise DomainError(f"phi = {phi:.6g} outside [0, pi]")
    if not (-np.pi - 1e-12 <= z <= np.pi + 1e-12):
        raise DomainError(f"z = {z:.6g} outside [-pi, pi]")
    theta = theta - TWO_PI * np.floor(theta / TWO_PI)
    if theta >= TWO_PI:
        theta -= TWO_PI
    return ChartPoint(phi, theta, z)


def project_mesh_to_base(mesh):
    """Send a covering-chart mesh to the base chart.

    theta is reduced mod 2 pi; for a box-chart mesh phi is reduced mod pi,
    which is only valid on the core band away from the glued tubes, so a
    vertex landing near phi = 0 or pi raises DomainError.  Edge geometry
    is unchanged because areas and intersections difference coordinates
    through the minimal periodic image.
    """
    out = mesh.copy()
    phi = out.points[:, 0]
    if isinstance(mesh.chart, BoxChart):
        phi -= np.pi * np.floor(phi / np.pi)
        pad = 1e-9
        if np.any(phi < pad) or np.any(phi > np.pi - pad):
            raise DomainError("mesh reaches the glued tubes; truncate before projecting")
    elif np.any(phi < -1e-12) or np.any(phi > np.pi + 1e-12):
        raise DomainError("mesh has phi outside [0, pi]")
    theta = out.points[:, 1]
    theta -= TWO_PI * np.floor(theta / TWO_PI)
    theta[theta >= TWO_PI] -= TWO_PI
    out.chart = BaseChart()
    return out


WALL_NAMES = ("z-bottom", "z-top", "theta-left", "theta-right")

# wall -> (held coordinate, held value getter, in-wall axes)
def _wall_spec(chart: BoxChart, wall: str):
    th_lo, th_hi = chart.theta_bounds
    z_lo, z_hi = chart.z_bounds
    table = {
        "z-bottom": (2, z_lo, (0, 1)),
        "z-top": (2, z_hi, (0, 1)),
        "theta-left": (1, th_lo, (0, 2)),
        "theta-right": (1, th_hi, (0, 2)),
    }
    if wall not in table:
        raise ValueError(f"unknown wall {wall!r}; expected one of {WALL_NAMES}")
    return table[wall]


@dataclass
class WallReport:
    wall: str
    samples: np.ndarray
    residuals: np.ndarray
    max_residual: float
    dihedrals: dict = field(default_factory=dict)
    max_dihedral_deviation: float = 0.0


def patch_normal_residual(
    metric,
    periods,
    center: np.ndarray,
    tangent_axes: tuple[int, int],
    normal_axis: int,
    halfwidth: float = 0.25,
    res: int = 6,
    fd_step: float = 1e-4,
) -> float:
    """First-variation mean-curvature probe of a coordinate surface.

    Builds a structured patch of the surface spanned by the two tangent
    coordinates around `center`, displaces the center vertex by +-fd_step
    along the normal coordinate, and returns the area difference per unit
    geodesic displacement per unit vertex mass.  For a minimal surface the
    value is ~0; for a slice {z = a} it recovers 2 omega'/omega.
    """
    from .mesh import AnnulusMesh, triangle_areas

    m = int(res)
    u = np.linspace(-halfwidth, halfwidth, 2 * m + 1)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    pts = np.tile(center, (uu.size, 1))
    pts[:, tangent_axes[0]] += uu.ravel()
    pts[:, tangent_axes[1]] += vv.ravel()
    nrow = 2 * m + 1
    tris = []
    for i in range(nrow - 1):
        for j in range(nrow - 1):
            a = i * nrow + j
            b = a + 1
            c = a + nrow
            d = c + 1
            tris.append((a, b, d))
            tris.append((a, d, c))
    tris = np.asarray(tris, dtype=np.int32)
    center_idx = m * nrow + m

    class _Patch:
        pass

    patch = _Patch()
    patch.points = pts
    patch.tris = tris
    patch.periods = periods

    g_center = metric.diag(center[None, :])[0]
    scale = np.sqrt(g_center[normal_axis])

    areas0 = triangle_areas(patch, metric)
    mass = float(np.sum(areas0[np.any(tris == center_idx, axis=1)])) / 3.0

    pts_plus = pts.copy()
    pts_plus[center_idx, normal_axis] += fd_step
    patch.points = pts_plus
    a_plus = float(np.sum(triangle_areas(patch, metric)))
    pts_minus = pts.copy()
    pts_minus[center_idx, normal_axis] -= fd_step
    patch.points = pts_minus
    a_minus = float(np.sum(triangle_areas(patch, metric)))

    return abs(a_plus - a_minus) / (2.0 * fd_step * scale * mass)


def wall_mean_curvature(
    profile: WarpProfile,
    glue: GlueProfile,
    chart: BoxChart,
    walls: Iterable[str] | None = None,
    samples_per_wall: int = 4,
    halfwidth: float = 0.25,
    res: int = 6,
    fd_step: float = 1e-4,
) -> list[WallReport]:
    """Probe the four box walls for minimality and mutual orthogonality.

    Each wall is sampled at interior points; the residual is the
    first-variation probe of patch_normal_residual (expected ~0 since
    det g depends on neither theta nor, at z = -+pi, on z to first order).
    Dihedral angles against the two adjacent walls are computed from the
    metric inner product of the coordinate conormals along the shared
    corner edges; the expected value is pi/2.
    """
    from .metric import GluedMetric

    metric = GluedMetric(profile, glue)
    reports = []
    th_lo, th_hi = chart.theta_bounds
    z_lo, z_hi = chart.z_bounds
    spans = {0: (0.0, np.pi), 1: (th_lo, th_hi), 2: (z_lo, z_hi)}
    names = tuple(walls) if walls is not None else WALL_NAMES
    for wall in names:
        axis, value, taxes = _wall_spec(chart, wall)
        samples = []
        k = int(np.ceil(np.sqrt(samples_per_wall)))
        for iu in range(k):
            for iv in range(k):
                if len(samples) >= samples_per_wall:
                    break
                p = np.zeros(3)
                p[axis] = value
                for t_ax, frac in zip(taxes, ((iu + 1) / (k + 1), (iv + 1) / (k + 1))):
                    lo, hi = spans[t_ax]
                    margin = halfwidth if t_ax != 0 else 0.0
                    p[t_ax] = lo + margin + frac * ((hi - margin) - (lo + margin))
                samples.append(p)
        samples = np.asarray(samples)
        residuals = np.array(
            [
                patch_normal_residual(
                    metric,
                    chart.periods,
                    c,
                    taxes,
                    axis,
                    halfwidth=halfwidth,
                    res=res,
                    fd_step=fd_step,
                )
                for c in samples
            ]
        )
        rep = WallReport(
            wall=wall,
            samples=samples,
            residuals=residuals,
            max_residual=float(np.max(residuals)),
        )
        # dihedral angles with the two adjacent walls along shared corner edges
        adjacent = {
            "z-bottom": ("theta-left", "theta-right"),
            "z-top": ("theta-left", "theta-right"),
            "theta-left": ("z-bottom", "z-top"),
            "theta-right": ("z-bottom", "z-top"),
        }[wall]
        worst = 0.0
        for other in adjacent:
            o_axis, o_value, _ = _wall_spec(chart, other)
            edge_pts = np.zeros((8, 3))
            edge_pts[:, 0] = np.linspace(0.0, np.pi, 10)[1:-1]
            edge_pts[:, axis] = value
            edge_pts[:, o_axis] = o_value
            G = metric.diag(edge_pts)
            cosang = np.zeros(edge_pts.shape[0])  # conormals are coordinate axes
            num = np.zeros(edge_pts.shape[0])
            if axis == o_axis:
                num = G[:, axis]
            cosang = num / np.sqrt(G[:, axis] * G[:, o_axis])
            angles = np.arccos(np.clip(cosang, -1.0, 1.0))
            rep.dihedrals[other] = angles
            worst = max(worst, float(np.max(np.abs(angles - np.pi / 2.0))))
        rep.max_dihedral_deviation = worst
        reports.append(rep)
    return reports
