"""Warp profiles and curvature for rotationally symmetric metrics on S2 x S1.

The ambient metric is

    g = omega(z)^2 (dphi^2 + sin(phi)^2 dtheta^2) + dz^2

in coordinates (phi, theta, z) with phi in [0, pi], theta periodic with
period 2 pi and z periodic with period 2 pi, represented on (-pi, pi].
The warp factor omega is a smooth positive function of z alone.  An
admissible profile pinches the z = 0 sphere: it is even in z, has its
global minimum 1 at z = 0 with omega''(0) > 0, and grows to a strict
maximum at z = pi with no critical points in between.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InvalidProfileError, PerturbationTooLargeError

__all__ = [
    "WarpProfile",
    "ChartPoint",
    "MetricTensor",
    "ConditionCheck",
    "WarpValidation",
    "quarter_cosine_profile",
    "product_profile",
    "cosine_profile",
    "validate_warp",
    "metric_at",
    "scalar_curvature",
    "slice_mean_curvature",
    "slice_area",
    "graph_second_variation",
]


class ChartPoint(NamedTuple):
    phi: float
    theta: float
    z: float


class MetricTensor(NamedTuple):
    """Diagonal components of g at a point, ordered (phi, theta, z)."""

    g_phiphi: float
    g_thetatheta: float
    g_zz: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


@dataclass(frozen=True)
class WarpProfile:
    """Closed-form warp factor with two derivatives.

    Parameters
    ----------
    omega, domega, d2omega:
        Vectorized callables evaluating omega and its first two z-derivatives.
    mode:
        "warped" for a generic admissible profile, "product" for the
        control case omega == 1 (every slice minimal, only neutrally stable).
    name:
        Short label used in reports and manifests.
    """

    omega: Callable[[np.ndarray], np.ndarray]
    domega: Callable[[np.ndarray], np.ndarray]
    d2omega: Callable[[np.ndarray], np.ndarray]
    mode: str = "warped"
    name: str = ""

    def __call__(self, z):
        return self.omega(z)


def quarter_cosine_profile() -> WarpProfile:
    """The built-in admissible example omega(z) = 5/4 - cos(z)/4.

    omega(0) = 1, omega(pi) = 3/2, omega''(0) = 1/4.
    """
    return cosine_profile([1.25, -0.25], name="quarter-cosine")


def product_profile() -> WarpProfile:
    """omega == 1: the metric is the round product, used as a control."""
    return WarpProfile(
        omega=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        domega=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
        d2omega=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
        mode="product",
        name="product",
    )


def cosine_profile(coeffs: Sequence[float], name: str = "") -> WarpProfile:
    """Profile given by the cosine series c0 + sum_k ck cos(k z)."""
    c = np.asarray(list(coeffs), dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("cosine_profile needs a nonempty coefficient list")
    k = np.arange(c.size, dtype=float)

    def omega(z):
        z = np.asarray(z, dtype=float)
        return np.tensordot(c, np.cos(np.multiply.outer(k, z)), axes=1)

    def domega(z):
        z = np.asarray(z, dtype=float)
        return np.tensordot(-c * k, np.sin(np.multiply.outer(k, z)), axes=1)

    def d2omega(z):
        z = np.asarray(z, dtype=float)
        return np.tensordot(-c * k * k, np.cos(np.multiply.outer(k, z)), axes=1)

    label = name or "cosine[" + ",".join(f"{v:g}" for v in c) + "]"
    return WarpProfile(omega, domega, d2omega, mode="warped", name=label)


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    witness: float | None
    detail: str


@dataclass(frozen=True)
class WarpValidation:
    mode: str
    passed: bool
    checks: tuple[ConditionCheck, ...]
    grid_size: int

    def check(self, name: str) -> ConditionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "passed": self.passed,
            "grid_size": self.grid_size,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "witness": c.witness,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }


def _validation_grid(grid_size: int) -> np.ndarray:
    # Odd inclusive point count so that z = 0 and z = +-pi sit on the grid
    # exactly; the anchor and convexity checks rely on that.
    n = int(grid_size)
    if n < 64:
        raise ValueError("validation grid too coarse")
    if n % 2 == 0:
        n += 1
    return np.linspace(-np.pi, np.pi, n)


def _refine_sign_change(f, lo: float, hi: float, steps: int = 80) -> float:
    flo = float(f(lo))
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        fmid = float(f(mid))
        if flo * fmid <= 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def validate_warp(profile: WarpProfile, grid_size: int = 4096) -> WarpValidation:
    """Check a profile against the admissibility conditions on a z-grid.

    Warped mode checks, in order: positivity of omega, the anchor values
    omega(0) = 1 < omega(pi), evenness in z, omega''(0) > 0, and the absence
    of critical points in the open interval (0, pi) (sign changes of omega'
    are located by bisection refinement and reported as witnesses).
    Product mode instead checks omega == 1 with vanishing derivatives.

    Raises InvalidProfileError if any evaluation is non-finite.
    """
    zs = _validation_grid(grid_size)
    w = np.asarray(profile.omega(zs), dtype=float)
    dw = np.asarray(profile.domega(zs), dtype=float)
    d2w = np.asarray(profile.d2omega(zs), dtype=float)
    for arr, what in ((w, "omega"), (dw, "omega'"), (d2w, "omega''")):
        if not np.all(np.isfinite(arr)):
            bad = zs[~np.isfinite(arr)][0]
            raise InvalidProfileError(
                f"{what} is not finite at z = {bad:.6g}"
            )

    checks: list[ConditionCheck] = []

    if profile.mode == "product":
        for name, arr, target in (
            ("product-omega-one", w, 1.0),
            ("product-flat-first", dw, 0.0),
            ("product-flat-second", d2w, 0.0),
        ):
            dev = np.abs(arr - target)
            i = int(np.argmax(dev))
            ok = bool(dev[i] <= 1e-12)
            checks.append(
                ConditionCheck(
                    name,
                    ok,
                    None if ok else float(zs[i]),
                    f"max deviation {dev[i]:.3e}",
                )
            )
        passed = all(c.passed for c in checks)
        return WarpValidation("product", passed, tuple(checks), zs.size)

    # positivity
    i = int(np.argmin(w))
    pos_ok = bool(w[i] > 0.0)
    checks.append(
        ConditionCheck(
            "positivity",
            pos_ok,
            None if pos_ok else float(zs[i]),
            f"min omega = {w[i]:.6g}",
        )
    )

    # anchors: omega(0) = 1, omega(pi) > 1
    w0 = float(profile.omega(0.0))
    wpi = float(profile.omega(np.pi))
    anchors_ok = abs(w0 - 1.0) <= 1e-12 and (wpi - 1.0) > 1e-9
    checks.append(
        ConditionCheck(
            "anchors",
            anchors_ok,
            None if anchors_ok else 0.0 if abs(w0 - 1.0) > 1e-12 else np.pi,
            f"omega(0) = {w0:.12g}, omega(pi) = {wpi:.12g}",
        )
    )

    # evenness
    half = zs[zs > 0.0]
    dev = np.abs(
        np.asarray(profile.omega(half), dtype=float)
        - np.asarray(profile.omega(-half), dtype=float)
    )
    j = int(np.argmax(dev)) if dev.size else 0
    even_ok = bool(dev.size == 0 or dev[j] <= 1e-11)
    checks.append(
        ConditionCheck(
            "evenness",
            even_ok,
            None if even_ok else float(half[j]),
            f"max |omega(z) - omega(-z)| = {dev[j]:.3e}" if dev.size else "",
        )
    )

    # second derivative at the pinch
    d2w0 = float(profile.d2omega(0.0))
    conv_ok = d2w0 > 1e-12
    checks.append(
        ConditionCheck(
            "pinch-convexity",
            conv_ok,
            None if conv_ok else 0.0,
            f"omega''(0) = {d2w0:.6g}",
        )
    )

    # no critical points in (0, pi)
    interior = zs[(zs > 1e-9) & (zs < np.pi - 1e-9)]
    di = np.asarray(profile.domega(interior), dtype=float)
    scale = max(float(np.max(np.abs(di))), 1e-30)
    crit_ok = True
    witness = None
    detail = "omega' has constant sign on (0, pi)"
    near_zero = np.abs(di) <= 1e-12 * scale
    if np.any(near_zero):
        crit_ok = False
        witness = float(interior[np.argmax(near_zero)])
        detail = f"omega'({witness:.6g}) = 0 inside (0, pi)"
    else:
        flips = np.nonzero(di[:-1] * di[1:] < 0.0)[0]
        if flips.size:
            k = int(flips[0])
            witness = _refine_sign_change(
                profile.domega, float(interior[k]), float(interior[k + 1])
            )
            crit_ok = False
            detail = f"omega' changes sign near z = {witness:.6g}"
    checks.append(ConditionCheck("no-extra-critical-points", crit_ok, witness, detail))

    passed = all(c.passed for c in checks)
    return WarpValidation("warped", passed, tuple(checks), zs.size)


def _as_point(p) -> tuple[float, float, float]:
    if isinstance(p, ChartPoint):
        return float(p.phi), float(p.theta), float(p.z)
    phi, theta, z = p
    return float(phi), float(theta), float(z)


def metric_at(profile: WarpProfile, p) -> MetricTensor:
    """Diagonal metric components at a chart point.

    phi must lie in [0, pi]; theta is free (the metric does not read it);
    z is interpreted on the circle.
    """
    phi, _theta, z = _as_point(p)
    if not (-1e-12 <= phi <= np.pi + 1e-12):
        raise DomainError(f"phi = {phi:.6g} outside [0, pi]")
    w = float(profile.omega(z))
    w2 = w * w
    s = np.sin(min(max(phi, 0.0), np.pi))
    return MetricTensor(w2, w2 * s * s, 1.0)


def scalar_curvature(profile: WarpProfile, z):
    """Scalar curvature of the warped metric as a function of z.

    Uses the rotationally reduced expression

        Scal = -2 omega''/omega + (1 - omega'^2) / omega^2

    (half the convention that counts each sectional curvature pair twice;
    positivity is what downstream checks rely on, and that is
    convention-independent).
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(profile.omega(z), dtype=float)
    dw = np.asarray(profile.domega(z), dtype=float)
    d2w = np.asarray(profile.d2omega(z), dtype=float)
    out = -2.0 * d2w / w + (1.0 - dw * dw) / (w * w)
    if out.ndim == 0:
        return float(out)
    return out


def slice_mean_curvature(profile: WarpProfile, a):
    """Mean curvature (trace of the shape operator) of the slice {z = a}.

    Measured with respect to the unit normal pointing toward the z = 0
    sphere, so the value 2 omega'(|a|) / omega(|a|) is positive for
    0 < |a| < pi on admissible profiles and vanishes in product mode.
    """
    a = np.abs(np.asarray(a, dtype=float))
    out = 2.0 * np.asarray(profile.domega(a), dtype=float) / np.asarray(
        profile.omega(a), dtype=float
    )
    if out.ndim == 0:
        return float(out)
    return out


def slice_area(profile: WarpProfile, a) -> float:
    """Exact area of the slice {z = a}: 4 pi omega(a)^2."""
    w = float(profile.omega(float(a)))
    return 4.0 * np.pi * w * w


def graph_second_variation(
    profile: WarpProfile,
    u: Callable[[np.ndarray, np.ndarray], np.ndarray],
    t: float = 1e-2,
    resolution: tuple[int, int] = (64, 128),
) -> float:
    """Second derivative at t = 0 of the area of the graph {z = t u(phi, theta)}.

    Central finite differences of the discrete Riemannian area over the
    z = 0 sphere.  For u == 1 this converges to 8 pi omega''(0); it stays
    positive for every smooth u when the pinch is strict, and vanishes in
    product mode.

    u must be single valued at the coordinate axes (no theta dependence at
    phi = 0 or pi).  t is capped at 0.1; if the perturbed mesh degenerates
    a PerturbationTooLargeError is raised.
    """
    from .mesh import build_graph_mesh, riemannian_area, triangle_areas
    from .metric import BaseMetric

    t = float(t)
    if not (0.0 < abs(t) <= 0.1):
        raise PerturbationTooLargeError(f"amplitude t = {t:g} outside (0, 0.1]")
    metric = BaseMetric(profile)
    n_phi, n_theta = resolution
    areas = []
    for amp in (t, 0.0, -t):
        mesh = build_graph_mesh(u, amp, (n_phi, n_theta))
        if not np.all(np.abs(mesh.points[:, 2]) < np.pi):
            raise PerturbationTooLargeError("graph leaves the z chart range")
        tri_a = triangle_areas(mesh, metric)
        if amp != 0.0 and np.any(tri_a <= 0.0):
            raise PerturbationTooLargeError("perturbed graph mesh degenerated")
        areas.append(float(np.sum(tri_a)))
    a_plus, a_zero, a_minus = areas
    return (a_plus - 2.0 * a_zero + a_minus) / (t * t)


def _profile_triplet(profile: WarpProfile, z: np.ndarray):
    """omega, omega', omega'' evaluated together (shared by metric fields)."""
    w = np.asarray(profile.omega(z), dtype=float)
    dw = np.asarray(profile.domega(z), dtype=float)
    d2w = np.asarray(profile.d2omega(z), dtype=float)
    return w, dw, d2w
