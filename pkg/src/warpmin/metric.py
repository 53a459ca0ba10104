"""Vectorized diagonal metric fields and pointwise tensor algebra helpers.

Both the ambient metric and its tube-glued variant are diagonal in the
(phi, theta, z) chart, so a metric field only returns the three diagonal
components and their coordinate derivatives.  All evaluators accept
(N, 3) point arrays and are indifferent to wrapping of periodic
coordinates (they never read theta, and read phi / z through periodic
functions).
"""

from __future__ import annotations

import numpy as np

from .warp import WarpProfile

__all__ = [
    "MetricField",
    "BaseMetric",
    "GluedMetric",
    "metric_dot",
    "dual_norm",
    "christoffel_diag",
]


class MetricField:
    """Diagonal metric evaluator interface."""

    def diag(self, pts: np.ndarray) -> np.ndarray:
        """(N, 3) -> (N, 3) diagonal components (g_phiphi, g_thetatheta, g_zz)."""
        raise NotImplementedError

    def diag_jac(self, pts: np.ndarray) -> np.ndarray:
        """(N, 3) -> (N, 3, 3) array J[i, k, j] = d g_kk / d x_j at point i."""
        raise NotImplementedError


class BaseMetric(MetricField):
    """g = omega(z)^2 (dphi^2 + sin(phi)^2 dtheta^2) + dz^2."""

    def __init__(self, profile: WarpProfile):
        self.profile = profile

    def diag(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        phi, z = pts[:, 0], pts[:, 2]
        w = np.asarray(self.profile.omega(z), dtype=float)
        w2 = w * w
        s = np.sin(phi)
        out = np.empty((pts.shape[0], 3))
        out[:, 0] = w2
        out[:, 1] = w2 * s * s
        out[:, 2] = 1.0
        return out

    def diag_jac(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        phi, z = pts[:, 0], pts[:, 2]
        w = np.asarray(self.profile.omega(z), dtype=float)
        dw = np.asarray(self.profile.domega(z), dtype=float)
        s, c = np.sin(phi), np.cos(phi)
        out = np.zeros((pts.shape[0], 3, 3))
        out[:, 0, 2] = 2.0 * w * dw
        out[:, 1, 0] = w * w * 2.0 * s * c
        out[:, 1, 2] = 2.0 * w * dw * s * s
        return out


class GluedMetric(MetricField):
    """g = omega(z)^2 (dphi^2 + alpha(phi)^2 dtheta^2) + dz^2 on the glued chart.

    alpha is a tube glue profile (period pi in phi); on the core region
    where alpha == sin the field agrees with BaseMetric exactly.
    """

    def __init__(self, profile: WarpProfile, glue):
        self.profile = profile
        self.glue = glue

    def diag(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        phi, z = pts[:, 0], pts[:, 2]
        w = np.asarray(self.profile.omega(z), dtype=float)
        w2 = w * w
        a = self.glue.alpha(phi)
        out = np.empty((pts.shape[0], 3))
        out[:, 0] = w2
        out[:, 1] = w2 * a * a
        out[:, 2] = 1.0
        return out

    def diag_jac(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        phi, z = pts[:, 0], pts[:, 2]
        w = np.asarray(self.profile.omega(z), dtype=float)
        dw = np.asarray(self.profile.domega(z), dtype=float)
        a = self.glue.alpha(phi)
        da = self.glue.dalpha(phi)
        out = np.zeros((pts.shape[0], 3, 3))
        out[:, 0, 2] = 2.0 * w * dw
        out[:, 1, 0] = w * w * 2.0 * a * da
        out[:, 1, 2] = 2.0 * w * dw * a * a
        return out


def metric_dot(G: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise inner product of coordinate vectors under diagonal G."""
    return np.sum(G * a * b, axis=-1)


def dual_norm(G: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Norm of a covector field under the inverse diagonal metric."""
    return np.sqrt(np.sum(xi * xi / G, axis=-1))


def christoffel_diag(G: np.ndarray, dG: np.ndarray) -> np.ndarray:
    """Christoffel symbols of a diagonal metric.

    G is (N, 3), dG is (N, 3, 3) with dG[:, k, j] = d g_kk / d x_j.
    Returns (N, 3, 3, 3) with Gamma[:, k, i, j] = Gamma^k_{ij}.
    """
    n = G.shape[0]
    gam = np.zeros((n, 3, 3, 3))
    inv2 = 0.5 / G
    for k in range(3):
        for i in range(3):
            for j in range(3):
                val = 0.0
                if k == j:
                    val = val + dG[:, k, i]
                if k == i:
                    val = val + dG[:, k, j]
                if i == j:
                    val = val - dG[:, i, k]
                if np.isscalar(val) and val == 0.0:
                    continue
                gam[:, k, i, j] = inv2[:, k] * val
    return gam
