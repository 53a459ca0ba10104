"""Metric field evaluation: values, jacobians, christoffels."""

import numpy as np

from warpmin.charts import build_glue_profile
from warpmin.metric import BaseMetric, GluedMetric, christoffel_diag, dual_norm, metric_dot

RNG = np.random.default_rng(3)


def _sample_points(count, phi_range):
    pts = np.empty((count, 3))
    pts[:, 0] = RNG.uniform(*phi_range, count)
    pts[:, 1] = RNG.uniform(-np.pi, np.pi, count)
    pts[:, 2] = RNG.uniform(-np.pi, np.pi, count)
    return pts


def test_base_metric_components(quarter):
    pts = _sample_points(64, (0.05, np.pi - 0.05))
    G = BaseMetric(quarter).diag(pts)
    w = quarter.omega(pts[:, 2])
    assert np.allclose(G[:, 0], w**2, rtol=1e-14)
    assert np.allclose(G[:, 1], (w * np.sin(pts[:, 0])) ** 2, rtol=1e-13)
    assert np.allclose(G[:, 2], 1.0)


def test_diag_jac_matches_fd(quarter):
    metric = BaseMetric(quarter)
    pts = _sample_points(32, (0.1, np.pi - 0.1))
    J = metric.diag_jac(pts)
    h = 1e-6
    for axis in range(3):
        dp = np.zeros(3)
        dp[axis] = h
        fd = (metric.diag(pts + dp) - metric.diag(pts - dp)) / (2 * h)
        assert np.max(np.abs(fd - J[:, :, axis])) < 1e-8, axis


def test_glued_metric_agrees_on_core(quarter):
    glue = build_glue_profile(0.3)
    pts = _sample_points(64, (0.3, np.pi - 0.3))
    Gb = BaseMetric(quarter).diag(pts)
    Gg = GluedMetric(quarter, glue).diag(pts)
    assert np.allclose(Gb, Gg, atol=1e-14)


def test_glued_metric_positive_in_tube(quarter):
    glue = build_glue_profile(0.3)
    pts = _sample_points(64, (-0.2, 0.2))
    G = GluedMetric(quarter, glue).diag(pts)
    # alpha has a positive cap, so g_thetatheta never degenerates
    assert np.min(G[:, 1]) > 0.01


def test_glued_jac_matches_fd(quarter):
    glue = build_glue_profile(0.3)
    metric = GluedMetric(quarter, glue)
    # stay off the blend joints where alpha is only C^1
    pts = _sample_points(32, (0.35, np.pi - 0.35))
    J = metric.diag_jac(pts)
    h = 1e-6
    for axis in range(3):
        dp = np.zeros(3)
        dp[axis] = h
        fd = (metric.diag(pts + dp) - metric.diag(pts - dp)) / (2 * h)
        assert np.max(np.abs(fd - J[:, :, axis])) < 1e-8, axis


def test_metric_dot_and_dual_norm(quarter):
    metric = BaseMetric(quarter)
    pts = _sample_points(16, (0.2, np.pi - 0.2))
    G = metric.diag(pts)
    v = RNG.normal(size=(16, 3))
    dots = metric_dot(G, v, v)
    assert np.all(dots > 0)
    # lowering then dual-norming a vector recovers its metric norm
    xi = G * v
    assert np.allclose(dual_norm(G, xi), np.sqrt(dots), rtol=1e-12)


def test_christoffel_symmetry_and_values(quarter):
    metric = BaseMetric(quarter)
    pts = _sample_points(16, (0.2, np.pi - 0.2))
    G = metric.diag(pts)
    dG = metric.diag_jac(pts)
    gam = christoffel_diag(G, dG)
    assert np.allclose(gam, np.swapaxes(gam, 2, 3), atol=1e-14)
    # Gamma^z_phiphi = -(1/2) d_z g_phiphi for the diagonal metric
    w = quarter.omega(pts[:, 2])
    dw = quarter.domega(pts[:, 2])
    assert np.allclose(gam[:, 2, 0, 0], -w * dw, rtol=1e-12)
    # Gamma^phi_phiz = omega'/omega
    assert np.allclose(gam[:, 0, 0, 2], dw / w, rtol=1e-12)
