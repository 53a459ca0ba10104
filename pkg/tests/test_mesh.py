"""Mesh construction, areas, quality, topology, and OBJ persistence."""

import numpy as np
import pytest

from warpmin.charts import BaseChart, BoxChart
from warpmin.mesh import (
    build_initial_annulus,
    build_slice_mesh,
    characteristic_length,
    load_mesh,
    mesh_topology,
    riemannian_area,
    rotate_theta,
    save_mesh,
    triangle_qualities,
    vertex_masses,
    wrap_diff,
)
from warpmin.metric import BaseMetric, GluedMetric
from warpmin.charts import build_glue_profile

EPS = 0.3


def test_initial_annulus_shape_and_flags():
    chart = BoxChart(n=2, eps=EPS)
    m = build_initial_annulus(chart, 12, 33)
    assert m.n_vertices == 12 * 33
    assert m.levels == 33
    # only the first and last rings are fixed
    fixed_levels = np.unique(np.where(m.fixed)[0] // 12)
    assert set(fixed_levels.tolist()) == {0, 32}
    # ruled construction: z strictly monotone in level, theta = n z
    z = m.points[:, 2].reshape(33, 12)
    th = m.points[:, 1].reshape(33, 12)
    assert np.all(np.diff(z[:, 0]) > 0)
    assert np.allclose(th, 2 * z, atol=1e-12)
    assert z[0, 0] == pytest.approx(-np.pi)
    assert z[-1, 0] == pytest.approx(np.pi)


def test_initial_annulus_is_connected_annulus():
    m = build_initial_annulus(BoxChart(n=1, eps=EPS), 10, 17)
    topo = mesh_topology(m)
    assert topo["euler_characteristic"] == 0
    assert topo["boundary_loops"] == 2
    assert topo["is_manifold"]


def test_slice_mesh_area_oracles(quarter):
    metric = BaseMetric(quarter)
    # area of {z = a} is 4 pi omega(a)^2: 4 pi at the pinch, 9 pi at the top
    for a, target in ((0.0, 4 * np.pi), (np.pi, 9 * np.pi)):
        m = build_slice_mesh(a, (64, 128))
        assert riemannian_area(m, metric) == pytest.approx(target, rel=5e-4)


def test_slice_mesh_topology():
    m = build_slice_mesh(0.5, (24, 48))
    topo = mesh_topology(m)
    # pole rows stay as distinct degenerate circles, so combinatorially
    # the slice is a closed tube whose boundary loops are the pole rows
    assert topo["euler_characteristic"] == 0
    assert topo["boundary_loops"] == 2
    assert topo["is_manifold"]
    assert np.sum(m.axis) == 2 * 48


def test_vertex_masses_sum_to_area(quarter):
    glue = build_glue_profile(EPS)
    metric = GluedMetric(quarter, glue)
    m = build_initial_annulus(BoxChart(n=1, eps=EPS), 14, 29)
    masses = vertex_masses(m, metric)
    assert np.all(masses >= 0)
    assert float(np.sum(masses)) == pytest.approx(riemannian_area(m, metric), rel=1e-12)


def test_triangle_qualities_range(quarter):
    m = build_slice_mesh(1.0, (24, 48))
    q = triangle_qualities(m, BaseMetric(quarter))
    good = q[~np.all(m.axis[m.tris], axis=1)]
    assert np.all(good > 0.0) and np.all(good <= 1.0 + 1e-12)


def test_rotate_theta_is_isometry(quarter):
    metric = BaseMetric(quarter)
    m = build_slice_mesh(0.7, (16, 32))
    a0 = riemannian_area(m, metric)
    a1 = riemannian_area(rotate_theta(m, 1.3), metric)
    assert a1 == pytest.approx(a0, rel=1e-13)


def test_wrap_diff():
    d = np.array([[3.0, 0.1, 0.0], [-3.0, 0.0, 0.2]])
    out = wrap_diff(d, (np.pi, None, None))
    assert out[0, 0] == pytest.approx(3.0 - np.pi)
    assert out[1, 0] == pytest.approx(np.pi - 3.0)
    assert out[0, 1] == pytest.approx(0.1)


def test_characteristic_length_positive(quarter):
    m = build_slice_mesh(0.3, (16, 32))
    h = characteristic_length(m, BaseMetric(quarter))
    assert 0.0 < h < 1.0


def test_save_load_roundtrip(tmp_path, quarter):
    m = build_initial_annulus(BoxChart(n=2, eps=0.15), 9, 21)
    path = tmp_path / "strip.obj"
    save_mesh(m, path)
    assert path.exists() and path.with_suffix(".json").exists()
    back = load_mesh(path)
    assert np.array_equal(back.points, m.points)
    assert np.array_equal(back.tris, m.tris)
    assert np.array_equal(back.fixed, m.fixed)
    assert np.array_equal(back.axis, m.axis)
    assert np.array_equal(back.ident, m.ident)
    assert back.chart == m.chart
    assert back.levels == m.levels


def test_save_load_preserves_area(tmp_path, quarter):
    glue = build_glue_profile(EPS)
    metric = GluedMetric(quarter, glue)
    m = build_initial_annulus(BoxChart(n=1, eps=EPS), 11, 19)
    save_mesh(m, tmp_path / "a.obj")
    back = load_mesh(tmp_path / "a.obj")
    assert riemannian_area(back, metric) == riemannian_area(m, metric)
