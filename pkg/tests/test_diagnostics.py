"""Census, monotonicity, curvature proxy, and trend aggregation."""

import numpy as np
import pytest

from warpmin.charts import BoxChart, build_glue_profile, project_mesh_to_base
from warpmin.diagnostics import (
    CensusResult,
    Transversal,
    curvature_map,
    disk_check,
    lamination_trend,
    sheet_census,
    trace_monotonicity,
)
from warpmin.errors import DomainError
from warpmin.mesh import build_initial_annulus, build_slice_mesh
from warpmin.metric import BaseMetric, GluedMetric
from warpmin.pipeline import reflect_and_assemble, truncate_to_core

EPS = 0.3


@pytest.fixture(scope="module")
def ruled_assembled(quarter):
    chart = BoxChart(n=1, eps=EPS)
    m = build_initial_annulus(chart, 14, 29)
    core, cut = truncate_to_core(m, EPS)
    flat = project_mesh_to_base(core)
    assembled, _ = reflect_and_assemble(
        flat, seam_indices=cut.seam_vertices, profile=quarter
    )
    return assembled


def test_ruled_census_exact(ruled_assembled):
    # the ruled surface satisfies theta = z identically and linear
    # interpolation preserves that, so the crossing heights are exact:
    # the core copy at z = theta*, the rotated copy at z = theta* - pi
    cen = sheet_census(ruled_assembled)
    assert not cen.touched
    assert cen.positive.tolist() == [0.8]
    assert cen.negative.tolist() == [0.8 - np.pi]
    assert cen.two_sided
    assert cen.min_abs_height == 0.8
    assert np.isnan(cen.gap_cv)  # single gap has no spread statistic


def test_census_respects_probe_length(ruled_assembled):
    cen = sheet_census(ruled_assembled, Transversal(delta=2.0))
    assert cen.count_positive == 1
    assert cen.count_negative == 0  # 0.8 - pi lies below the shorter probe
    assert not cen.two_sided


def test_solved_census_counts(n1_records):
    cen = sheet_census(n1_records[0].assembled)
    assert (cen.count_positive, cen.count_negative) == (1, 1)
    assert cen.two_sided
    assert 0.15 < cen.min_abs_height < 0.6


def test_census_arithmetic():
    cen = CensusResult(
        positive=np.array([2.0, 1.0, 0.5]),
        negative=np.array([-1.8, -0.6]),
        touched=False,
        transversal=Transversal(),
    )
    assert cen.count_positive == 3 and cen.count_negative == 2
    assert cen.min_abs_height == 0.5
    assert cen.merged().tolist() == [-1.8, -0.6, 0.5, 1.0, 2.0]
    gaps = [1.2, 1.1, 0.5, 1.0]
    assert cen.gap_cv == pytest.approx(np.std(gaps) / np.mean(gaps))
    assert cen.spacing_ratios().tolist() == [0.5, 0.5]
    d = cen.to_dict()
    assert d["two_sided"] and d["positive"] == [2.0, 1.0, 0.5]


def test_transversal_validation():
    with pytest.raises(DomainError):
        Transversal(delta=0.0)
    with pytest.raises(DomainError):
        Transversal(delta=3.5)
    with pytest.raises(DomainError):
        Transversal(phi_star=0.1)
    with pytest.raises(DomainError):
        Transversal(phi_star=3.0)


def test_trace_monotone_on_ruled():
    m = build_initial_annulus(BoxChart(n=1, eps=EPS), 14, 29)
    rep = trace_monotonicity(m)
    assert rep["fraction"] == 1.0
    assert rep["planes_hit"] == 16
    assert rep["planes_skipped"] == 0
    assert rep["worst"]["violation"] == 0.0


def test_trace_detects_scrambled_heights():
    m = build_initial_annulus(BoxChart(n=1, eps=EPS), 14, 29)
    rng = np.random.default_rng(5)
    pts = m.points.copy()
    sel = ~m.fixed
    pts[sel, 2] += 0.35 * rng.standard_normal(sel.sum())
    m.points = pts
    rep = trace_monotonicity(m)
    assert rep["fraction"] < 1.0
    assert rep["worst"]["violation"] > 0.0
    assert rep["worst"]["phi"] is not None


def test_trace_rejects_bad_plane_count():
    m = build_initial_annulus(BoxChart(n=1, eps=EPS), 8, 17)
    with pytest.raises(DomainError):
        trace_monotonicity(m, plane_count=0)


def test_curvature_proxy_matches_slice_value(quarter):
    # on the slice z = pi/2 the proxy is 2 (omega'/omega)^2 = 0.08
    s = build_slice_mesh(np.pi / 2, (64, 128))
    out = curvature_map(s, BaseMetric(quarter), profile=quarter)
    proxy = out["proxy"]
    assert np.nanmedian(proxy) == pytest.approx(0.08, rel=0.01)
    assert out["excluded"] == 2 * 128  # both pole rows carry no fit
    assert np.all(np.isnan(proxy[s.axis]))
    bands = out["bands"]
    assert [b["lo"] for b in bands] == [0.0, 0.1, 0.5]
    assert bands[-1]["hi"] is None
    assert sum(b["count"] for b in bands) + out["excluded"] == s.n_vertices
    assert all(b["max"] < 0.1 for b in bands if b["max"] is not None)


def test_curvature_proxy_vanishes_on_flat_slice(quarter):
    # z = 0 is totally geodesic: omega'(0) = 0 and every one-ring is planar
    s = build_slice_mesh(0.0, (32, 64))
    out = curvature_map(s, BaseMetric(quarter), profile=quarter)
    assert np.nanmax(out["proxy"]) == 0.0


def test_disk_check_small_ball_is_disk(quarter):
    s = build_slice_mesh(0.0, (16, 32))
    out = disk_check(s, BaseMetric(quarter), (np.pi / 2, 0.37, 0.0), 0.35)
    assert len(out) == 1
    assert out[0]["disk"]
    assert out[0]["chi"] == 1 and out[0]["boundary_loops"] == 1


def test_disk_check_far_center_empty(quarter):
    s = build_slice_mesh(0.0, (16, 32))
    assert disk_check(s, BaseMetric(quarter), (np.pi / 2, 0.0, 5.0), 0.5) == []


def test_disk_check_whole_annulus_is_cylinder(quarter):
    m = build_initial_annulus(BoxChart(n=1, eps=EPS), 14, 29)
    metric = GluedMetric(quarter, build_glue_profile(EPS))
    out = disk_check(m, metric, (np.pi / 2, 0.0, 0.0), 50.0)
    assert len(out) == 1
    assert out[0]["chi"] == 0
    assert out[0]["boundary_loops"] == 2
    assert not out[0]["disk"]


def _census(pos, neg):
    return CensusResult(
        positive=np.asarray(pos, dtype=float),
        negative=np.asarray(neg, dtype=float),
        touched=False,
        transversal=Transversal(),
    )


def test_trend_verdicts():
    entries = [
        {"n": 2, "census": _census([1.0, 0.5], [-0.9, -0.4]), "trace_fraction": 1.0},
        {"n": 1, "census": _census([1.2], [-1.0])},
        {"n": 3, "census": _census([1.1, 0.6, 0.2], [-1.0, -0.5, -0.25])},
    ]
    rep = lamination_trend(entries)
    assert [r["n"] for r in rep.per_n] == [1, 2, 3]  # sorted by n
    assert rep.counts_nondecreasing is True
    assert rep.min_height_decreasing is True
    assert rep.all_two_sided
    assert rep.count_slope == pytest.approx((6 - 2) / 2)
    assert rep.per_n[1]["trace_fraction"] == 1.0
    assert "trace_fraction" not in rep.per_n[0]
    assert isinstance(rep.to_dict()["per_n"], list)


def test_trend_detects_violations():
    rep = lamination_trend(
        [
            {"n": 1, "census": _census([0.3], [-0.3])},
            {"n": 2, "census": _census([1.5, 0.9], [])},
        ]
    )
    assert rep.counts_nondecreasing is True
    assert rep.min_height_decreasing is False  # 0.3 -> 1.5 grew
    assert rep.all_two_sided is False


def test_trend_single_entry():
    rep = lamination_trend([{"n": 1, "census": _census([1.0], [-1.0])}])
    assert rep.counts_nondecreasing is None
    assert rep.min_height_decreasing is None
    assert rep.count_slope == 0.0


def test_trend_empty_rejected():
    with pytest.raises(DomainError):
        lamination_trend([])
