"""Triangle-triangle intersection: hand oracles and grid/brute agreement."""

import numpy as np
import pytest

from warpmin.charts import BoxChart
from warpmin.intersect import mesh_intersections, pair_segments, triangle_soup
from warpmin.mesh import AnnulusMesh

CHART = BoxChart(n=1, eps=0.3)


def _soup_mesh(tris_xyz):
    tris_xyz = np.asarray(tris_xyz, dtype=float)
    T = tris_xyz.shape[0]
    pts = tris_xyz.reshape(T * 3, 3)
    tris = np.arange(T * 3, dtype=np.int32).reshape(T, 3)
    flags = np.zeros(T * 3, dtype=bool)
    return AnnulusMesh(pts, tris, flags, flags.copy(), CHART, 1, 1)


def _canon(segments):
    if segments.shape[0] == 0:
        return segments.reshape(0, 6)
    a = np.round(segments.reshape(-1, 6), 9)
    a = np.stack(
        [
            row if tuple(row[:3]) <= tuple(row[3:]) else np.concatenate([row[3:], row[:3]])
            for row in a
        ]
    )
    order = np.lexsort(a.T[::-1])
    return a[order]


def test_pair_segments_crossing():
    T1 = np.array([[[0, 0, 0], [2, 0, 0], [0, 2, 0]]], dtype=float)
    T2 = np.array([[[0.5, 0.2, -1], [0.5, 0.2, 1], [0.5, 1.5, 0]]], dtype=float)
    hit, P, Q = pair_segments(T1, T2)
    assert bool(hit[0])
    seg = _canon(np.stack([P, Q], axis=1))
    expect = _canon(np.array([[[0.5, 0.2, 0.0], [0.5, 1.5, 0.0]]]))
    assert np.allclose(seg, expect, atol=1e-9)


def test_pair_segments_disjoint():
    T1 = np.array([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]], dtype=float)
    T2 = np.array([[[0, 0, 1], [1, 0, 1], [0, 1, 1]]], dtype=float)
    hit, _, _ = pair_segments(T1, T2)
    assert not bool(hit[0])


def test_pair_segments_parallel_offset_planes():
    T1 = np.array([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]], dtype=float)
    hit, _, _ = pair_segments(T1, T1 + np.array([0.0, 0.0, 1e-3]))
    assert not bool(hit[0])


def test_self_intersections_detected():
    m = _soup_mesh(
        [
            [[1.2, 0.0, 0.0], [1.8, 0.0, 0.0], [1.2, 1.0, 0.0]],
            [[1.5, 0.2, -0.5], [1.5, 0.2, 0.5], [1.5, 0.9, 0.0]],
        ]
    )
    segs = mesh_intersections(m, mode="brute")
    assert segs.shape[0] >= 1


def test_shared_class_pairs_skipped():
    # two triangles sharing an edge touch along it; identification classes
    # mark them as mesh neighbors, not intersections
    pts = np.array(
        [[1.2, 0, 0], [1.8, 0, 0], [1.5, 1, 0], [1.5, -1, 0.0]], dtype=float
    )
    tris = np.array([[0, 1, 2], [1, 0, 3]], dtype=np.int32)
    flags = np.zeros(4, dtype=bool)
    m = AnnulusMesh(pts, tris, flags, flags.copy(), CHART, 1, 1)
    segs = mesh_intersections(m, mode="brute")
    assert segs.shape[0] == 0


def test_mesh_vs_mesh_modes_agree_random():
    rng = np.random.default_rng(5)
    A = _soup_mesh(1.0 + 0.8 * rng.random((30, 3, 3)))
    B = _soup_mesh(1.0 + 0.8 * rng.random((30, 3, 3)))
    sb = mesh_intersections(A, B, mode="brute")
    sg = mesh_intersections(A, B, mode="grid")
    assert sb.shape == sg.shape
    assert np.allclose(_canon(sb), _canon(sg), atol=1e-9)
    assert sb.shape[0] > 0  # random soups this dense do cross


def test_self_modes_agree_random():
    rng = np.random.default_rng(6)
    m = _soup_mesh(1.0 + 0.8 * rng.random((40, 3, 3)))
    sb = mesh_intersections(m, mode="brute")
    sg = mesh_intersections(m, mode="grid")
    assert np.allclose(_canon(sb), _canon(sg), atol=1e-9)


def test_triangle_soup_shape():
    m = _soup_mesh([[[1.2, 0, 0], [1.8, 0, 0], [1.2, 1, 0]]])
    V = triangle_soup(m)
    assert V.shape == (1, 3, 3)


def test_unknown_mode_rejected():
    m = _soup_mesh([[[1.2, 0, 0], [1.8, 0, 0], [1.2, 1, 0]]])
    with pytest.raises(ValueError):
        mesh_intersections(m, mode="octree")


def test_assembled_surface_embedded(n1_records):
    assembled = n1_records[0].assembled
    for mode in ("grid", "brute"):
        segs = mesh_intersections(assembled, mode=mode)
        assert segs.shape[0] == 0, mode
