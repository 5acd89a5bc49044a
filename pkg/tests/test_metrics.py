import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radarbf import DoaDirection, Scatterer, Scene
from radarbf.capon import RadarPoint
from radarbf.metrics import (
    EmptyCloudError,
    PointCloud,
    chamfer_distance,
    chamfer_table,
    format_chamfer_table,
    recovery_report,
    voxel_downsample,
)
from radarbf.errors import ValidationError
from radarbf.scene import expected_detection

coords = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
clouds = arrays(np.float64, st.tuples(st.integers(1, 40), st.just(3)), elements=coords)


def brute_chamfer(a, b):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return 0.5 * d.min(axis=1).mean() + 0.5 * d.min(axis=0).mean()


def test_voxel_examples():
    one = PointCloud([[0.31, -2.2, 5.0]])
    np.testing.assert_array_equal(voxel_downsample(one, 0.1).points, one.points)
    two = PointCloud([[0.01, 0.01, 0.01], [0.07, 0.03, 0.09]])
    np.testing.assert_allclose(voxel_downsample(two, 0.1).points, [[0.04, 0.02, 0.05]])
    with pytest.raises(ValidationError):
        voxel_downsample(one, 0.0)


def test_voxel_brute_force_bucketing():
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 1, (1000, 3))
    out = voxel_downsample(PointCloud(pts, velocity=pts[:, 0]), 0.1)
    buckets = {}
    for p in pts:
        buckets.setdefault(tuple(int(math.floor(c / 0.1)) for c in p), []).append(p)
    want = np.array([np.mean(buckets[k], axis=0) for k in sorted(buckets)])
    assert len(out) == len(buckets) <= 1000
    np.testing.assert_allclose(out.points, want, atol=1e-12)
    np.testing.assert_allclose(out.velocity, want[:, 0], atol=1e-12)
    assert np.all((out.points >= 0) & (out.points <= 1))


@settings(max_examples=100)
@given(clouds, st.sampled_from([0.2, 0.1, 0.05, 0.02, 0.01, 1.7]))
def test_voxel_stays_in_cell(pts, r):
    out = voxel_downsample(PointCloud(pts), r)
    keys = np.floor(pts / r)
    centers = (keys + 0.5) * r
    # every input point and its voxel's centroid lie within r*sqrt(3)/2 of the voxel centre
    assert np.all(np.linalg.norm(pts - centers, axis=1) <= r * math.sqrt(3) / 2 + 1e-9)
    out_keys = np.floor(out.points / r + 1e-9)
    out_centers = (out_keys + 0.5) * r
    assert np.all(np.linalg.norm(out.points - out_centers, axis=1) <= r * math.sqrt(3) / 2 + 1e-9)


def test_chamfer_examples():
    a = PointCloud([[0, 0, 0]])
    assert chamfer_distance(a, a) == 0.0
    assert chamfer_distance(a, PointCloud([[1, 0, 0]])) == 1.0
    assert chamfer_distance(PointCloud([[0, 0, 0], [2, 0, 0]]), PointCloud([[1, 0, 0]])) == 1.0
    with pytest.raises(EmptyCloudError):
        chamfer_distance(a, PointCloud(np.zeros((0, 3))))


@settings(max_examples=150)
@given(clouds, clouds)
def test_chamfer_matches_brute_force(a, b):
    cd = chamfer_distance(PointCloud(a), PointCloud(b))
    assert cd == pytest.approx(brute_chamfer(a, b), rel=1e-12, abs=1e-12)
    assert cd == chamfer_distance(PointCloud(b), PointCloud(a))
    assert cd >= 0
    assert chamfer_distance(PointCloud(a), PointCloud(a)) == 0.0


def test_chamfer_table_rows():
    rng = np.random.default_rng(1)
    pts = PointCloud(rng.uniform(-5, 5, (200, 3)))
    rows = chamfer_table(pts, pts, [0.2, 0.1, 0.05, 0.02, 0.01])
    assert [r.resolution for r in rows] == [0.2, 0.1, 0.05, 0.02, 0.01]
    assert all(r.chamfer == 0.0 for r in rows)
    text = format_chamfer_table(rows).splitlines()
    assert text[0] == "# resolution_m estimate_points truth_points chamfer_m"
    assert len(text) == 6 and text[1].split()[0] == "0.2"


def test_point_cloud_validation():
    with pytest.raises(ValidationError):
        PointCloud([[0, 0, np.inf]])
    with pytest.raises(ValidationError):
        PointCloud([[0, 0, 0]], velocity=[1.0, 2.0])


# ---------------------------------------------------------------- recovery


def _point(s, wf, grid, dv=0.0, dmu=0, dr=0):
    e = expected_detection(s, wf, grid)
    mu, nu = grid.mu[e.mu_bin + dmu], grid.nu[e.nu_bin]
    rb = e.range_bin + dr
    return RadarPoint(rb * wf.range_resolution * np.array([mu, math.sqrt(1 - mu * mu - nu * nu), nu]),
                      s.radial_velocity + dv, 1.0, float(mu), float(nu), rb)


def test_recovery_perfect_and_empty(wf, grid):
    s = Scatterer(DoaDirection(grid.mu[50], grid.nu[40]), 20 * wf.range_resolution,
                  3 * wf.velocity_resolution)
    rep = recovery_report([_point(s, wf, grid)], Scene([s]), wf, grid)
    assert rep.precision == rep.recall == 1.0
    assert all(v == 0 for v in rep.mean_abs_error.values())
    empty = recovery_report([], Scene([s]), wf, grid)
    assert empty.recall == 0.0 and empty.false_detections == 0
    assert recovery_report([], Scene([]), wf, grid).recall == 1.0


def test_recovery_tolerances(wf, grid):
    s = Scatterer(DoaDirection(grid.mu[50], 0.0), 20 * wf.range_resolution, 0.0)
    dv = wf.velocity_resolution
    ok = [_point(s, wf, grid, dmu=1, dr=-1, dv=0.5 * dv)]
    assert recovery_report(ok, Scene([s]), wf, grid).recall == 1.0
    for bad in (_point(s, wf, grid, dmu=2), _point(s, wf, grid, dr=2), _point(s, wf, grid, dv=0.6 * dv)):
        rep = recovery_report([bad], Scene([s]), wf, grid)
        assert rep.recall == 0.0 and rep.false_detections == 1 and rep.precision == 0.0


def test_recovery_doppler_wraps(wf, grid):
    dv = wf.velocity_resolution
    s = Scatterer(DoaDirection(0.0, 0.0), 10 * wf.range_resolution, -31.8 * dv)
    p = _point(s, wf, grid, dv=63.6 * dv)  # reported at +31.8 bins, one span away
    assert recovery_report([p], Scene([s]), wf, grid).recall == 1.0


def test_recovery_one_to_one(wf, grid):
    s = Scatterer(DoaDirection(0.0, 0.0), 10 * wf.range_resolution, 0.0)
    pts = [_point(s, wf, grid), _point(s, wf, grid, dmu=1)]
    rep = recovery_report(pts, Scene([s]), wf, grid)
    assert rep.true_positives == 1 and rep.false_detections == 1
    assert rep.matches[0].point_index == 0
    text = rep.to_text()
    assert "precision = 0.5" in text and "recall = 1" in text
    assert rep.to_table().splitlines()[1].split()[5] == "1"
