from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semovmm.geometry import (
    CameraIntrinsics,
    DepthFrame,
    GeometryError,
    PointCloud,
    Pose,
    accumulate,
    backproject_pixels,
    pairwise_distances,
    project_points,
    random_rotation,
    read_pgm,
    reproject_depth,
    transform_points,
    write_pgm,
)

VGA = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480, depth_scale=0.001)


def depth_with(pixels, intr=VGA):
    d = np.zeros((intr.height, intr.width), dtype=np.uint16)
    for (u, v), raw in pixels.items():
        d[v, u] = raw
    return DepthFrame(d)


def test_principal_point_maps_to_optical_axis():
    cloud = reproject_depth(VGA, depth_with({(320, 240): 2000}))
    np.testing.assert_array_equal(cloud.points, [[0.0, 0.0, 2.0]])


def test_off_axis_pixel():
    cloud = reproject_depth(VGA, depth_with({(820 - 200, 240): 1000}, VGA))
    # (620-320)/500 * 1.0
    np.testing.assert_allclose(cloud.points, [[0.6, 0.0, 1.0]], atol=1e-12)
    wide = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 1000, 480)
    cloud = reproject_depth(wide, depth_with({(820, 240): 1000}, wide))
    np.testing.assert_allclose(cloud.points, [[1.0, 0.0, 1.0]], atol=1e-12)


def test_point_count_matches_pixel_scan(rng):
    intr = CameraIntrinsics(100.0, 90.0, 31.5, 23.5, 64, 48, 0.002)
    raw = rng.integers(0, 4000, size=(48, 64)).astype(np.uint16)
    raw[rng.random(raw.shape) < 0.3] = 0
    cloud = reproject_depth(intr, DepthFrame(raw))
    expected = []
    for v in range(48):
        for u in range(64):
            if raw[v, u]:
                z = raw[v, u] * 0.002
                expected.append(((u - 31.5) * z / 100.0, (v - 23.5) * z / 90.0, z))
    assert len(cloud) == np.count_nonzero(raw)
    np.testing.assert_allclose(cloud.points, np.array(expected), rtol=0, atol=1e-12)


def test_dimension_mismatch_rejected():
    with pytest.raises(GeometryError):
        reproject_depth(VGA, DepthFrame(np.ones((10, 10), dtype=np.uint16)))


def test_max_range_drops_far_points():
    cloud = reproject_depth(VGA, depth_with({(0, 0): 1000, (1, 0): 7000}), max_range=6.0)
    assert len(cloud) == 1


def test_projection_round_trip(rng):
    pts = np.column_stack([rng.uniform(-2, 2, 1000), rng.uniform(-2, 2, 1000), rng.uniform(0.2, 8, 1000)])
    uvz = project_points(VGA, pts)
    back = backproject_pixels(VGA, uvz[:, 0], uvz[:, 1], uvz[:, 2] / VGA.depth_scale)
    assert np.abs(back - pts).max() < 1e-9


def test_intrinsics_invariants():
    for bad in [dict(fx=0), dict(fy=-1), dict(width=0), dict(depth_scale=0), dict(cx=640), dict(cy=-1)]:
        kw = dict(fx=1.0, fy=1.0, cx=1.0, cy=1.0, width=640, height=480, depth_scale=0.001)
        kw.update(bad)
        with pytest.raises(GeometryError):
            CameraIntrinsics(**kw)


def test_pose_validation():
    m = np.eye(4)
    m[3, 3] = 1.0 + 1e-12
    with pytest.raises(GeometryError):
        Pose(m)
    refl = np.diag([1.0, 1.0, -1.0, 1.0])
    with pytest.raises(GeometryError):
        Pose(refl)
    with pytest.raises(GeometryError):
        Pose(np.eye(3))


def test_identity_and_translation():
    cloud = PointCloud(np.array([[0.0, 0.0, 0.0], [1.0, -2.0, 0.5]]))
    np.testing.assert_array_equal(transform_points(Pose.identity(), cloud).points, cloud.points)
    moved = transform_points(Pose.from_rt(np.eye(3), [1, 2, 3]), PointCloud(np.zeros((1, 3))))
    np.testing.assert_array_equal(moved.points, [[1.0, 2.0, 3.0]])


def test_rigid_transform_preserves_distances(rng):
    pts = rng.normal(size=(60, 3)) * 3
    pose = Pose.from_rt(random_rotation(rng), rng.normal(size=3) * 10)
    out = transform_points(pose, PointCloud(pts))
    assert len(out) == len(pts)
    assert np.abs(pairwise_distances(out.points) - pairwise_distances(pts)).max() < 1e-9


def test_compose_matches_sequential_transform(rng):
    a = Pose.from_rt(random_rotation(rng), rng.normal(size=3))
    b = Pose.from_rt(random_rotation(rng), rng.normal(size=3))
    cloud = PointCloud(rng.normal(size=(50, 3)))
    one = transform_points(a.compose(b), cloud).points
    two = transform_points(a, transform_points(b, cloud)).points
    assert np.abs(one - two).max() < 1e-9
    back = transform_points(a.inverse(), transform_points(a, cloud)).points
    assert np.abs(back - cloud.points).max() < 1e-9


def test_look_at_points_optical_axis_at_target():
    pose = Pose.look_at((1.0, 2.0, 1.5), (3.0, 2.0, 0.5))
    target_cam = transform_points(pose.inverse(), PointCloud(np.array([[3.0, 2.0, 0.5]]))).points[0]
    np.testing.assert_allclose(target_cam[:2], [0.0, 0.0], atol=1e-12)
    assert target_cam[2] > 0
    # image "down" points toward the floor
    assert pose.rotation[2, 1] < 0


def test_accumulate_concatenation_and_voxels():
    a = PointCloud(np.array([[0.0, 0.0, 0.0]]))
    b = PointCloud(np.array([[1.0, 1.0, 1.0]]))
    assert len(accumulate([a, b])) == 2
    same = PointCloud(np.tile([0.011, 0.012, 0.013], (100, 1)))
    out = accumulate([same], voxel=0.05)
    assert len(out) == 1
    np.testing.assert_allclose(out.points[0], [0.011, 0.012, 0.013])
    assert len(accumulate([])) == 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=0, max_size=6), st.integers(0, 2 ** 32 - 1))
def test_accumulate_counts(sizes, seed):
    rng = np.random.default_rng(seed)
    clouds = [PointCloud(rng.normal(size=(n, 3))) for n in sizes]
    assert len(accumulate(clouds)) == sum(sizes)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0.05, 0.1, 0.5]))
def test_voxel_centroids_match_bruteforce(seed, voxel):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, size=(200, 3))
    out = accumulate([PointCloud(pts)], voxel)
    groups = {}
    for p in pts:
        groups.setdefault(tuple(np.floor(p / voxel).astype(int)), []).append(p)
    assert len(out) == len(groups)
    expect = sorted(tuple(np.mean(g, axis=0)) for g in groups.values())
    got = sorted(tuple(p) for p in out.points)
    np.testing.assert_allclose(np.array(got), np.array(expect), atol=1e-12)


def test_point_cloud_rejects_nan():
    with pytest.raises(GeometryError):
        PointCloud(np.array([[0.0, np.nan, 1.0]]))


def test_colors_pass_through():
    rgb = np.zeros((480, 640, 3), dtype=np.uint8)
    rgb[240, 320] = (10, 20, 30)
    cloud = reproject_depth(VGA, depth_with({(320, 240): 1500}), rgb=rgb)
    np.testing.assert_array_equal(cloud.colors, [[10, 20, 30]])


def test_pgm_round_trip(tmp_path, rng):
    raw = rng.integers(0, 65536, size=(7, 11)).astype(np.uint16)
    write_pgm(tmp_path / "d.pgm", raw)
    data = (tmp_path / "d.pgm").read_bytes()
    assert data.startswith(b"P5\n11 7\n65535\n")
    np.testing.assert_array_equal(read_pgm(tmp_path / "d.pgm"), raw)


def test_pgm_rejects_other_formats(tmp_path):
    (tmp_path / "x.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(GeometryError):
        read_pgm(tmp_path / "x.pgm")
    (tmp_path / "t.pgm").write_bytes(b"P5\n4 4\n65535\n\x00\x01")
    with pytest.raises(GeometryError):
        read_pgm(tmp_path / "t.pgm")
