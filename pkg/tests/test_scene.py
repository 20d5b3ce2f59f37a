from __future__ import annotations

import json

import numpy as np
import pytest

from semovmm.geometry import Pose, transform_points
from semovmm.scene import Scene, SceneError, load_scene, point_in_polygon
from semovmm.synthetic import DEFAULT_INTRINSICS, Box, raycast, render_keyframe, render_survey, scene_boxes

PLACEMENT = {
    "entertainment area": ["controller", "toy", "charger", "snacks"],
    "washing area": ["sponge", "cloth", "cup", "spray cleaner"],
    "kitchen": ["ketchup", "milk powder"],
    "bar": ["bottled water", "cup", "milk", "soda"],
    "office table": ["marker", "stapler", "pen", "tape", "mouse", "bottle glue"],
}


def test_default_placement_table(scene):
    assert scene.region_names == list(PLACEMENT)
    for region, cats in PLACEMENT.items():
        assert [o.category for o in scene.objects if o.region == region] == cats
    assert len(scene.objects) == 20
    assert scene.default_regions("cup") == ["washing area", "bar"]


def test_objects_inside_their_regions_on_surfaces(scene):
    for o in scene.objects:
        assert scene.region_of(*o.position) == o.region
        assert scene.surface_height_at(*o.position) > 0
    for r in scene.regions:
        assert r.surfaces


def test_scene_round_trip(tmp_path, scene):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scene.to_dict()))
    again = load_scene(path)
    assert again.to_dict() == scene.to_dict()


def test_scene_validation(scene):
    d = scene.to_dict()
    bad = json.loads(json.dumps(d))
    bad["objects"][0]["position"] = [8.9, 5.9]
    with pytest.raises(SceneError):
        Scene.from_dict(bad)
    bad = json.loads(json.dumps(d))
    bad["regions"][1]["name"] = bad["regions"][0]["name"]
    with pytest.raises(SceneError):
        Scene.from_dict(bad)
    bad = json.loads(json.dumps(d))
    bad["regions"][0]["surfaces"] = []
    with pytest.raises(SceneError):
        Scene.from_dict(bad)


def test_load_scene_errors(tmp_path):
    with pytest.raises(SceneError):
        load_scene(tmp_path / "missing.json")
    (tmp_path / "x.json").write_text("{}")
    with pytest.raises(SceneError):
        load_scene(tmp_path / "x.json")


def test_point_in_polygon():
    square = [(0, 0), (2, 0), (2, 2), (0, 2)]
    assert point_in_polygon(1, 1, square)
    assert not point_in_polygon(3, 1, square)


# -- synthetic rendering ------------------------------------------------------------

def test_raycast_hits_nearest_box():
    boxes = [Box("far", "object", (0, 0, 4), (1, 1, 5)), Box("near", "object", (0, 0, 2), (1, 1, 3))]
    t, ids = raycast((0.5, 0.5, 0.0), np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]), boxes)
    assert ids.tolist() == [1, -2]
    assert t[0] == pytest.approx(2.0)


def test_rendered_depth_lands_on_surfaces(scene):
    boxes = scene_boxes(scene)
    pose = Pose.look_at((4.5, 1.0, 1.7), (4.5, 4.0, 0.0))
    kf = render_keyframe(0, pose, boxes)
    from semovmm.geometry import reproject_depth
    pts = transform_points(pose, reproject_depth(DEFAULT_INTRINSICS, kf.depth)).points
    # millimetre depth quantization keeps every hit between the floor and the wall tops
    assert pts[:, 2].min() > -0.01
    assert pts[:, 2].max() < max(h for _, h in scene.walls) + 0.01


def test_survey_sees_every_object(scene):
    kfs = render_survey(scene)
    seen = {d.label for kf in kfs for d in kf.detections}
    assert set(scene.categories) <= seen
