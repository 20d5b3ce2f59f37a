from __future__ import annotations

import json

import numpy as np
import pytest

from semovmm.dataset import DatasetError, load_dataset, write_dataset
from semovmm.synthetic import DEFAULT_INTRINSICS, render_survey


def test_dataset_round_trip(tmp_path, scene):
    kfs = render_survey(scene)[:3]
    path = write_dataset(tmp_path / "ds", DEFAULT_INTRINSICS, kfs)
    intr, back = load_dataset(path)
    assert intr == DEFAULT_INTRINSICS
    assert len(back) == 3
    for a, b in zip(kfs, back):
        assert a.index == b.index
        np.testing.assert_array_equal(a.depth.values, b.depth.values)
        np.testing.assert_array_equal(a.pose.matrix, b.pose.matrix)
        assert [d.to_dict() for d in a.detections] == [d.to_dict() for d in b.detections]
    # directory form works too
    assert len(load_dataset(tmp_path / "ds")[1]) == 3


@pytest.mark.parametrize("breakage", ["missing_depth", "bad_pose", "dup_index", "units", "not_json"])
def test_malformed_manifests(tmp_path, scene, breakage):
    path = write_dataset(tmp_path / "ds", DEFAULT_INTRINSICS, render_survey(scene)[:2])
    m = json.loads(path.read_text())
    if breakage == "missing_depth":
        m["keyframes"][0]["depth"] = "depth/nope.pgm"
    elif breakage == "bad_pose":
        m["keyframes"][0]["pose"] = [2.0] * 16
    elif breakage == "dup_index":
        m["keyframes"][1]["index"] = m["keyframes"][0]["index"]
    elif breakage == "units":
        m["units"] = "feet"
    path.write_text("{" if breakage == "not_json" else json.dumps(m))
    with pytest.raises(DatasetError):
        load_dataset(path)
