from __future__ import annotations

import numpy as np

from semovmm.geometry import PointCloud
from semovmm.mission import run_mission
from semovmm.render import PATH_COLOR, path_cells, read_ppm, render_map, render_to_file, trace_paths, write_ppm
from semovmm.semantic_map import BevGrid, SemanticMap3D


def test_all_unknown_is_uniform():
    grid = BevGrid.covering((0, 0, 1, 1), 0.1)
    smap = SemanticMap3D(PointCloud.empty(), grid, [], grid.like(["unknown", "a"]))
    img = render_map(smap, scale=3)
    assert img.shape == (30, 30, 3)
    assert len(np.unique(img.reshape(-1, 3), axis=0)) == 1


def test_image_size_and_ppm_round_trip(tmp_path, smap):
    img = render_map(smap, scale=2)
    assert img.shape == (smap.costmap.height * 2, smap.costmap.width * 2, 3)
    write_ppm(tmp_path / "m.ppm", img)
    assert (tmp_path / "m.ppm").read_bytes().startswith(
        f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
    np.testing.assert_array_equal(read_ppm(tmp_path / "m.ppm"), img)


def test_path_pixels_equal_trace_cells(tmp_path, scene, smap, experiment):
    m = run_mission(scene, smap, "fetch the controller from the washing area", scene.mock_backend(),
                    locations=experiment.locations, navigator=experiment.navigator)
    events = [e.to_dict() for e in m.events]
    expected = {tuple(c) for p in trace_paths(events) for c in p}
    assert expected
    out = render_to_file(smap, tmp_path / "t.ppm", events, scale=3)
    assert path_cells(read_ppm(out), 3) == expected
    # nothing else in the plain render uses the path color
    plain = render_map(smap, scale=1)
    assert not np.all(plain == np.array(PATH_COLOR, dtype=np.uint8), axis=2).any()
