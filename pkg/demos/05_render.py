"""
Drawing the map and a trajectory
================================

The region layer as colored cells, obstacles darkened, object centers in
black and the robot's path in red, written as a PPM image.
"""

import tempfile
from pathlib import Path

from semovmm.harness import scene_map
from semovmm.mission import run_mission
from semovmm.render import path_cells, read_ppm, render_map, trace_paths, write_ppm
from semovmm.scene import default_scene

scene = default_scene()
smap = scene_map(scene)
mission = run_mission(scene, smap, "fetch the controller from the washing area", scene.mock_backend())

paths = trace_paths(e.to_dict() for e in mission.events)
image = render_map(smap, paths, scale=4)
out = Path(tempfile.mkdtemp()) / "mission.ppm"
write_ppm(out, image)
print("wrote", out, image.shape)

# the red pixels give back exactly the cells the robot drove through
drawn = path_cells(read_ppm(out), 4)
driven = {tuple(c) for p in paths for c in p}
print(len(driven), "path cells,", "recovered exactly" if drawn == driven else "mismatch")
