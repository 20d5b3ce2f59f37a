"""
Building a semantic map from a synthetic survey
================================================

A robot walks around a small apartment and records depth key frames with
2D instance masks.  We turn those into a three-layer map: a point cloud,
a list of object instances and a bird's-eye grid of region labels.
"""

# the built-in scene: five regions, each with a few surfaces and objects
from collections import Counter

import numpy as np

from semovmm.geometry import accumulate, keyframe_cloud
from semovmm.scene import default_scene
from semovmm.semantic_map import build_map, extract_instances
from semovmm.synthetic import DEFAULT_INTRINSICS, render_survey

scene = default_scene()
print("regions:", ", ".join(scene.region_names))
print("object categories:", len(scene.categories))

# render the survey: every key frame carries a depth image, a camera pose
# and one mask per visible object
keyframes = render_survey(scene)
print(len(keyframes), "key frames of", DEFAULT_INTRINSICS.width, "x", DEFAULT_INTRINSICS.height)

# one frame on its own: depth pixels become camera rays, the pose moves
# them into the world frame
kf = keyframes[0]
cloud = keyframe_cloud(DEFAULT_INTRINSICS, kf)
print("frame 0:", len(cloud), "points,", len(kf.detections), "masks")

# every mask becomes an instance: a center plus zero-mean offsets
for q in extract_instances(kf, DEFAULT_INTRINSICS):
    print(f"  {q.label:<16} center=({q.center[0]:.2f}, {q.center[1]:.2f}, {q.center[2]:.2f})"
          f"  points={len(q.offsets)}  |sum of offsets|={np.abs(q.offsets.sum(axis=0)).max():.1e}")

# stacking all frames with 2 cm voxels keeps the cloud small
full = accumulate((keyframe_cloud(DEFAULT_INTRINSICS, k) for k in keyframes), voxel=0.02)
print("accumulated cloud:", len(full), "points")

# the full pipeline adds the costmap and the region sweep; the mock
# backend stands in for the language model that names each window
smap = build_map(DEFAULT_INTRINSICS, keyframes, scene.mock_backend(), scene.region_names,
                 bounds=scene.bounds)
print("instances:", len(smap.instances))
print("most common labels:", Counter(q.label for q in smap.instances).most_common(4))

# a coarse text view of the region layer, one letter per region
grid = smap.regions
labels = grid.labels
letters = {i: ("." if name == "unknown" else name[0].upper()) for i, name in enumerate(labels)}
cells = grid.data.reshape(grid.height, grid.width)
for row in cells[::6]:
    print("".join(letters[int(v)] for v in row[::3]))
