"""Ray-cast key frames of a scene made of axis-aligned boxes.

Stands in for the recorded exploration run: each key frame carries a
quantized depth image, the camera pose, and per-object masks labelled with
the ground-truth category (what an open-vocabulary detector plus
segmenter would return on a perfect day).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import CameraIntrinsics, DepthFrame, KeyFrame, Pose
from .scene import Placement, Scene
from .semantic_map import Detection2D

DEFAULT_INTRINSICS = CameraIntrinsics(fx=120.0, fy=120.0, cx=80.0, cy=60.0, width=160, height=120,
                                      depth_scale=0.001)
CAMERA_HEIGHT = 1.7
STANDOFF = 1.4
MIN_MASK_PIXELS = 10


@dataclass(frozen=True)
class Box:
    label: str
    kind: str  # "wall", "surface" or "object"
    lo: tuple
    hi: tuple


def scene_boxes(scene: Scene, placements: Optional[Sequence[Placement]] = None) -> list:
    boxes = [Box("wall", "wall", (b[0], b[1], 0.0), (b[2], b[3], h)) for b, h in scene.walls]
    for s in scene.surfaces:
        x0, y0, x1, y1 = s.box
        boxes.append(Box(s.label, "surface", (x0, y0, 0.0), (x1, y1, s.height)))
    sx, sy, sz = scene.object_size
    for o in (scene.objects if placements is None else placements):
        x, y = o.position
        z = scene.surface_height_at(x, y)
        boxes.append(Box(o.category, "object", (x - sx / 2, y - sy / 2, z), (x + sx / 2, y + sy / 2, z + sz)))
    return boxes


def raycast(origin, dirs: np.ndarray, boxes: Sequence[Box]):
    """Nearest hit parameter and box index per ray (-1 floor, -2 nothing).

    ``dirs`` need not be normalized; ``t`` is in units of the direction.
    """
    origin = np.asarray(origin, dtype=np.float64)
    n = len(dirs)
    best_t = np.full(n, np.inf)
    best_id = np.full(n, -2, dtype=np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        floor_t = np.where(dirs[:, 2] < 0, -origin[2] / dirs[:, 2], np.inf)
        hit = floor_t < best_t
        best_t[hit] = floor_t[hit]
        best_id[hit] = -1
        for i, b in enumerate(boxes):
            t0 = (np.asarray(b.lo) - origin) * inv
            t1 = (np.asarray(b.hi) - origin) * inv
            tmin = np.nanmax(np.minimum(t0, t1), axis=1)
            tmax = np.nanmin(np.maximum(t0, t1), axis=1)
            ok = (tmax >= np.maximum(tmin, 0.0)) & (tmin > 0)
            closer = ok & (tmin < best_t)
            best_t[closer] = tmin[closer]
            best_id[closer] = i
    return best_t, best_id


def render_keyframe(
    index: int,
    pose: Pose,
    boxes: Sequence[Box],
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS,
    min_mask_pixels: int = MIN_MASK_PIXELS,
) -> KeyFrame:
    h, w = intrinsics.height, intrinsics.width
    v, u = np.mgrid[0:h, 0:w]
    cam = np.stack([(u.reshape(-1) - intrinsics.cx) / intrinsics.fx,
                    (v.reshape(-1) - intrinsics.cy) / intrinsics.fy,
                    np.ones(h * w)], axis=1)
    dirs = cam @ pose.rotation.T
    t, ids = raycast(pose.translation, dirs, boxes)
    # camera-frame z of the hit equals t because the ray has unit z
    raw = np.where(np.isfinite(t), np.rint(t / intrinsics.depth_scale), 0)
    raw = np.clip(raw, 0, 65535).astype(np.uint16).reshape(h, w)
    ids = ids.reshape(h, w)
    detections = []
    for i, b in enumerate(boxes):
        if b.kind == "wall":
            continue
        mask = (ids == i) & (raw > 0)
        if mask.sum() >= min_mask_pixels:
            detections.append(Detection2D.from_mask(b.label, 0.9, mask))
    return KeyFrame(index, DepthFrame(raw), pose, detections)


def survey_poses(scene: Scene, standoff: float = STANDOFF, height: float = CAMERA_HEIGHT) -> list:
    """Camera poses that look at every surface from the region interior,
    plus one view of each region from the start pose."""
    poses = []
    hx = (scene.bounds[0] + scene.bounds[2]) / 2
    hy = (scene.bounds[1] + scene.bounds[3]) / 2
    for region in scene.regions:
        rc = np.array(region.centroid)
        for s in region.surfaces:
            sc = np.array(s.center)
            d = rc - sc
            if np.linalg.norm(d) < 1e-6:
                d = np.array([hx, hy]) - sc
            d /= np.linalg.norm(d)
            eye = np.array([sc[0] + standoff * d[0], sc[1] + standoff * d[1], height])
            poses.append(Pose.look_at(eye, (sc[0], sc[1], s.height)))
    for region in scene.regions:
        cx, cy = region.centroid
        eye = (scene.p0[0], scene.p0[1], height)
        poses.append(Pose.look_at(eye, (cx, cy, 0.3)))
    return poses


def render_survey(
    scene: Scene,
    placements: Optional[Sequence[Placement]] = None,
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS,
) -> list:
    boxes = scene_boxes(scene, placements)
    return [render_keyframe(k, pose, boxes, intrinsics) for k, pose in enumerate(survey_poses(scene))]
