"""Camera and rigid-body geometry.

Depth frames are re-projected through a pinhole model into the camera
frame, moved into the global frame with a camera-to-world pose, and
accumulated into one dense cloud.  Conventions:

* camera frame: x right, y down, z forward (optical axis)
* world frame: x, y on the floor plane, z up
* a ``Pose`` maps camera coordinates to world coordinates
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

DEFAULT_MAX_RANGE = 6.0
DEFAULT_VOXEL = 0.02


class GeometryError(ValueError):
    """Rejected geometric input (bad dimensions, invalid pose, ...)."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    depth_scale: float = 0.001

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise GeometryError("image size must be positive")
        if not self.depth_scale > 0:
            raise GeometryError("depth_scale must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError("principal point outside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height, "depth_scale": self.depth_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(
            fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]), cy=float(d["cy"]),
            width=int(d["width"]), height=int(d["height"]),
            depth_scale=float(d.get("depth_scale", 0.001)),
        )


@dataclass(frozen=True)
class Pose:
    """Homogeneous 4x4 rigid transform (rotation + translation in meters)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape == (16,):
            m = m.reshape(4, 4)
        if m.shape != (4, 4):
            raise GeometryError(f"pose must be 4x4, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise GeometryError("pose contains non-finite entries")
        if not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
            raise GeometryError("pose last row must be (0, 0, 0, 1)")
        rot = m[:3, :3]
        if np.abs(rot @ rot.T - np.eye(3)).max() > 1e-6 or abs(np.linalg.det(rot) - 1.0) > 1e-6:
            raise GeometryError("pose rotation block is not a proper rotation")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(4))

    @classmethod
    def from_rt(cls, rotation, translation) -> "Pose":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 0.0, 1.0)) -> "Pose":
        """Camera pose at ``eye`` whose optical axis points at ``target``."""
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, up)
        norm = np.linalg.norm(right)
        if norm < 1e-9:
            raise GeometryError("look_at: forward direction parallel to up")
        right /= norm
        down = np.cross(forward, right)
        return cls.from_rt(np.column_stack([right, down, forward]), eye)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def compose(self, other: "Pose") -> "Pose":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return Pose(self.matrix @ other.matrix)

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose.from_rt(rt, -rt @ self.translation)

    def to_list(self) -> list:
        return [float(v) for v in self.matrix.reshape(-1)]


@dataclass(frozen=True)
class DepthFrame:
    """Raw depth grid, ``values[v, u]``; 0 marks an invalid pixel."""

    values: np.ndarray

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class PointCloud:
    points: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise GeometryError("point cloud contains non-finite coordinates")
        self.points = pts
        if self.colors is not None:
            cols = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if len(cols) != len(pts):
                raise GeometryError("colors and points differ in length")
            self.colors = cols

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)))


@dataclass
class KeyFrame:
    index: int
    depth: DepthFrame
    pose: Pose
    detections: list = field(default_factory=list)
    rgb_path: Optional[str] = None


def _check_dims(intrinsics: CameraIntrinsics, depth: DepthFrame) -> None:
    if depth.values.ndim != 2 or (depth.height, depth.width) != (intrinsics.height, intrinsics.width):
        raise GeometryError(
            f"depth frame is {depth.values.shape}, intrinsics expect "
            f"({intrinsics.height}, {intrinsics.width})"
        )


def backproject_pixels(intrinsics: CameraIntrinsics, u, v, raw) -> np.ndarray:
    """Camera-frame points for pixel columns ``u``, rows ``v`` and raw depths."""
    z = np.asarray(raw, dtype=np.float64) * intrinsics.depth_scale
    x = (np.asarray(u, dtype=np.float64) - intrinsics.cx) * z / intrinsics.fx
    y = (np.asarray(v, dtype=np.float64) - intrinsics.cy) * z / intrinsics.fy
    return np.stack([x, y, z], axis=-1)


def project_points(intrinsics: CameraIntrinsics, points) -> np.ndarray:
    """Pinhole projection of camera-frame points to (u, v, z)."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = p[:, 2]
    u = intrinsics.fx * p[:, 0] / z + intrinsics.cx
    v = intrinsics.fy * p[:, 1] / z + intrinsics.cy
    return np.stack([u, v, z], axis=1)


def reproject_depth(
    intrinsics: CameraIntrinsics,
    depth: DepthFrame,
    max_range: Optional[float] = None,
    rgb: Optional[np.ndarray] = None,
) -> PointCloud:
    """Re-project every valid depth pixel into the camera frame.

    Points come out in row-major pixel order.  Pixels with raw value 0 are
    skipped; with ``max_range`` set, points farther than that along the
    optical axis are dropped as well.  ``rgb`` (H, W, 3) is passed through
    as per-point color.
    """
    _check_dims(intrinsics, depth)
    raw = np.asarray(depth.values)
    valid = raw > 0
    if max_range is not None:
        valid &= raw * intrinsics.depth_scale <= max_range
    v, u = np.nonzero(valid)
    pts = backproject_pixels(intrinsics, u, v, raw[v, u])
    colors = None
    if rgb is not None:
        colors = np.asarray(rgb)[v, u]
    return PointCloud(pts, colors)


def transform_points(pose: Pose, cloud: PointCloud) -> PointCloud:
    pts = cloud.points @ pose.rotation.T + pose.translation
    return PointCloud(pts, cloud.colors)


def accumulate(clouds: Iterable[PointCloud], voxel: float = 0.0) -> PointCloud:
    """Concatenate clouds; with ``voxel > 0`` keep one centroid per occupied voxel.

    Voxel output is sorted by voxel index, so it is deterministic for a
    given input regardless of cloud order up to floating point summation.
    """
    clouds = list(clouds)
    if not clouds:
        return PointCloud.empty()
    pts = np.concatenate([c.points for c in clouds], axis=0)
    has_color = all(c.colors is not None for c in clouds) and len(pts) > 0
    cols = np.concatenate([c.colors for c in clouds], axis=0) if has_color else None
    if voxel <= 0 or len(pts) == 0:
        return PointCloud(pts, cols)
    keys = np.floor(pts / voxel).astype(np.int64)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(uniq), 3))
    np.add.at(sums, inverse, pts)
    centroids = sums / counts[:, None]
    out_cols = None
    if cols is not None:
        csum = np.zeros((len(uniq), 3))
        np.add.at(csum, inverse, cols.astype(np.float64))
        out_cols = np.round(csum / counts[:, None]).astype(np.uint8)
    return PointCloud(centroids, out_cols)


def keyframe_cloud(
    intrinsics: CameraIntrinsics, keyframe: KeyFrame, max_range: Optional[float] = DEFAULT_MAX_RANGE
) -> PointCloud:
    """Global-frame cloud of one key frame."""
    return transform_points(keyframe.pose, reproject_depth(intrinsics, keyframe.depth, max_range))


# -- PGM (P5) depth I/O -------------------------------------------------------

def write_pgm(path, values: np.ndarray) -> None:
    """Write a 16-bit binary PGM (big-endian samples, maxval 65535)."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise GeometryError("PGM payload must be 2-D")
    if arr.min(initial=0) < 0 or arr.max(initial=0) > 65535:
        raise GeometryError("PGM values must fit in 16 bits")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + arr.astype(">u2").tobytes())


def _pgm_tokens(data: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise GeometryError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), offset = _pgm_tokens(data, 4)
    if magic != b"P5":
        raise GeometryError(f"{path}: not a binary PGM (P5)")
    w, h, maxval = int(w), int(h), int(maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    n = w * h * np.dtype(dtype).itemsize
    payload = data[offset:offset + n]
    if len(payload) != n:
        raise GeometryError(f"{path}: truncated PGM payload")
    return np.frombuffer(payload, dtype=dtype).reshape(h, w).astype(np.uint16)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix (QR of a Gaussian matrix)."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def pairwise_distances(points: Sequence) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    diff = p[:, None, :] - p[None, :, :]
    return np.sqrt((diff ** 2).sum(-1))
