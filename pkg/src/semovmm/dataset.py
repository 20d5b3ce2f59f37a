"""Key-frame dataset manifests.

A dataset directory holds ``manifest.json``::

    {
      "units": "meters",
      "intrinsics": {"fx": ..., "fy": ..., "cx": ..., "cy": ...,
                     "width": ..., "height": ..., "depth_scale": ...},
      "keyframes": [
        {"index": 0, "pose": [16 numbers, row-major camera-to-world],
         "depth": "depth/000000.pgm", "detections": "detections/000000.json",
         "rgb": null},
        ...
      ]
    }

Depth files are 16-bit binary PGM in raw depth units; detection files are
JSON lists of ``Detection2D.to_dict()`` records.  Paths are relative to
the manifest.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .geometry import CameraIntrinsics, DepthFrame, GeometryError, KeyFrame, Pose, read_pgm, write_pgm
from .semantic_map import Detection2D, MapError


class DatasetError(ValueError):
    pass


def write_dataset(directory, intrinsics: CameraIntrinsics, keyframes: Sequence[KeyFrame]) -> Path:
    d = Path(directory)
    (d / "depth").mkdir(parents=True, exist_ok=True)
    (d / "detections").mkdir(parents=True, exist_ok=True)
    entries = []
    for kf in keyframes:
        depth_rel = f"depth/{kf.index:06d}.pgm"
        det_rel = f"detections/{kf.index:06d}.json"
        write_pgm(d / depth_rel, kf.depth.values)
        (d / det_rel).write_text(json.dumps([det.to_dict() for det in kf.detections], sort_keys=True) + "\n")
        entries.append({"index": kf.index, "pose": kf.pose.to_list(), "depth": depth_rel,
                        "detections": det_rel, "rgb": kf.rgb_path})
    manifest = {"units": "meters", "intrinsics": intrinsics.to_dict(), "keyframes": entries}
    path = d / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return path


def load_dataset(manifest_path):
    """Read a manifest -> ``(intrinsics, keyframes)``; raises ``DatasetError``."""
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    try:
        if manifest.get("units", "meters") != "meters":
            raise DatasetError(f"unsupported units {manifest['units']!r}")
        intrinsics = CameraIntrinsics.from_dict(manifest["intrinsics"])
        keyframes, seen = [], set()
        for entry in manifest["keyframes"]:
            idx = int(entry["index"])
            if idx in seen:
                raise DatasetError(f"duplicate key frame index {idx}")
            seen.add(idx)
            depth_path = base / entry["depth"]
            if not depth_path.exists():
                raise DatasetError(f"missing depth file {depth_path}")
            depth = DepthFrame(read_pgm(depth_path))
            dets = []
            if entry.get("detections"):
                det_path = base / entry["detections"]
                if not det_path.exists():
                    raise DatasetError(f"missing detections file {det_path}")
                dets = [Detection2D.from_dict(x) for x in json.loads(det_path.read_text())]
            keyframes.append(KeyFrame(idx, depth, Pose(entry["pose"]), dets, entry.get("rgb")))
    except (KeyError, TypeError, ValueError, GeometryError, MapError) as exc:
        if isinstance(exc, DatasetError):
            raise
        raise DatasetError(f"malformed manifest {path}: {exc}") from exc
    return intrinsics, keyframes
