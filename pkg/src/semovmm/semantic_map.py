"""The three-layer semantic map.

* structural layer: dense global point cloud, flattened into a BEV costmap
* instance layer: semantic geometric instances (label, center, zero-mean
  relative geometry) registered by their centers
* region layer: a dense BEV grid of region labels produced by sweeping a
  circular window over the instance layer and asking a region proposer
  what kind of area each window's objects describe
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .geometry import (
    DEFAULT_MAX_RANGE,
    DEFAULT_VOXEL,
    CameraIntrinsics,
    GeometryError,
    KeyFrame,
    PointCloud,
    accumulate,
    backproject_pixels,
    keyframe_cloud,
)

log = logging.getLogger(__name__)

UNKNOWN = "unknown"

FREE = 0
INFLATED = 1
OCCUPIED = 2

MIN_POINTS = 5
WINDOW_RADIUS = 1.5
WINDOW_STEP = 0.5
COSTMAP_CELL = 0.05
Z_BAND = (0.05, 1.8)
INFLATION = 0.3
OCC_THRESHOLD = 3
REACH_RADIUS = 0.8
STANDOFF = 0.4
MIN_SEPARATION = 0.6

MAP_FORMAT_VERSION = 1


class MapError(ValueError):
    pass


class OutOfBoundsError(MapError):
    pass


class UnknownRegionError(MapError, KeyError):
    pass


# -- 2D detections ------------------------------------------------------------

@dataclass
class Detection2D:
    """An open-vocabulary detection with its segmentation mask.

    ``bbox`` is ``(u_min, v_min, u_max, v_max)`` with exclusive max.
    ``runs`` is a run-length encoding of the mask over the full image in
    row-major order: ``[(start, length), ...]`` with ``start`` a flat
    pixel index.
    """

    label: str
    confidence: float
    bbox: tuple
    runs: list
    image_size: tuple  # (height, width)

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise MapError(f"confidence {self.confidence} outside [0, 1]")
        h, w = self.image_size
        u0, v0, u1, v1 = self.bbox
        if not (0 <= u0 <= u1 <= w and 0 <= v0 <= v1 <= h):
            raise MapError(f"bbox {self.bbox} outside image {w}x{h}")
        self.bbox = tuple(int(b) for b in self.bbox)
        self.runs = [(int(s), int(n)) for s, n in self.runs]
        v, u = self.pixels()
        if len(u) and (u.min() < u0 or u.max() >= u1 or v.min() < v0 or v.max() >= v1):
            raise MapError(f"mask of '{self.label}' extends beyond its bbox")

    @classmethod
    def from_mask(cls, label: str, confidence: float, mask: np.ndarray) -> "Detection2D":
        mask = np.asarray(mask, dtype=bool)
        h, w = mask.shape
        flat = mask.reshape(-1).astype(np.int8)
        edges = np.diff(np.concatenate([[0], flat, [0]]))
        starts = np.nonzero(edges == 1)[0]
        ends = np.nonzero(edges == -1)[0]
        runs = list(zip(starts.tolist(), (ends - starts).tolist()))
        v, u = np.nonzero(mask)
        if len(u):
            bbox = (int(u.min()), int(v.min()), int(u.max()) + 1, int(v.max()) + 1)
        else:
            bbox = (0, 0, 0, 0)
        return cls(label, float(confidence), bbox, runs, (h, w))

    def pixels(self):
        """(rows, cols) of the mask pixels in row-major order."""
        if not self.runs:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        idx = np.concatenate([np.arange(s, s + n) for s, n in self.runs])
        h, w = self.image_size
        if idx.min() < 0 or idx.max() >= h * w:
            raise MapError(f"mask of '{self.label}' outside the image")
        return idx // w, idx % w

    def mask(self) -> np.ndarray:
        out = np.zeros(self.image_size, dtype=bool)
        v, u = self.pixels()
        out[v, u] = True
        return out

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "confidence": self.confidence,
            "bbox": list(self.bbox),
            "mask": {"size": list(self.image_size), "runs": [list(r) for r in self.runs]},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Detection2D":
        m = d["mask"]
        return cls(d["label"], float(d["confidence"]), tuple(d["bbox"]),
                   [tuple(r) for r in m["runs"]], tuple(m["size"]))


# -- instances ------------------------------------------------------------------

@dataclass
class SemanticGeometricInstance:
    label: str
    center: np.ndarray
    offsets: np.ndarray
    bbox: tuple = (0, 0, 0, 0)
    confidence: float = 1.0
    keyframe: int = -1

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.offsets = np.asarray(self.offsets, dtype=np.float64).reshape(-1, 3)
        if len(self.offsets) == 0:
            raise MapError("instance needs a non-empty relative geometry")

    @property
    def points(self) -> np.ndarray:
        """Absolute points, center + relative geometry."""
        return self.center + self.offsets

    @classmethod
    def from_points(cls, label, points, **kw) -> "SemanticGeometricInstance":
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        center = pts.mean(axis=0)
        # one refinement pass: the rounding error of the first mean, times the
        # point count, can leave a visible residual in the offset sum
        center = center + (pts - center).mean(axis=0)
        return cls(label, center, pts - center, **kw)


def extract_instances(
    keyframe: KeyFrame,
    intrinsics: CameraIntrinsics,
    min_points: int = MIN_POINTS,
    max_range: Optional[float] = None,
) -> list:
    """Segment the key frame's depth points by detection mask.

    Each detection whose mask covers at least ``min_points`` valid-depth
    pixels becomes one instance in the global frame.  Detections with too
    few valid pixels are dropped silently.
    """
    depth = np.asarray(keyframe.depth.values)
    if depth.shape != (intrinsics.height, intrinsics.width):
        raise GeometryError(f"depth frame {depth.shape} does not match intrinsics")
    out = []
    rot, trans = keyframe.pose.rotation, keyframe.pose.translation
    for det in keyframe.detections:
        if tuple(det.image_size) != depth.shape:
            raise GeometryError(f"mask of '{det.label}' sized {det.image_size}, depth is {depth.shape}")
        v, u = det.pixels()
        raw = depth[v, u]
        keep = raw > 0
        if max_range is not None:
            keep &= raw * intrinsics.depth_scale <= max_range
        if keep.sum() < max(min_points, 1):
            continue
        cam = backproject_pixels(intrinsics, u[keep], v[keep], raw[keep])
        world = cam @ rot.T + trans
        out.append(SemanticGeometricInstance.from_points(
            det.label, world, bbox=det.bbox, confidence=det.confidence, keyframe=keyframe.index))
    return out


# -- BEV grids --------------------------------------------------------------------

@dataclass
class BevGrid:
    """Row-major BEV raster; row index grows with y, column with x."""

    origin: tuple
    cell: float
    width: int
    height: int
    data: np.ndarray
    labels: Optional[list] = None

    def __post_init__(self):
        if not self.cell > 0:
            raise MapError("cell size must be positive")
        self.origin = (float(self.origin[0]), float(self.origin[1]))
        self.data = np.asarray(self.data, dtype=np.uint8).reshape(self.height, self.width)

    @classmethod
    def empty(cls, origin, cell, width, height, labels=None) -> "BevGrid":
        return cls(origin, cell, width, height, np.zeros((height, width), dtype=np.uint8), labels)

    @classmethod
    def covering(cls, bounds, cell, labels=None) -> "BevGrid":
        xmin, ymin, xmax, ymax = bounds
        w = max(1, int(math.ceil((xmax - xmin) / cell - 1e-9)))
        h = max(1, int(math.ceil((ymax - ymin) / cell - 1e-9)))
        return cls.empty((xmin, ymin), cell, w, h, labels)

    @property
    def bounds(self) -> tuple:
        x0, y0 = self.origin
        return (x0, y0, x0 + self.width * self.cell, y0 + self.height * self.cell)

    def same_geometry(self, other: "BevGrid") -> bool:
        return (self.origin, self.cell, self.width, self.height) == (
            other.origin, other.cell, other.width, other.height)

    def like(self, labels=None) -> "BevGrid":
        return BevGrid.empty(self.origin, self.cell, self.width, self.height, labels)

    def world_to_cell(self, x: float, y: float) -> tuple:
        col = int(math.floor((x - self.origin[0]) / self.cell))
        row = int(math.floor((y - self.origin[1]) / self.cell))
        return row, col

    def cell_center(self, row: int, col: int) -> tuple:
        return (self.origin[0] + (col + 0.5) * self.cell, self.origin[1] + (row + 0.5) * self.cell)

    def cell_centers(self):
        """(xs, ys) arrays of shape (height, width)."""
        xs = self.origin[0] + (np.arange(self.width) + 0.5) * self.cell
        ys = self.origin[1] + (np.arange(self.height) + 0.5) * self.cell
        return np.meshgrid(xs, ys)

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def contains(self, x: float, y: float) -> bool:
        return self.in_bounds(*self.world_to_cell(x, y))

    def label_at(self, x: float, y: float) -> Optional[str]:
        row, col = self.world_to_cell(x, y)
        if not self.in_bounds(row, col) or self.labels is None:
            return None
        return self.labels[self.data[row, col]]

    @property
    def free(self) -> np.ndarray:
        return self.data == FREE

    def header(self) -> dict:
        h = {"origin": list(self.origin), "cell": self.cell, "width": self.width,
             "height": self.height, "dtype": "uint8", "order": "row-major"}
        if self.labels is not None:
            h["labels"] = list(self.labels)
        return h


def build_costmap(
    cloud: PointCloud,
    cell: float = COSTMAP_CELL,
    z_band: tuple = Z_BAND,
    inflation: float = INFLATION,
    occ_threshold: int = OCC_THRESHOLD,
    bounds: Optional[tuple] = None,
) -> BevGrid:
    """Flatten a cloud into a 2D costmap.

    A cell is OCCUPIED when at least ``occ_threshold`` points with
    ``z_min <= z <= z_max`` fall in it; free cells within ``inflation`` of
    an occupied cell (center to center) become INFLATED.  ``bounds`` fixes
    the grid extent, otherwise the xy bounding box of the cloud padded by
    the inflation radius is used.
    """
    if not cell > 0:
        raise MapError("cell size must be positive")
    z_min, z_max = z_band
    if not z_min < z_max:
        raise MapError("z band must satisfy z_min < z_max")
    pts = cloud.points
    if bounds is None:
        if len(pts) == 0:
            raise MapError("bounds are required for an empty cloud")
        pad = inflation + cell
        bounds = (pts[:, 0].min() - pad, pts[:, 1].min() - pad,
                  pts[:, 0].max() + pad, pts[:, 1].max() + pad)
    grid = BevGrid.covering(bounds, cell)
    if len(pts) == 0:
        return grid
    band = pts[(pts[:, 2] >= z_min) & (pts[:, 2] <= z_max)]
    cols = np.floor((band[:, 0] - grid.origin[0]) / cell).astype(np.int64)
    rows = np.floor((band[:, 1] - grid.origin[1]) / cell).astype(np.int64)
    inside = (rows >= 0) & (rows < grid.height) & (cols >= 0) & (cols < grid.width)
    counts = np.zeros((grid.height, grid.width), dtype=np.int64)
    np.add.at(counts, (rows[inside], cols[inside]), 1)
    occupied = counts >= occ_threshold
    inflated = inflate(occupied, inflation / cell)
    grid.data[inflated] = INFLATED
    grid.data[occupied] = OCCUPIED
    return grid


def inflate(occupied: np.ndarray, radius_cells: float) -> np.ndarray:
    """Cells within ``radius_cells`` (center distance) of an occupied cell."""
    if radius_cells <= 0 or not occupied.any():
        return occupied.copy()
    k = int(math.floor(radius_cells + 1e-9))
    yy, xx = np.mgrid[-k:k + 1, -k:k + 1]
    disk = xx * xx + yy * yy <= radius_cells * radius_cells + 1e-9
    return ndimage.binary_dilation(occupied, structure=disk)


# -- the map -----------------------------------------------------------------------

@dataclass
class SemanticMap3D:
    structure: PointCloud
    costmap: BevGrid
    instances: list = field(default_factory=list)
    regions: Optional[BevGrid] = None
    params: dict = field(default_factory=dict)

    @property
    def region_names(self) -> list:
        """Region labels present in the region layer, excluding ``unknown``,
        in label-table order."""
        if self.regions is None:
            return []
        present = set(np.unique(self.regions.data).tolist())
        return [name for i, name in enumerate(self.regions.labels) if i in present and name != UNKNOWN]

    def region_at(self, x: float, y: float) -> Optional[str]:
        return None if self.regions is None else self.regions.label_at(x, y)


def register_instance(smap: SemanticMap3D, q: SemanticGeometricInstance) -> SemanticMap3D:
    """Append ``q`` to the instance layer (no fusion or deduplication)."""
    if not smap.costmap.contains(q.center[0], q.center[1]):
        raise OutOfBoundsError(
            f"instance '{q.label}' center ({q.center[0]:.3f}, {q.center[1]:.3f}) "
            f"outside map bounds {smap.costmap.bounds}")
    smap.instances.append(q)
    return smap


# -- region abstraction --------------------------------------------------------

def window_centers(grid: BevGrid, step: float) -> np.ndarray:
    """Sweep-order window centers: start at the grid corner, x fastest."""
    xmin, ymin, xmax, ymax = grid.bounds
    nx = int(math.floor((xmax - xmin) / step + 1e-9)) + 1
    ny = int(math.floor((ymax - ymin) / step + 1e-9)) + 1
    sy, sx = np.mgrid[0:ny, 0:nx]
    return np.stack([xmin + sx.reshape(-1) * step, ymin + sy.reshape(-1) * step], axis=1)


def window_objects(instances: Sequence[SemanticGeometricInstance], center, radius: float) -> list:
    """Sorted, deduplicated labels of instances whose BEV center lies in the disk."""
    labels = set()
    cx, cy = center
    r2 = radius * radius
    for q in instances:
        dx, dy = q.center[0] - cx, q.center[1] - cy
        if dx * dx + dy * dy <= r2:
            labels.add(q.label)
    return sorted(labels)


def sweep_regions(
    instances: Sequence[SemanticGeometricInstance],
    grid: BevGrid,
    proposer,
    candidates: Sequence[str],
    radius: float = WINDOW_RADIUS,
    step: float = WINDOW_STEP,
    jobs: int = 1,
) -> BevGrid:
    """Dense region labels over ``grid`` from a circular sliding window.

    Every non-empty window's label set goes to ``proposer.propose_regions``
    and the window takes the top proposal.  Each cell then takes the label
    of the nearest non-empty window (earlier sweep order on ties) if that
    window is within ``2 * radius``, else ``unknown``.  A proposer that
    fails twice on a window marks that window ``unknown``.
    """
    if not (radius > 0 and step > 0):
        raise MapError("window radius and step must be positive")
    candidates = list(candidates)
    if not candidates:
        raise MapError("need at least one region candidate")
    labels = [UNKNOWN] + [c for c in candidates if c != UNKNOWN]
    index = {name: i for i, name in enumerate(labels)}
    out = grid.like(labels)

    centers = window_centers(grid, step)
    objects = [window_objects(instances, c, radius) for c in centers]
    todo = [i for i, objs in enumerate(objects) if objs]

    def propose(i):
        for attempt in range(2):
            try:
                ranked = proposer.propose_regions(objects[i], candidates)
                return ranked[0]
            except Exception as exc:  # noqa: BLE001 - any proposer failure degrades to unknown
                log.warning("window %d proposal failed (attempt %d): %s", i, attempt + 1, exc)
        return UNKNOWN

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            tops = list(pool.map(propose, todo))
    else:
        tops = [propose(i) for i in todo]
    if not todo:
        return out

    win_xy = centers[todo]
    win_label = np.array([index[t] for t in tops], dtype=np.uint8)
    xs, ys = grid.cell_centers()
    cells = np.stack([xs.reshape(-1), ys.reshape(-1)], axis=1)
    result = np.zeros(len(cells), dtype=np.uint8)
    chunk = max(1, 2_000_000 // max(len(win_xy), 1))
    limit = (2.0 * radius) ** 2
    for s in range(0, len(cells), chunk):
        c = cells[s:s + chunk]
        d2 = ((c[:, None, :] - win_xy[None, :, :]) ** 2).sum(-1)
        nearest = np.argmin(d2, axis=1)
        best = d2[np.arange(len(c)), nearest]
        result[s:s + chunk] = np.where(best <= limit, win_label[nearest], 0)
    out.data[:] = result.reshape(grid.height, grid.width)
    return out


# -- searchable locations ----------------------------------------------------------

def anchor_cells(smap: SemanticMap3D, surface_cells=None) -> np.ndarray:
    """Cells holding any registered instance point, plus designated surface cells."""
    grid = smap.costmap
    anchors = np.zeros((grid.height, grid.width), dtype=bool)
    for q in smap.instances:
        pts = q.points
        cols = np.floor((pts[:, 0] - grid.origin[0]) / grid.cell).astype(np.int64)
        rows = np.floor((pts[:, 1] - grid.origin[1]) / grid.cell).astype(np.int64)
        ok = (rows >= 0) & (rows < grid.height) & (cols >= 0) & (cols < grid.width)
        anchors[rows[ok], cols[ok]] = True
    if surface_cells is not None:
        for row, col in surface_cells:
            if grid.in_bounds(row, col):
                anchors[row, col] = True
    return anchors


def free_component(costmap: BevGrid, cell: tuple) -> np.ndarray:
    """8-connected free component containing ``cell`` (empty if not free)."""
    free = costmap.free
    if not costmap.in_bounds(*cell) or not free[cell]:
        return np.zeros_like(free)
    lab, _ = ndimage.label(free, structure=np.ones((3, 3), dtype=bool))
    return lab == lab[cell]


def searchable_locations(
    smap: SemanticMap3D,
    region: str,
    reach_radius: float = REACH_RADIUS,
    min_separation: float = MIN_SEPARATION,
    surface_cells=None,
    reachable_from: Optional[tuple] = None,
    standoff: float = STANDOFF,
) -> list:
    """Precomputed search poses ``(x, y)`` for ``region``.

    Candidates are free costmap cells labelled ``region`` whose center is
    within ``min(standoff, reach_radius)`` of an anchor cell, i.e. cells
    hugging the furniture so that the arm still reaches across the
    surface.  Anchors are cells holding instance points plus the optional
    ``surface_cells``.  A row-major greedy scan
    keeps a candidate only if it is at least ``min_separation`` from every
    kept one.  ``reachable_from`` (a world point) additionally drops cells
    outside its free component.
    """
    if smap.regions is None or region not in smap.region_names:
        raise UnknownRegionError(region)
    grid = smap.costmap
    if not smap.regions.same_geometry(grid):
        raise MapError("region layer and costmap differ in geometry")
    rid = smap.regions.labels.index(region)
    anchors = anchor_cells(smap, surface_cells)
    if not anchors.any():
        return []
    dist = ndimage.distance_transform_edt(~anchors, sampling=grid.cell)
    cand = grid.free & (smap.regions.data == rid) & (dist <= min(standoff, reach_radius) + 1e-9)
    if reachable_from is not None:
        cand &= free_component(grid, grid.world_to_cell(*reachable_from))
    kept = []
    sep2 = min_separation * min_separation
    for row, col in zip(*np.nonzero(cand)):
        x, y = grid.cell_center(int(row), int(col))
        if all((x - kx) ** 2 + (y - ky) ** 2 >= sep2 - 1e-12 for kx, ky in kept):
            kept.append((x, y))
    return kept


# -- map building -----------------------------------------------------------------

def build_map(
    intrinsics: CameraIntrinsics,
    keyframes: Sequence[KeyFrame],
    proposer,
    candidates: Sequence[str],
    bounds: Optional[tuple] = None,
    voxel: float = DEFAULT_VOXEL,
    max_range: Optional[float] = DEFAULT_MAX_RANGE,
    cell: float = COSTMAP_CELL,
    z_band: tuple = Z_BAND,
    inflation: float = INFLATION,
    occ_threshold: int = OCC_THRESHOLD,
    min_points: int = MIN_POINTS,
    radius: float = WINDOW_RADIUS,
    step: float = WINDOW_STEP,
    jobs: int = 1,
) -> SemanticMap3D:
    """Run the full mapping pipeline over recorded key frames."""
    cloud = accumulate((keyframe_cloud(intrinsics, kf, max_range) for kf in keyframes), voxel)
    costmap = build_costmap(cloud, cell, z_band, inflation, occ_threshold, bounds)
    params = {
        "voxel": voxel, "max_range": max_range, "cell": cell, "z_band": list(z_band),
        "inflation": inflation, "occ_threshold": occ_threshold, "min_points": min_points,
        "radius": radius, "step": step,
    }
    smap = SemanticMap3D(cloud, costmap, [], None, params)
    for kf in keyframes:
        for q in extract_instances(kf, intrinsics, min_points, max_range):
            if costmap.contains(q.center[0], q.center[1]):
                register_instance(smap, q)
            else:
                log.warning("dropping '%s' from key frame %d: center outside map", q.label, kf.index)
    smap.regions = sweep_regions(smap.instances, costmap, proposer, candidates, radius, step, jobs)
    return smap


# -- serialization --------------------------------------------------------------------

def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def save_map(smap: SemanticMap3D, directory) -> Path:
    """Write the map as a directory of plain files.

    structure.bin      float32 little-endian xyz triples
    costmap.json/.bin  grid header + row-major uint8 payload
    regions.json/.bin  same, header carries the label table
    instances.jsonl    one instance per line; offsets live in instances.bin
                       (float64 little-endian xyz) at [offset_start, +offset_count)
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    _dump_json(d / "map.json", {"version": MAP_FORMAT_VERSION, "params": smap.params,
                                "points": len(smap.structure),
                                "instances": len(smap.instances)})
    (d / "structure.bin").write_bytes(smap.structure.points.astype("<f4").tobytes())
    _dump_json(d / "costmap.json", smap.costmap.header())
    (d / "costmap.bin").write_bytes(smap.costmap.data.tobytes())
    if smap.regions is not None:
        _dump_json(d / "regions.json", smap.regions.header())
        (d / "regions.bin").write_bytes(smap.regions.data.tobytes())
    lines, blobs, start = [], [], 0
    for q in smap.instances:
        lines.append(json.dumps({
            "label": q.label, "confidence": q.confidence, "bbox": list(q.bbox),
            "keyframe": q.keyframe, "center": [float(v) for v in q.center],
            "offset_start": start, "offset_count": len(q.offsets),
        }, sort_keys=True))
        blobs.append(q.offsets.astype("<f8").tobytes())
        start += len(q.offsets)
    (d / "instances.jsonl").write_text("".join(line + "\n" for line in lines))
    (d / "instances.bin").write_bytes(b"".join(blobs))
    return d


def _load_grid(d: Path, name: str) -> BevGrid:
    header = json.loads((d / f"{name}.json").read_text())
    data = np.frombuffer((d / f"{name}.bin").read_bytes(), dtype=np.uint8)
    if len(data) != header["width"] * header["height"]:
        raise MapError(f"{name}.bin payload size does not match its header")
    return BevGrid(tuple(header["origin"]), header["cell"], header["width"], header["height"],
                   data.copy(), header.get("labels"))


def load_map(directory) -> SemanticMap3D:
    d = Path(directory)
    for required in ("map.json", "structure.bin", "costmap.json", "costmap.bin"):
        if not (d / required).exists():
            raise MapError(f"map directory {d} is missing {required}")
    meta = json.loads((d / "map.json").read_text())
    pts = np.frombuffer((d / "structure.bin").read_bytes(), dtype="<f4").reshape(-1, 3)
    costmap = _load_grid(d, "costmap")
    regions = _load_grid(d, "regions") if (d / "regions.json").exists() else None
    offsets = np.frombuffer((d / "instances.bin").read_bytes(), dtype="<f8").reshape(-1, 3) \
        if (d / "instances.bin").exists() else np.zeros((0, 3))
    instances = []
    jl = d / "instances.jsonl"
    for line in (jl.read_text().splitlines() if jl.exists() else []):
        rec = json.loads(line)
        s, n = rec["offset_start"], rec["offset_count"]
        instances.append(SemanticGeometricInstance(
            rec["label"], rec["center"], offsets[s:s + n].copy(), tuple(rec["bbox"]),
            rec["confidence"], rec["keyframe"]))
    return SemanticMap3D(PointCloud(pts.astype(np.float64)), costmap, instances, regions,
                         meta.get("params", {}))
