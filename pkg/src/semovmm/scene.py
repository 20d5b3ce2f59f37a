"""Simulated scenes: regions, furniture, object placements and commonsense tables."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .backend import AffinityTable, MockBackend

SLOT_SPACING = 0.3
SLOT_INSET = 0.12


class SceneError(ValueError):
    pass


def point_in_polygon(x: float, y: float, polygon) -> bool:
    """Even-odd ray casting; points on the boundary count as inside."""
    n = len(polygon)
    inside = False
    for i in range(n):
        x0, y0 = polygon[i]
        x1, y1 = polygon[(i + 1) % n]
        # boundary
        if min(x0, x1) - 1e-12 <= x <= max(x0, x1) + 1e-12 and min(y0, y1) - 1e-12 <= y <= max(y0, y1) + 1e-12:
            if abs((x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)) <= 1e-12:
                return True
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < xc:
                inside = not inside
    return inside


@dataclass(frozen=True)
class Surface:
    label: str
    box: tuple  # (xmin, ymin, xmax, ymax)
    height: float

    @property
    def center(self) -> tuple:
        x0, y0, x1, y1 = self.box
        return ((x0 + x1) / 2, (y0 + y1) / 2)

    def slots(self, spacing: float = SLOT_SPACING, inset: float = SLOT_INSET) -> list:
        """Object positions along the surface's long axis, on its center line."""
        x0, y0, x1, y1 = self.box
        cx, cy = self.center
        if x1 - x0 >= y1 - y0:
            lo, hi = x0 + inset, x1 - inset
            n = max(1, int(math.floor((hi - lo) / spacing + 1e-9)) + 1)
            xs = [cx] if n == 1 else list(np.linspace(lo, hi, n))
            return [(round(float(x), 6), cy) for x in xs]
        lo, hi = y0 + inset, y1 - inset
        n = max(1, int(math.floor((hi - lo) / spacing + 1e-9)) + 1)
        ys = [cy] if n == 1 else list(np.linspace(lo, hi, n))
        return [(cx, round(float(y), 6)) for y in ys]


@dataclass(frozen=True)
class Region:
    name: str
    polygon: tuple
    surfaces: tuple

    def contains(self, x: float, y: float) -> bool:
        return point_in_polygon(x, y, self.polygon)

    @property
    def centroid(self) -> tuple:
        pts = np.asarray(self.polygon, dtype=float)
        return (float(pts[:, 0].mean()), float(pts[:, 1].mean()))


@dataclass(frozen=True)
class Placement:
    category: str
    region: str
    position: tuple


@dataclass
class Scene:
    name: str
    bounds: tuple
    p0: tuple
    regions: list
    objects: list
    affinity: AffinityTable
    walls: list = field(default_factory=list)
    lexicon_objects: list = field(default_factory=list)
    lexicon_regions: list = field(default_factory=list)
    object_size: tuple = (0.08, 0.08, 0.12)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        names = [r.name for r in self.regions]
        if len(set(names)) != len(names):
            raise SceneError("region names must be unique")
        for r in self.regions:
            if not r.surfaces:
                raise SceneError(f"region '{r.name}' has no searchable surface")
        for obj in self.objects:
            region = self.region(obj.region)
            if not region.contains(*obj.position):
                raise SceneError(f"'{obj.category}' at {obj.position} lies outside '{obj.region}'")

    @property
    def region_names(self) -> list:
        return [r.name for r in self.regions]

    def region(self, name: str) -> Region:
        for r in self.regions:
            if r.name == name:
                return r
        raise SceneError(f"unknown region '{name}'")

    def region_of(self, x: float, y: float) -> Optional[str]:
        for r in self.regions:
            if r.contains(x, y):
                return r.name
        return None

    @property
    def categories(self) -> list:
        """Distinct object categories in placement-table order."""
        seen = []
        for o in self.objects:
            if o.category not in seen:
                seen.append(o.category)
        return seen

    def default_regions(self, category: str) -> list:
        out = []
        for o in self.objects:
            if o.category == category and o.region not in out:
                out.append(o.region)
        return out

    def slots(self, region: str) -> list:
        return [s for surf in self.region(region).surfaces for s in surf.slots()]

    @property
    def surfaces(self) -> list:
        return [s for r in self.regions for s in r.surfaces]

    def surface_cells(self, grid) -> list:
        """Costmap cells covered by any surface footprint."""
        cells = []
        for s in self.surfaces:
            x0, y0, x1, y1 = s.box
            r0, c0 = grid.world_to_cell(x0, y0)
            r1, c1 = grid.world_to_cell(x1, y1)
            for r in range(max(r0, 0), min(r1, grid.height - 1) + 1):
                for c in range(max(c0, 0), min(c1, grid.width - 1) + 1):
                    cells.append((r, c))
        return cells

    def surface_height_at(self, x: float, y: float) -> float:
        for s in self.surfaces:
            x0, y0, x1, y1 = s.box
            if x0 <= x <= x1 and y0 <= y <= y1:
                return s.height
        return 0.0

    def mock_backend(self) -> MockBackend:
        return MockBackend(self.affinity, self.lexicon_objects or self.categories,
                           self.lexicon_regions or self.region_names)

    # -- serialization --

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        regions = [
            Region(r["name"], tuple(tuple(p) for p in r["polygon"]),
                   tuple(Surface(s["label"], tuple(s["box"]), float(s["height"]))
                         for s in r.get("surfaces", [])))
            for r in d["regions"]
        ]
        objects = [Placement(o["category"], o["region"], tuple(o["position"])) for o in d["objects"]]
        lex = d.get("lexicon", {})
        return cls(
            name=d.get("name", "scene"),
            bounds=tuple(d["bounds"]),
            p0=tuple(d["p0"]),
            regions=regions,
            objects=objects,
            affinity=AffinityTable(d.get("affinity", {})),
            walls=[(tuple(w["box"]), float(w["height"])) for w in d.get("walls", [])],
            lexicon_objects=list(lex.get("objects", [])),
            lexicon_regions=list(lex.get("regions", [])),
            object_size=tuple(d.get("object_size", (0.08, 0.08, 0.12))),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bounds": list(self.bounds),
            "p0": list(self.p0),
            "walls": [{"box": list(b), "height": h} for b, h in self.walls],
            "regions": [
                {"name": r.name, "polygon": [list(p) for p in r.polygon],
                 "surfaces": [{"label": s.label, "box": list(s.box), "height": s.height}
                              for s in r.surfaces]}
                for r in self.regions
            ],
            "objects": [{"category": o.category, "region": o.region, "position": list(o.position)}
                        for o in self.objects],
            "affinity": self.affinity.to_dict(),
            "lexicon": {"objects": self.lexicon_objects, "regions": self.lexicon_regions},
            "object_size": list(self.object_size),
        }


def load_scene(path) -> Scene:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read scene {path}: {exc}") from exc
    try:
        return Scene.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise SceneError(f"malformed scene {path}: {exc}") from exc


def default_scene_path() -> Path:
    return Path(str(resources.files("semovmm") / "data" / "default_scene.json"))


def default_scene() -> Scene:
    return load_scene(default_scene_path())
