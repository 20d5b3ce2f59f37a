"""Bird's-eye renders of a map as binary PPM images.

Image row ``i`` shows grid row ``i`` (so +y points down the image), each
cell drawn as a ``scale`` x ``scale`` block.  Region labels pick a palette
color, occupied costmap cells are darkened, inflated cells slightly
darkened, instance centers drawn black and path cells in ``PATH_COLOR``.
No palette entry or shading produces ``PATH_COLOR`` or ``INSTANCE_COLOR``,
so those pixels can be recovered exactly from the image.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .semantic_map import INFLATED, OCCUPIED, SemanticMap3D

PATH_COLOR = (255, 0, 0)
INSTANCE_COLOR = (0, 0, 0)
UNKNOWN_COLOR = (200, 200, 200)
PALETTE = [
    (141, 211, 199), (190, 186, 218), (128, 177, 211), (253, 180, 98), (179, 222, 105),
    (252, 205, 229), (188, 128, 189), (204, 235, 197), (255, 237, 111), (217, 217, 217),
]


def region_color(index: int) -> tuple:
    """Palette color for label-table entry ``index`` (0 is ``unknown``)."""
    return UNKNOWN_COLOR if index == 0 else PALETTE[(index - 1) % len(PALETTE)]


def render_map(
    smap: SemanticMap3D,
    paths: Iterable = (),
    scale: int = 4,
    show_instances: bool = True,
) -> np.ndarray:
    """RGB ``uint8`` image of shape ``(height*scale, width*scale, 3)``.

    ``paths`` is an iterable of cell sequences ``[(row, col), ...]``.
    """
    if scale < 1:
        raise ValueError("scale must be >= 1")
    grid = smap.costmap
    h, w = grid.height, grid.width
    if smap.regions is not None:
        if not smap.regions.same_geometry(grid):
            raise ValueError("region layer and costmap differ in geometry")
        n = len(smap.regions.labels or [])
        lut = np.array([region_color(i) for i in range(max(n, 1))], dtype=np.float64)
        img = lut[smap.regions.data.reshape(h, w)]
    else:
        img = np.tile(np.array(UNKNOWN_COLOR, dtype=np.float64), (h, w, 1))
    cost = grid.data.reshape(h, w)
    img[cost == OCCUPIED] *= 0.35
    img[cost == INFLATED] *= 0.75
    # shaded colors never hit pure black or pure red: every palette entry
    # has all channels >= 98, so the darkest shade is still >= 34
    img = np.rint(img).astype(np.uint8)
    if show_instances:
        for q in smap.instances:
            if grid.contains(q.center[0], q.center[1]):
                r, c = grid.world_to_cell(q.center[0], q.center[1])
                img[r, c] = INSTANCE_COLOR
    for path in paths:
        for r, c in path:
            if grid.in_bounds(int(r), int(c)):
                img[int(r), int(c)] = PATH_COLOR
    return np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)


def write_ppm(path, image: np.ndarray) -> Path:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError("expected an (h, w, 3) uint8 image")
    p = Path(path)
    header = f"P6\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii")
    p.write_bytes(header + np.ascontiguousarray(image).tobytes())
    return p


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P6" or int(fields[3]) != 255:
        raise ValueError("only 8-bit binary PPM (P6) is supported")
    w, h = int(fields[1]), int(fields[2])
    pixels = np.frombuffer(data[pos + 1:pos + 1 + w * h * 3], dtype=np.uint8)
    if len(pixels) != w * h * 3:
        raise ValueError("truncated PPM payload")
    return pixels.reshape(h, w, 3).copy()


def trace_paths(events: Iterable[dict]) -> list:
    """Path cell lists from mission trace records (``to_dict`` form)."""
    out = []
    for e in events:
        cells = (e.get("detail") or {}).get("path")
        if cells:
            out.append([tuple(c) for c in cells])
    return out


def path_cells(image: np.ndarray, scale: int) -> set:
    """Grid cells drawn in ``PATH_COLOR`` (inverse of the path overlay)."""
    small = image[::scale, ::scale]
    rows, cols = np.nonzero(np.all(small == np.array(PATH_COLOR, dtype=np.uint8), axis=2))
    return set(zip(rows.tolist(), cols.tolist()))


def render_to_file(smap: SemanticMap3D, out, trace: Optional[Iterable[dict]] = None, scale: int = 4) -> Path:
    return write_ppm(out, render_map(smap, trace_paths(trace or []), scale))
