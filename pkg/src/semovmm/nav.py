"""Grid navigation on the flattened costmap.

Paths are 8-connected.  A straight step costs one cell, a diagonal step
sqrt(2) cells; diagonal moves that squeeze between two occupied
orthogonal neighbours are not allowed.  Path cost is tracked as an exact
pair ``(straight steps, diagonal steps)`` so equal-cost paths always
produce bit-identical lengths.
"""

from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass
from typing import Optional, Sequence

from .semantic_map import BevGrid

SQRT2 = math.sqrt(2.0)

_MOVES = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class PlanningError(ValueError):
    pass


class NoPathError(PlanningError):
    pass


def step_cost(straight: int, diagonal: int) -> float:
    """Path cost in cells for a given step mix."""
    return straight + diagonal * SQRT2


def octile(r0: int, c0: int, r1: int, c1: int) -> float:
    dr, dc = abs(r0 - r1), abs(c0 - c1)
    lo, hi = min(dr, dc), max(dr, dc)
    return (hi - lo) + lo * SQRT2


@dataclass(frozen=True)
class GridPath:
    cells: tuple
    straight: int
    diagonal: int
    cell: float

    @property
    def length(self) -> float:
        """Length in meters."""
        return self.cell * step_cost(self.straight, self.diagonal)

    def steps_length(self) -> float:
        """Length re-summed step by step (used to check ``length``)."""
        total = 0.0
        for (r0, c0), (r1, c1) in zip(self.cells, self.cells[1:]):
            total += self.cell * (SQRT2 if r0 != r1 and c0 != c1 else 1.0)
        return total

    def polyline(self, grid: BevGrid) -> list:
        return [list(grid.cell_center(r, c)) for r, c in self.cells]


def _check_endpoint(costmap: BevGrid, cell, what: str):
    r, c = cell
    if not costmap.in_bounds(r, c):
        raise PlanningError(f"{what} {cell} outside the costmap")
    if costmap.data[r, c] != 0:
        raise PlanningError(f"{what} {cell} is not a free cell")


def plan_path(costmap: BevGrid, start: tuple, goal: tuple) -> GridPath:
    """Minimum-cost 8-connected path by A* with the octile heuristic.

    Ties on f are broken toward the lower heuristic, then row-major cell
    order.  Raises ``NoPathError`` if the goal is unreachable.
    """
    start = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))
    _check_endpoint(costmap, start, "start")
    _check_endpoint(costmap, goal, "goal")
    if start == goal:
        return GridPath((start,), 0, 0, costmap.cell)

    H, W = costmap.height, costmap.width
    free = (costmap.data.reshape(-1) == 0).tolist()
    gr, gc = goal
    s_idx = start[0] * W + start[1]
    g_idx = gr * W + gc

    counts = {s_idx: (0, 0)}
    g_val = {s_idx: 0.0}
    parent = {s_idx: -1}
    closed = set()
    h0 = octile(start[0], start[1], gr, gc)
    heap = [(h0, h0, s_idx)]
    while heap:
        _, _, idx = heapq.heappop(heap)
        if idx in closed:
            continue
        if idx == g_idx:
            break
        closed.add(idx)
        r, c = divmod(idx, W)
        a, b = counts[idx]
        for dr, dc in _MOVES:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < H and 0 <= nc < W):
                continue
            n_idx = nr * W + nc
            if not free[n_idx] or n_idx in closed:
                continue
            if dr and dc:
                if not free[r * W + nc] and not free[nr * W + c]:
                    continue
                na, nb = a, b + 1
            else:
                na, nb = a + 1, b
            ng = step_cost(na, nb)
            old = g_val.get(n_idx)
            if old is None or ng < old:
                g_val[n_idx] = ng
                counts[n_idx] = (na, nb)
                parent[n_idx] = idx
                h = octile(nr, nc, gr, gc)
                heapq.heappush(heap, (ng + h, h, n_idx))
    else:
        raise NoPathError(f"no path from {start} to {goal}")

    cells = []
    idx = g_idx
    while idx != -1:
        cells.append(divmod(idx, W))
        idx = parent[idx]
    cells.reverse()
    a, b = counts[g_idx]
    return GridPath(tuple(cells), a, b, costmap.cell)


class Navigator:
    """Plans on one immutable costmap and memoizes results per cell pair.

    The robot is a point on the inflated costmap and is assumed to follow
    each planned path exactly.  Safe to share between threads: concurrent
    misses on the same pair just compute the same path twice.
    """

    def __init__(self, costmap: BevGrid):
        self.costmap = costmap
        self._cache: dict = {}
        self._lock = threading.Lock()

    def cell_of(self, pose) -> tuple:
        return self.costmap.world_to_cell(pose[0], pose[1])

    def plan(self, start_cell: tuple, goal_cell: tuple) -> GridPath:
        key = (tuple(start_cell), tuple(goal_cell))
        with self._lock:
            hit = self._cache.get(key)
        if hit is None:
            try:
                hit = plan_path(self.costmap, start_cell, goal_cell)
            except NoPathError as exc:
                hit = exc
            with self._lock:
                self._cache[key] = hit
        if isinstance(hit, NoPathError):
            raise hit
        return hit

    def navigate(self, state, target):
        """Move from pose ``state`` to pose ``target``.

        Returns ``(new_state, traveled_meters, path)``.  Raises
        ``NoPathError`` when the target cannot be reached and
        ``PlanningError`` when either pose is not on a free cell.
        """
        path = self.plan(self.cell_of(state), self.cell_of(target))
        return (float(target[0]), float(target[1])), path.length, path

    def distance(self, a, b) -> float:
        return self.plan(self.cell_of(a), self.cell_of(b)).length


def shortest_mission_length(
    navigator: Navigator,
    start,
    object_xy,
    locations: Sequence,
    reach_radius: float,
) -> Optional[float]:
    """Oracle fetch length: start -> best location that reaches the object -> start.

    Only searchable locations within ``reach_radius`` of the object count.
    Returns ``None`` when no such location is reachable (infeasible episode).
    """
    best = None
    ox, oy = object_xy[0], object_xy[1]
    for loc in locations:
        if (loc[0] - ox) ** 2 + (loc[1] - oy) ** 2 > reach_radius * reach_radius:
            continue
        try:
            total = navigator.distance(start, loc) + navigator.distance(loc, start)
        except PlanningError:
            continue
        if best is None or total < best:
            best = total
    return best
