from __future__ import annotations

import heapq
import math

import numpy as np
import pytest

from semovmm.nav import SQRT2, GridPath, Navigator, NoPathError, PlanningError, plan_path, shortest_mission_length
from semovmm.semantic_map import FREE, OCCUPIED, BevGrid


def grid_of(occ, cell=1.0):
    occ = np.asarray(occ, dtype=bool)
    h, w = occ.shape
    return BevGrid((0.0, 0.0), cell, w, h, np.where(occ, OCCUPIED, FREE))


def dijkstra(occ, start, goal):
    """Reference shortest path as a (straight, diagonal) step pair, or None."""
    h, w = occ.shape
    dist = {start: (0.0, 0, 0)}
    pq = [(0.0, 0, 0, start)]
    done = set()
    while pq:
        d, a, b, u = heapq.heappop(pq)
        if u in done:
            continue
        done.add(u)
        if u == goal:
            return a, b
        r, c = u
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if not (dr or dc):
                    continue
                v = (r + dr, c + dc)
                if not (0 <= v[0] < h and 0 <= v[1] < w) or occ[v]:
                    continue
                if dr and dc and occ[r, c + dc] and occ[r + dr, c]:
                    continue
                na, nb = (a, b + 1) if dr and dc else (a + 1, b)
                nd = na + nb * math.sqrt(2)
                if v not in dist or nd < dist[v][0]:
                    dist[v] = (nd, na, nb)
                    heapq.heappush(pq, (nd, na, nb, v))
    return None


def check_path(grid, path: GridPath, start, goal):
    assert path.cells[0] == start and path.cells[-1] == goal
    for (r0, c0), (r1, c1) in zip(path.cells, path.cells[1:]):
        assert max(abs(r0 - r1), abs(c0 - c1)) == 1
    for r, c in path.cells:
        assert grid.data[r, c] == FREE
    assert abs(path.length - path.steps_length()) < 1e-9


def test_straight_line():
    g = grid_of(np.zeros((5, 5)), cell=0.5)
    p = plan_path(g, (0, 0), (0, 4))
    assert (p.straight, p.diagonal) == (4, 0)
    assert p.length == 2.0


def test_start_equals_goal():
    p = plan_path(grid_of(np.zeros((3, 3))), (1, 1), (1, 1))
    assert p.length == 0 and p.cells == ((1, 1),)


def test_unreachable_and_invalid_endpoints():
    occ = np.zeros((5, 5), dtype=bool)
    occ[:, 2] = True
    g = grid_of(occ)
    with pytest.raises(NoPathError):
        plan_path(g, (0, 0), (0, 4))
    with pytest.raises(PlanningError):
        plan_path(g, (0, 2), (0, 0))
    with pytest.raises(PlanningError):
        plan_path(g, (0, 0), (9, 9))


def test_corner_cutting_rule():
    occ = np.zeros((2, 2), dtype=bool)
    occ[0, 1] = occ[1, 0] = True
    with pytest.raises(NoPathError):
        plan_path(grid_of(occ), (0, 0), (1, 1))
    occ[1, 0] = False
    p = plan_path(grid_of(occ), (0, 0), (1, 1))
    assert (p.straight, p.diagonal) == (0, 1)


def test_matches_dijkstra_on_random_grids(rng):
    solved = 0
    for _ in range(300):
        h, w = rng.integers(2, 21, size=2)
        occ = rng.random((h, w)) < 0.2
        free = np.argwhere(~occ)
        if len(free) < 2:
            continue
        s, t = (tuple(int(v) for v in free[i]) for i in rng.choice(len(free), 2, replace=False))
        ref = dijkstra(occ, s, t)
        g = grid_of(occ, cell=0.05)
        if ref is None:
            with pytest.raises(NoPathError):
                plan_path(g, s, t)
            continue
        p = plan_path(g, s, t)
        assert (p.straight, p.diagonal) == ref
        check_path(g, p, s, t)
        solved += 1
    assert solved > 150


def test_deterministic_tie_breaking():
    g = grid_of(np.zeros((6, 6)))
    a = plan_path(g, (0, 0), (3, 5))
    b = plan_path(g, (0, 0), (3, 5))
    assert a.cells == b.cells


def test_navigate_corridor_and_lower_bound(rng):
    g = grid_of(np.zeros((1, 10)), cell=0.05)
    nav = Navigator(g)
    state, dist, _ = nav.navigate((0.025, 0.025), (0.475, 0.025))
    assert state == (0.475, 0.025)
    assert dist == pytest.approx(0.45, abs=1e-12)
    assert nav.navigate(state, state)[1] == 0.0
    occ = rng.random((20, 20)) < 0.15
    g = grid_of(occ, cell=0.1)
    nav = Navigator(g)
    free = np.argwhere(~occ)
    for _ in range(50):
        (r0, c0), (r1, c1) = free[rng.choice(len(free), 2)]
        a, b = g.cell_center(r0, c0), g.cell_center(r1, c1)
        try:
            _, d, _ = nav.navigate(a, b)
        except NoPathError:
            continue
        assert d >= math.dist(a, b) - 1e-12


def test_navigator_memoizes_both_outcomes():
    occ = np.zeros((3, 5), dtype=bool)
    occ[:, 2] = True
    nav = Navigator(grid_of(occ))
    for _ in range(2):
        with pytest.raises(NoPathError):
            nav.plan((0, 0), (0, 4))
    assert nav.plan((0, 0), (2, 1)) is nav.plan((0, 0), (2, 1))


def test_shortest_mission_length():
    g = grid_of(np.zeros((1, 6)), cell=0.1)
    nav = Navigator(g)
    start = g.cell_center(0, 0)
    # object one cell from the start, location on the adjacent cell
    loc = g.cell_center(0, 1)
    assert shortest_mission_length(nav, start, loc, [loc], 0.05) == pytest.approx(0.2)
    # symmetric corridor: out == back, best location wins
    locs = [g.cell_center(0, 5), g.cell_center(0, 3)]
    obj = g.cell_center(0, 4)
    assert shortest_mission_length(nav, start, obj, locs, 0.1) == pytest.approx(0.6)
    assert nav.distance(start, locs[1]) == nav.distance(locs[1], start)
    assert shortest_mission_length(nav, start, obj, locs, 0.01) is None


def test_shortest_mission_length_matches_dijkstra(rng):
    for _ in range(30):
        occ = rng.random((15, 15)) < 0.15
        free = [tuple(v) for v in np.argwhere(~occ)]
        g = grid_of(occ, cell=0.1)
        nav = Navigator(g)
        s = free[rng.integers(len(free))]
        locs = [free[i] for i in rng.choice(len(free), 4, replace=False)]
        obj = g.cell_center(*locs[0])
        got = shortest_mission_length(nav, g.cell_center(*s), obj, [g.cell_center(*c) for c in locs], 0.35)
        best = None
        for c in locs:
            if math.dist(g.cell_center(*c), obj) > 0.35:
                continue
            out, back = dijkstra(occ, s, c), dijkstra(occ, c, s)
            if out is None:
                continue
            total = 0.1 * (out[0] + out[1] * SQRT2) + 0.1 * (back[0] + back[1] * SQRT2)
            best = total if best is None else min(best, total)
        if best is None:
            assert got is None
        else:
            assert got == pytest.approx(best, abs=1e-12)
