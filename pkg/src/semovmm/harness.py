"""Experiment groups, batch execution and metrics.

Five groups probe how the search order reacts to user hints and to
objects that moved:

NoHint           no region hint, default placement
Random           no hint, region order replaced by a random permutation
Hinting          hint names a region that holds the object
ErrantSemantics  no hint, object moved to a region it does not belong to
Misleading       hint names a region that does not hold the object

Per group we report SFT (first searched region holds the object), SN
(robot stood within reach of the object), SP (picked), Succ (picked and
returned) and SPL.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .backend import RandomPrioritizer
from .mission import BACKEND_ERROR, DetectionSimConfig, mission_locations, run_mission
from .nav import Navigator, shortest_mission_length
from .scene import Placement, Scene
from .semantic_map import SemanticMap3D, build_map
from .synthetic import DEFAULT_INTRINSICS, render_survey

log = logging.getLogger(__name__)

GROUPS = ("NoHint", "Random", "Hinting", "ErrantSemantics", "Misleading")
DEFAULT_COUNTS = {"NoHint": 45, "Random": 30, "Hinting": 30, "ErrantSemantics": 15, "Misleading": 15}
CONTROL = "Random"


class HarnessError(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeSpec:
    group: str
    index: int
    target: str
    instruction: str
    placements: tuple
    seed: int
    hint: Optional[str] = None

    @property
    def true_regions(self) -> list:
        return sorted({o.region for o in self.placements if o.category == self.target})


@dataclass
class EpisodeResult:
    spec: EpisodeSpec
    sft: bool = False
    sn: bool = False
    sp: bool = False
    succ: bool = False
    shortest: Optional[float] = None
    traveled: float = 0.0
    visited: list = field(default_factory=list)
    outcome: str = ""

    @property
    def excluded(self) -> bool:
        return self.shortest is None

    def to_dict(self) -> dict:
        return {
            "group": self.spec.group, "index": self.spec.index, "target": self.spec.target,
            "instruction": self.spec.instruction, "seed": self.spec.seed,
            "true_regions": self.spec.true_regions, "sft": self.sft, "sn": self.sn, "sp": self.sp,
            "succ": self.succ, "shortest": self.shortest, "traveled": self.traveled,
            "visited": self.visited, "outcome": self.outcome,
        }


def compute_spl(episodes: Sequence) -> float:
    """Mean of ``S * l / max(p, l)`` over ``(success, l, p)`` tuples."""
    episodes = list(episodes)
    if not episodes:
        raise HarnessError("SPL is undefined for zero episodes")
    total = 0.0
    for s, l, p in episodes:
        if not l > 0 or p < 0:
            raise HarnessError(f"invalid episode lengths l={l}, p={p}")
        if s:
            total += l / max(p, l)
    return total / len(episodes)


def _placement_without(scene: Scene, category: str) -> list:
    return [o for o in scene.objects if o.category != category]


def generate_group(
    scene: Scene,
    group: str,
    n_episodes: int,
    seed: int,
    slots: Optional[dict] = None,
) -> list:
    """Episode specs for one group.

    Targets cycle through the scene's categories.  ``slots`` maps region ->
    candidate object positions for moved objects (default: every surface
    slot of the region).
    """
    if group not in GROUPS:
        raise HarnessError(f"unknown group {group!r}")
    if n_episodes < 1:
        raise HarnessError("n_episodes must be at least 1")
    names = scene.region_names
    if group in ("ErrantSemantics", "Misleading") and len(names) < 2:
        raise HarnessError(f"group {group} needs at least two regions")
    rng = np.random.default_rng([seed, GROUPS.index(group)])
    cats = scene.categories
    specs = []
    for i in range(n_episodes):
        cat = cats[i % len(cats)]
        home = scene.default_regions(cat)
        others = [r for r in names if r not in home]
        placements = tuple(scene.objects)
        hint = None
        if group == "Hinting":
            hint = home[int(rng.integers(len(home)))]
        elif group == "Misleading":
            if not others:
                raise HarnessError(f"'{cat}' is present in every region; cannot mislead")
            hint = others[int(rng.integers(len(others)))]
        elif group == "ErrantSemantics":
            if not others:
                raise HarnessError(f"'{cat}' is present in every region; cannot misplace")
            choices = others
            if slots is not None:
                choices = [r for r in others if slots.get(r)]
                if not choices:
                    raise HarnessError(f"no feasible slot to misplace '{cat}'")
            region = choices[int(rng.integers(len(choices)))]
            region_slots = slots[region] if slots is not None else scene.slots(region)
            pos = tuple(region_slots[int(rng.integers(len(region_slots)))])
            placements = tuple(_placement_without(scene, cat)) + (Placement(cat, region, pos),)
        instruction = f"fetch the {cat}" + (f" from the {hint}" if hint else "")
        ep_seed = int(rng.integers(2 ** 63 - 1))
        specs.append(EpisodeSpec(group, i, cat, instruction, placements, ep_seed, hint))
    return specs


@dataclass
class GroupMetrics:
    group: str
    n: int
    sft: int
    sn: int
    sp: int
    succ: int
    spl: float
    excluded: int = 0
    backend_errors: int = 0

    def rate(self, key: str) -> float:
        return getattr(self, key) / self.n if self.n else 0.0

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("group", "n", "sft", "sn", "sp", "succ", "spl",
                                            "excluded", "backend_errors")}
        for k in ("sft", "sn", "sp", "succ"):
            d[f"{k}_rate"] = self.rate(k)
        return d


def summarize(group: str, results: Sequence[EpisodeResult]) -> GroupMetrics:
    kept = [r for r in results if not r.excluded]
    spl = compute_spl([(r.succ, r.shortest, r.traveled) for r in kept]) if kept else 0.0
    return GroupMetrics(
        group=group, n=len(kept),
        sft=sum(r.sft for r in kept), sn=sum(r.sn for r in kept),
        sp=sum(r.sp for r in kept), succ=sum(r.succ for r in kept), spl=spl,
        excluded=len(results) - len(kept),
        backend_errors=sum(r.outcome == BACKEND_ERROR for r in kept),
    )


def _increase(value: float, base: float) -> Optional[float]:
    return None if base == 0 else value / base - 1.0


@dataclass
class MetricsReport:
    groups: dict
    total: Optional[GroupMetrics]
    seed: int
    results: list = field(default_factory=list, repr=False)

    def increments(self, name: str) -> dict:
        ctrl = self.groups.get(CONTROL)
        m = self.total if name == "total" else self.groups[name]
        if ctrl is None or m is None or name == CONTROL:
            return {"sft_incr": None, "spl_incr": None}
        return {"sft_incr": _increase(m.rate("sft"), ctrl.rate("sft")),
                "spl_incr": _increase(m.spl, ctrl.spl)}

    def to_dict(self) -> dict:
        out = {"seed": self.seed, "groups": {}, "total_without_random": None}
        for name, m in self.groups.items():
            out["groups"][name] = {**m.to_dict(), **self.increments(name)}
        if self.total is not None:
            out["total_without_random"] = {**self.total.to_dict(), **self.increments("total")}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def to_text(self) -> str:
        header = ["Group", "SN", "SP", "Succ.", "SFT", "SPL", "SFT Incr.", "SPL Incr."]
        rows = []

        def pct(v):
            return "-" if v is None else f"{100 * v:.2f}%"

        for name, m in list(self.groups.items()) + ([("Total without R.", self.total)] if self.total else []):
            inc = self.increments("total" if m is self.total else name)
            rows.append([name] + [f"{getattr(m, k)}/{m.n}" for k in ("sn", "sp", "succ", "sft")]
                        + [f"{m.spl:.4f}", pct(inc["sft_incr"]), pct(inc["spl_incr"])])
        widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
        fmt = lambda r: "  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip()  # noqa: E731
        lines = [fmt(header), "  ".join("-" * w for w in widths)] + [fmt(r) for r in rows]
        return "\n".join(lines) + "\n"


def scene_map(scene: Scene, proposer=None, **kw) -> SemanticMap3D:
    """Map the scene from a synthetic survey with its default placement."""
    keyframes = render_survey(scene)
    proposer = proposer or scene.mock_backend()
    return build_map(DEFAULT_INTRINSICS, keyframes, proposer, scene.region_names,
                     bounds=scene.bounds, **kw)


class Experiment:
    """Shared, read-only state for running many episodes on one map."""

    def __init__(self, scene: Scene, smap: SemanticMap3D, cfg: DetectionSimConfig = DetectionSimConfig(),
                 backend=None):
        self.scene = scene
        self.smap = smap
        self.cfg = cfg
        self.backend = backend or scene.mock_backend()
        self.navigator = Navigator(smap.costmap)
        self.locations = mission_locations(scene, smap, reach_radius=cfg.reach_radius)
        self._all_locations = [p for r in smap.region_names for p in self.locations[r]]
        self.slots = {
            r: [s for s in scene.slots(r) if self.shortest_length([s]) is not None]
            for r in scene.region_names
        }

    def shortest_length(self, positions) -> Optional[float]:
        best = None
        for pos in positions:
            l = shortest_mission_length(self.navigator, self.scene.p0, pos, self._all_locations,
                                        self.cfg.reach_radius)
            if l is not None and (best is None or l < best):
                best = l
        return best

    def run_episode(self, spec: EpisodeSpec) -> EpisodeResult:
        truth = [o.position for o in spec.placements if o.category == spec.target]
        l = self.shortest_length(truth)
        if l is None or l <= 0:
            log.warning("%s #%d (%s): object unreachable, episode excluded", spec.group, spec.index,
                        spec.target)
            return EpisodeResult(spec, shortest=None, outcome="infeasible")
        prioritizer = self.backend
        if spec.group == "Random":
            prioritizer = RandomPrioritizer(np.random.default_rng([spec.seed, 1]))
        m = run_mission(self.scene, self.smap, spec.instruction, self.backend, prioritizer, self.cfg,
                        seed=spec.seed, placements=spec.placements, locations=self.locations,
                        navigator=self.navigator)
        return EpisodeResult(spec, sft=m.first_region_correct, sn=m.reached_object, sp=m.picked,
                             succ=m.success and m.returned, shortest=l, traveled=m.traveled,
                             visited=m.visited_regions, outcome=m.outcome)

    def run(self, specs: Sequence[EpisodeSpec], jobs: int = 1) -> list:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                return list(pool.map(self.run_episode, specs))
        return [self.run_episode(s) for s in specs]


def run_experiment(
    scene: Scene,
    counts: Optional[dict] = None,
    seed: int = 0,
    cfg: DetectionSimConfig = DetectionSimConfig(),
    smap: Optional[SemanticMap3D] = None,
    backend=None,
    jobs: int = 1,
    experiment: Optional[Experiment] = None,
) -> MetricsReport:
    """Run every group with a non-zero count and summarize."""
    counts = dict(DEFAULT_COUNTS if counts is None else counts)
    for g in counts:
        if g not in GROUPS:
            raise HarnessError(f"unknown group {g!r}")
    if experiment is None:
        experiment = Experiment(scene, smap if smap is not None else scene_map(scene), cfg, backend)
    groups, results = {}, []
    for g in GROUPS:
        n = counts.get(g, 0)
        if n <= 0:
            continue
        res = experiment.run(generate_group(scene, g, n, seed, experiment.slots), jobs)
        results.extend(res)
        groups[g] = summarize(g, res)
    rest = [r for r in results if r.spec.group != CONTROL]
    total = summarize("Total without R.", rest) if rest else None
    return MetricsReport(groups, total, seed, results)
