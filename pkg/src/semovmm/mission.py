"""Semantics-aware fetch missions.

One mission runs the whole loop for a single instruction: parse it,
order the map's regions by relevance to the target (hinted region first),
then visit each region's searchable locations in turn.  At each location
the robot looks for the target (detector proposal + verifier approval),
tries to pick it up at most ``n_e`` times, and on success drives back to
its start pose.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .backend import BackendError, DetectionEvidence, SimulatedApprover, match_region, reprioritize
from .nav import Navigator, PlanningError
from .scene import Placement, Scene
from .semantic_map import REACH_RADIUS, SemanticMap3D, searchable_locations

log = logging.getLogger(__name__)

SUCCESS = "success"
FAILURE = "failure"
BACKEND_ERROR = "backend-error"


@dataclass(frozen=True)
class DetectionSimConfig:
    ovd_true_positive_rate: float = 1.0
    ovd_false_positive_rate: float = 0.0
    approver_true_accept_rate: float = 1.0
    approver_false_accept_rate: float = 0.0
    pick_success_rate: float = 1.0
    n_e: int = 3
    reach_radius: float = REACH_RADIUS

    def __post_init__(self):
        for name in ("ovd_true_positive_rate", "ovd_false_positive_rate", "approver_true_accept_rate",
                     "approver_false_accept_rate", "pick_success_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.n_e < 1:
            raise ValueError("n_e must be at least 1")
        if not self.reach_radius > 0:
            raise ValueError("reach_radius must be positive")

    def approver(self) -> SimulatedApprover:
        return SimulatedApprover(self.approver_true_accept_rate, self.approver_false_accept_rate)


@dataclass(frozen=True)
class DetectedInstance:
    label: str
    position: tuple
    genuine: bool
    confidence: float


@dataclass
class MissionEvent:
    kind: str
    outcome: str
    pose: tuple
    distance: float = 0.0
    region: Optional[str] = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pose"] = list(self.pose)
        return d


@dataclass
class Mission:
    instruction: str
    start: tuple
    target: Optional[str] = None
    hint: Optional[str] = None
    regions: list = field(default_factory=list)
    events: list = field(default_factory=list)
    outcome: Optional[str] = None
    first_region_correct: bool = False
    reached_object: bool = False
    picked: bool = False
    returned: bool = False

    @property
    def success(self) -> bool:
        return self.outcome == SUCCESS

    @property
    def traveled(self) -> float:
        return sum(e.distance for e in self.events)

    @property
    def visited_regions(self) -> list:
        out = []
        for e in self.events:
            if e.kind == "navigate" and e.region is not None and (not out or out[-1] != e.region):
                out.append(e.region)
        return out

    @property
    def visited_locations(self) -> list:
        return [tuple(e.detail["target"]) for e in self.events if e.kind == "navigate"]

    def log(self, kind, outcome, pose, distance=0.0, region=None, **detail) -> MissionEvent:
        ev = MissionEvent(kind, outcome, (float(pose[0]), float(pose[1])), float(distance), region, detail)
        self.events.append(ev)
        return ev

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.events)


def objects_near(placements: Sequence[Placement], target: str, location, radius: float) -> list:
    key = target.lower()
    r2 = radius * radius
    hits = [
        o for o in placements
        if o.category.lower() == key
        and (o.position[0] - location[0]) ** 2 + (o.position[1] - location[1]) ** 2 <= r2
    ]
    return sorted(hits, key=lambda o: (o.position[0] - location[0]) ** 2 + (o.position[1] - location[1]) ** 2)


def find_object(
    location,
    target: str,
    placements: Sequence[Placement],
    cfg: DetectionSimConfig,
    rng: np.random.Generator,
    approver=None,
    events: Optional[list] = None,
) -> Optional[DetectedInstance]:
    """Simulated detector proposal followed by verifier approval.

    Every true instance within reach is proposed with the detector's true
    positive rate and then approved with the verifier's true-accept rate.
    With no true instance in reach, a spurious proposal appears with the
    false positive rate and survives with the false-accept rate.  The
    highest-confidence approved detection is returned.
    """
    approver = approver or cfg.approver()
    approved = []

    def note(kind, outcome, **detail):
        if events is not None:
            events.append((kind, outcome, detail))

    truth = objects_near(placements, target, location, cfg.reach_radius)
    if truth:
        for obj in truth:
            if rng.random() >= cfg.ovd_true_positive_rate:
                note("detect-proposal", "missed", position=list(obj.position))
                continue
            note("detect-proposal", "proposed", position=list(obj.position), genuine=True)
            ok, _ = approver.approve_detection(DetectionEvidence(target, True), target, rng)
            note("approve", "accepted" if ok else "rejected", genuine=True)
            if ok:
                approved.append(DetectedInstance(obj.category, tuple(obj.position), True,
                                                 float(rng.uniform(0.5, 1.0))))
    elif rng.random() < cfg.ovd_false_positive_rate:
        note("detect-proposal", "proposed", position=list(location), genuine=False)
        ok, _ = approver.approve_detection(DetectionEvidence(target, False), target, rng)
        note("approve", "accepted" if ok else "rejected", genuine=False)
        if ok:
            approved.append(DetectedInstance(target, tuple(location), False, float(rng.uniform(0.3, 0.9))))
    else:
        note("detect-proposal", "none")
    if not approved:
        return None
    return max(approved, key=lambda q: q.confidence)


def pick(q: DetectedInstance, cfg: DetectionSimConfig, rng: np.random.Generator):
    """Grasp trials until the first success or ``n_e`` failures.

    Returns ``(success, attempts)``.  A spurious detection has nothing to
    grasp and always uses all ``n_e`` trials.
    """
    if not q.genuine:
        return False, cfg.n_e
    for attempt in range(1, cfg.n_e + 1):
        if rng.random() < cfg.pick_success_rate:
            return True, attempt
    return False, cfg.n_e


def mission_locations(scene: Scene, smap: SemanticMap3D, **kw) -> dict:
    """Searchable locations of every map region, reachable from the scene start."""
    grid = smap.costmap
    cells = scene.surface_cells(grid)
    return {
        r: searchable_locations(smap, r, surface_cells=cells, reachable_from=scene.p0, **kw)
        for r in smap.region_names
    }


def run_mission(
    scene: Scene,
    smap: SemanticMap3D,
    instruction: str,
    parser,
    prioritizer=None,
    cfg: DetectionSimConfig = DetectionSimConfig(),
    seed=0,
    placements: Optional[Sequence[Placement]] = None,
    locations: Optional[dict] = None,
    navigator: Optional[Navigator] = None,
    approver=None,
    region_filter: Optional[Sequence[str]] = None,
    hint_only: bool = False,
) -> Mission:
    """Execute one fetch mission and return its trace.

    ``parser`` parses the instruction, ``prioritizer`` (default: the parser)
    orders the regions.  ``placements`` is the ground truth for this
    episode (default: the scene's default placement).  ``region_filter``
    restricts the search to the listed regions after prioritization;
    ``hint_only`` restricts it to the hinted region when the hint matches.
    """
    if not instruction or not instruction.strip():
        raise ValueError("instruction must be non-empty")
    rng = np.random.default_rng(seed)
    prioritizer = prioritizer or parser
    placements = list(scene.objects if placements is None else placements)
    navigator = navigator or Navigator(smap.costmap)
    if locations is None:
        locations = mission_locations(scene, smap, reach_radius=cfg.reach_radius)
    start = (float(scene.p0[0]), float(scene.p0[1]))
    m = Mission(instruction, start)
    state = start

    def finish(outcome):
        m.outcome = outcome
        m.log("end", outcome, state, visited=m.visited_regions, traveled=m.traveled)
        return m

    try:
        parsed = parser.parse_instruction(instruction)
        m.target, m.hint = parsed.target_object, parsed.region_hint
        m.log("parse", "ok", state, target=m.target, hint=m.hint)
        regions = list(smap.region_names)
        ordered = prioritizer.prioritize_regions(regions, m.target)
    except BackendError as exc:
        log.warning("backend failure: %s", exc)
        m.log("backend", "error", state, message=str(exc))
        return finish(BACKEND_ERROR)

    if m.hint is not None:
        if match_region(m.hint, ordered) is None:
            m.log("warning", "hint-unmatched", state, hint=m.hint)
        ordered = reprioritize(ordered, m.hint)
        if hint_only and match_region(m.hint, ordered) is not None:
            ordered = ordered[:1]
    if region_filter is not None:
        keep = {r.lower() for r in region_filter}
        ordered = [r for r in ordered if r.lower() in keep]
    m.regions = ordered
    m.log("prioritize", "ok", state, order=ordered)

    true_regions = {o.region for o in placements if o.category.lower() == m.target.lower()}
    m.first_region_correct = bool(ordered) and ordered[0] in true_regions

    visited = set()
    for region in ordered:
        for p in locations.get(region, []):
            p = (float(p[0]), float(p[1]))
            if p in visited:
                continue
            visited.add(p)
            try:
                state, dist, path = navigator.navigate(state, p)
            except PlanningError as exc:
                m.log("navigate", "no-path", state, region=region, target=list(p), message=str(exc))
                continue
            m.log("navigate", "ok", state, dist, region=region, target=list(p),
                  path=[list(c) for c in path.cells])
            if objects_near(placements, m.target, state, cfg.reach_radius):
                m.reached_object = True

            notes = []
            q = find_object(state, m.target, placements, cfg, rng, approver, notes)
            for kind, outcome, detail in notes:
                m.log(kind, outcome, state, region=region, **detail)
            if q is None:
                continue
            ok, attempts = pick(q, cfg, rng)
            for i in range(1, attempts + 1):
                m.log("pick-attempt", "success" if ok and i == attempts else "failure", state,
                      region=region, attempt=i, genuine=q.genuine)
            if not ok:
                continue
            m.picked = True
            try:
                state, dist, path = navigator.navigate(state, start)
            except PlanningError as exc:
                m.log("return", "no-path", state, message=str(exc))
                return finish(FAILURE)
            m.log("return", "ok", state, dist, target=list(start), path=[list(c) for c in path.cells])
            m.returned = True
            return finish(SUCCESS)
    return finish(FAILURE)
