"""Command-line entry points.

    semovmm synth       --scene S --out DIR               render a synthetic survey dataset
    semovmm map-build   --manifest M --out DIR            build and save a semantic map
    semovmm run         --map DIR --instruction TEXT      run one fetch mission
    semovmm experiment  --map DIR --out DIR               run the experiment groups
    semovmm render      --map DIR --out IMG.ppm           draw the BEV layers (+ a trace)

Exit codes: 0 success, 1 usage, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .backend import BackendError, RemoteBackend
from .dataset import DatasetError, load_dataset, write_dataset
from .geometry import GeometryError
from .harness import DEFAULT_COUNTS, GROUPS, Experiment, HarnessError, run_experiment
from .mission import BACKEND_ERROR, DetectionSimConfig, run_mission
from .nav import Navigator
from .render import render_to_file
from .scene import SceneError, default_scene, load_scene
from .semantic_map import MapError, build_map, load_map, save_map
from .synthetic import DEFAULT_INTRINSICS, render_survey

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3

log = logging.getLogger("semovmm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _scene(args):
    return load_scene(args.scene) if args.scene else default_scene()


def _backend(args, scene):
    if args.backend == "remote":
        return RemoteBackend(base_url=args.endpoint)
    return scene.mock_backend()


def _config(args) -> DetectionSimConfig:
    return DetectionSimConfig(
        ovd_true_positive_rate=args.ovd_tp, ovd_false_positive_rate=args.ovd_fp,
        approver_true_accept_rate=args.approve_tp, approver_false_accept_rate=args.approve_fp,
        pick_success_rate=args.pick_rate, n_e=args.n_e,
    )


def _map(args, scene, backend):
    if args.map:
        return load_map(args.map)
    log.info("no --map given; mapping the scene from a synthetic survey")
    return build_map(DEFAULT_INTRINSICS, render_survey(scene), backend, scene.region_names,
                     bounds=scene.bounds, jobs=args.jobs)


def _parse_groups(text: str) -> dict:
    counts = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, n = item.partition("=")
        if name not in GROUPS:
            raise UsageError(f"unknown group {name!r}; choose from {', '.join(GROUPS)}")
        try:
            counts[name] = int(n) if sep else DEFAULT_COUNTS[name]
        except ValueError:
            raise UsageError(f"bad episode count in {item!r}") from None
        if counts[name] < 0:
            raise UsageError(f"negative episode count in {item!r}")
    return counts


# -- commands ---------------------------------------------------------------------

def cmd_synth(args) -> int:
    scene = _scene(args)
    path = write_dataset(args.out, DEFAULT_INTRINSICS, render_survey(scene))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_map_build(args) -> int:
    scene = _scene(args)
    intrinsics, keyframes = load_dataset(args.manifest)
    candidates = [c.strip() for c in args.candidates.split(",")] if args.candidates else scene.region_names
    smap = build_map(intrinsics, keyframes, _backend(args, scene), candidates,
                     bounds=scene.bounds, voxel=args.voxel, cell=args.cell, jobs=args.jobs)
    save_map(smap, args.out)
    names = smap.region_names
    print(f"instances: {len(smap.instances)}")
    print(f"regions: {len(names)} ({', '.join(names)})")
    print(f"map written to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    scene = _scene(args)
    backend = _backend(args, scene)
    smap = _map(args, scene, backend)
    cfg = _config(args)
    m = run_mission(scene, smap, args.instruction, backend, cfg=cfg, seed=args.seed,
                    navigator=Navigator(smap.costmap), hint_only=args.hint_only)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(m.to_jsonl())
    print(f"target: {m.target}  hint: {m.hint}")
    print(f"priority: {' > '.join(m.regions)}")
    print(f"visited: {' > '.join(m.visited_regions) or '-'}")
    print(f"traveled: {m.traveled:.3f} m")
    print(f"outcome: {m.outcome}")
    return EXIT_BACKEND if m.outcome == BACKEND_ERROR else EXIT_OK


def cmd_experiment(args) -> int:
    scene = _scene(args)
    backend = _backend(args, scene)
    counts = _parse_groups(args.groups) if args.groups else dict(DEFAULT_COUNTS)
    smap = _map(args, scene, backend)
    exp = Experiment(scene, smap, _config(args), backend)
    report = run_experiment(scene, counts, seed=args.seed, jobs=args.jobs, experiment=exp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "report.txt").write_text(report.to_text())
    (out / "episodes.jsonl").write_text(
        "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in report.results))
    print(report.to_text(), end="")
    print(f"{len(report.results)} episodes; reports written to {out}")
    errors = sum(m.backend_errors for m in report.groups.values())
    if errors:
        print(f"warning: {errors} episodes ended with a backend error", file=sys.stderr)
    return EXIT_OK


def cmd_render(args) -> int:
    smap = load_map(args.map)
    if smap.regions is None:
        raise MapError(f"map {args.map} has no region layer")
    trace = None
    if args.trace:
        trace = [json.loads(line) for line in Path(args.trace).read_text().splitlines() if line.strip()]
    path = render_to_file(smap, args.out, trace, args.scale)
    print(f"wrote {path}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------

def _add_backend(p):
    p.add_argument("--backend", choices=("mock", "remote"), default="mock")
    p.add_argument("--endpoint", help="chat-completion base URL (default: $SEMOVMM_API_BASE)")


def _add_rates(p):
    p.add_argument("--ovd-tp", type=float, default=1.0, help="detector true-positive rate")
    p.add_argument("--ovd-fp", type=float, default=0.0, help="detector false-positive rate")
    p.add_argument("--approve-tp", type=float, default=1.0, help="approver true-accept rate")
    p.add_argument("--approve-fp", type=float, default=0.0, help="approver false-accept rate")
    p.add_argument("--pick-rate", type=float, default=1.0, help="per-trial grasp success rate")
    p.add_argument("--n-e", type=int, default=3, help="grasp trials per location")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semovmm", description="Semantic maps and fetch missions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="render a synthetic key-frame dataset of a scene")
    p.add_argument("--scene")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("map-build", help="build a semantic map from a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scene", help="scene file (bounds, candidates, mock affinities)")
    p.add_argument("--candidates", help="comma-separated region candidates (default: scene regions)")
    p.add_argument("--voxel", type=float, default=0.02)
    p.add_argument("--cell", type=float, default=0.05)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_backend(p)
    p.set_defaults(func=cmd_map_build)

    p = sub.add_parser("run", help="run one fetch mission")
    p.add_argument("--scene")
    p.add_argument("--map", help="map directory (default: map the scene on the fly)")
    p.add_argument("--instruction", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--hint-only", action="store_true", help="search only the hinted region")
    p.add_argument("--out", help="trace file (JSON lines)")
    _add_backend(p)
    _add_rates(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="run the experiment groups and write reports")
    p.add_argument("--scene")
    p.add_argument("--map")
    p.add_argument("--groups", help="e.g. 'NoHint=45,Random=3000' (default: 45/30/30/15/15)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_backend(p)
    _add_rates(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("render", help="draw the map (and optionally a trace) as a PPM image")
    p.add_argument("--map", required=True)
    p.add_argument("--trace")
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"semovmm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"semovmm: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (DatasetError, SceneError, MapError, GeometryError, HarnessError, OSError, ValueError) as exc:
        print(f"semovmm: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
