"""Command line interface: explore, query, suite, inspect."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .bench import build_vlpg, run_suite
from .embedding import RemoteProvider, SyntheticProvider
from .geometry import FovSector
from .graph import Vlpg
from .localsearch import apply_cluster_views, init_probability_map, local_window
from .sim.task import TaskConfig, run_task, write_trace
from .sim.world import WorldModel
from .viewpoint import query_viewpoint


def load_config(path: str | None) -> TaskConfig:
    """TaskConfig with overrides from a JSON or TOML document.

    Sections (task, sensor, planner, search, viewpoint, explore) map onto
    the corresponding config dataclasses; unknown keys are an error.
    """
    config = TaskConfig()
    if path is None:
        return config
    p = Path(path)
    if p.suffix == ".toml":
        import tomllib

        doc = tomllib.loads(p.read_text())
    else:
        doc = json.loads(p.read_text())

    for section, values in doc.items():
        if section == "task":
            target = config
        else:
            target = getattr(config, section, None)
            if target is None or not dataclasses.is_dataclass(target):
                raise ValueError(f"unknown config section {section!r}")
        names = {f.name for f in dataclasses.fields(target)}
        for key, value in values.items():
            if key not in names:
                raise ValueError(f"unknown config key {section}.{key}")
            setattr(target, key, value)
    return config


def _provider(args):
    if getattr(args, "embed_endpoint", None):
        return RemoteProvider(args.embed_endpoint)
    return SyntheticProvider()


def cmd_explore(args) -> int:
    world = WorldModel.load(args.world)
    graph = build_vlpg(world, budget_s=args.budget)
    graph.save(args.out)
    result_info = {"nodes": len(graph), "out": str(args.out)}
    print(json.dumps(result_info))
    return 0


def cmd_query(args) -> int:
    world = WorldModel.load(args.world)
    graph = Vlpg.load(args.vlpg) if args.vlpg else None
    config = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_task(world, graph, args.object, args.mode, config,
                      seed=args.seed, provider=_provider(args),
                      scenario_id=args.object, snapshot_dir=out)
    write_trace(result, out / "trace.jsonl")
    print(json.dumps({
        "success": result.success, "reason": result.reason,
        "pixel_error": result.pixel_error,
        "delta_theta": result.delta_theta,
        "replans": result.replans_used, "sim_time": result.sim_time}))
    return 0 if result.success else 1


def cmd_suite(args) -> int:
    config = load_config(args.config)
    report = run_suite(args.suite, args.modes.split(","),
                       [int(s) for s in args.seeds.split(",")],
                       args.out, config, parallelism=args.parallelism)
    print(report.to_json())
    return 0


def cmd_inspect(args) -> int:
    world = WorldModel.load(args.world)
    graph = Vlpg.load(args.vlpg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vq = query_viewpoint(graph, args.object, _provider(args), world.grid)
    dump = {"object": args.object, "no_prior": vq.no_prior}
    if not vq.no_prior:
        dump["viewpoint"] = [vq.pose.x, vq.pose.y, vq.pose.theta]
        dump["cluster"] = [[p.x, p.y, p.theta] for p in vq.cluster.members]
        window = local_window(world.grid, vq.pose)
        pmap = init_probability_map(window)
        pmap = apply_cluster_views(pmap, vq.cluster,
                                   load_config(args.config).search)
        pmap.save_snapshot(out / "probability_map.png")
        window.save(out / "local_window.png")
    (out / "cluster.json").write_text(json.dumps(dump, indent=2))
    print(json.dumps(dump))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vlpgnav",
        description="Object navigation with visual-language pose graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explore", help="build a pose graph for a world")
    p.add_argument("--world", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=float, default=300.0)
    p.add_argument("--config")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("query", help="run a single object task")
    p.add_argument("object")
    p.add_argument("--world", required=True)
    p.add_argument("--vlpg")
    p.add_argument("--mode", default="full",
                   choices=["frontier", "vlpg", "vlpg+center", "full"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--out", default="run_out")
    p.add_argument("--embed-endpoint")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("suite", help="run the full ablation suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--modes", default="frontier,vlpg,vlpg+center,full")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--out", default="suite_out")
    p.add_argument("--config")
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("inspect", help="dump cluster and probability map")
    p.add_argument("object")
    p.add_argument("--world", required=True)
    p.add_argument("--vlpg", required=True)
    p.add_argument("--out", default="inspect_out")
    p.add_argument("--config")
    p.add_argument("--embed-endpoint")
    p.set_defaults(func=cmd_inspect)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
