"""Benchmark harness: SAE metric, ablation suite runner, result output.

Suite files are JSON::

    {
      "world": "worlds/house2br.json",
      "scenarios": [
        {"id": "lamp", "query": "bedside lamp"},
        {"id": "oven_occluded", "query": "oven", "occlusion": true,
         "events": [{"at_time": 0.0, "action": "add_obstacle",
                     "polygon": [...]}]}
      ]
    }

Runs every scenario x mode x seed, writes one CSV row per run, a JSON
report with per-mode SAE, and per-run trace files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import SyntheticProvider
from .geometry import Pose2D, normalize_angle
from .graph import Vlpg
from .sim.explore import ExploreConfig, frontier_explore
from .sim.task import MODES, ScenarioResult, TaskConfig, run_task, write_trace
from .sim.world import WorldModel

DELTA_THETA_MAX = math.pi / 2  # 90 degrees

CSV_COLUMNS = ["scenario", "mode", "seed", "success", "pixel_error",
               "delta_theta_deg", "replans", "reason", "sim_time"]


def sae(results: list[ScenarioResult],
        delta_theta_max: float = DELTA_THETA_MAX) -> float:
    """Success-weighted angular error: mean of S_i * exp(-(dt/dt_max)^2)."""
    if not results:
        raise ValueError("results must be non-empty")
    total = 0.0
    for r in results:
        if r.success and r.delta_theta is not None:
            total += math.exp(-((r.delta_theta / delta_theta_max) ** 2))
    return total / len(results)


def angular_error(robot: Pose2D, object_centroid: tuple[float, float]) -> float:
    """|bearing(robot -> object) - heading|, wrapped to [0, pi]."""
    ox, oy = object_centroid
    if (ox, oy) == (robot.x, robot.y):
        raise ValueError("object centroid coincides with robot position")
    return abs(normalize_angle(math.atan2(oy - robot.y, ox - robot.x)
                               - robot.theta))


@dataclass
class SuiteReport:
    sae_by_mode: dict[str, float]
    success_by_mode: dict[str, int]
    runs_by_mode: dict[str, int]
    mean_pixel_error_by_mode: dict[str, float | None]
    occlusion_sae_by_mode: dict[str, float]
    wall_time_s: float = 0.0

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def _result_row(scenario_id: str, r: ScenarioResult) -> dict:
    return {
        "scenario": scenario_id,
        "mode": r.mode,
        "seed": r.seed,
        "success": r.success,
        "pixel_error": "" if r.pixel_error is None else int(r.pixel_error),
        "delta_theta_deg": ("" if r.delta_theta is None
                            else f"{math.degrees(r.delta_theta):.2f}"),
        "replans": r.replans_used,
        "reason": r.reason,
        "sim_time": f"{r.sim_time:.1f}",
    }


def _seed_start(base: Pose2D, seed: int) -> Pose2D:
    """Small deterministic per-seed start perturbation."""
    dx = ((seed % 5) - 2) * 0.08
    dy = (((seed // 5) % 5) - 2) * 0.08
    dth = ((seed % 7) - 3) * 0.15
    return Pose2D(base.x + dx, base.y + dy, base.theta + dth)


def build_vlpg(world: WorldModel, epsilon: float = 0.97,
               budget_s: float = 300.0) -> Vlpg:
    """Frontier-explore the pristine world and record the pose graph."""
    graph = Vlpg(insertion_epsilon=epsilon)
    pristine = world.copy(include_events=False)
    frontier_explore(pristine, graph=graph, provider=SyntheticProvider(),
                     config=ExploreConfig(budget_s=budget_s))
    return graph


def _run_one(args) -> tuple[str, ScenarioResult]:
    (world_doc, scenario, mode, seed, graph_path, config, trace_dir) = args
    world = WorldModel.from_dict(world_doc,
                                 extra_events=scenario.get("events"))
    world.robot_start = _seed_start(world.robot_start, seed)
    graph = Vlpg.load(graph_path) if graph_path and mode != "frontier" else None
    snapshot_dir = None
    if trace_dir is not None:
        snapshot_dir = Path(trace_dir) / f"{scenario['id']}_{mode}_{seed}"
    result = run_task(world, graph, scenario["query"], mode, config, seed,
                      scenario_id=scenario["id"], snapshot_dir=snapshot_dir)
    if trace_dir is not None:
        snapshot_dir.mkdir(parents=True, exist_ok=True)
        write_trace(result, snapshot_dir / "trace.jsonl")
    return scenario["id"], result


def run_suite(suite_path: str | Path, modes: list[str], seeds: list[int],
              out_dir: str | Path, config: TaskConfig | None = None,
              parallelism: int = 1,
              write_traces: bool = True) -> SuiteReport:
    """Execute the ablation and write CSV, report JSON, and traces."""
    if not modes:
        raise ValueError("mode list must be non-empty")
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r}")
    suite_path = Path(suite_path)
    suite = json.loads(suite_path.read_text())
    config = config or TaskConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    world_doc = json.loads((suite_path.parent / suite["world"]).read_text()) \
        if isinstance(suite["world"], str) else suite["world"]
    base_world = WorldModel.from_dict(world_doc)

    t0 = time.monotonic()
    graph_path = out_dir / "suite_vlpg.jsonl"
    needs_graph = any(m != "frontier" for m in modes)
    if needs_graph:
        graph = build_vlpg(base_world, budget_s=config.explore.budget_s)
        graph.save(graph_path)

    jobs = [(world_doc, scenario, mode, seed,
             str(graph_path) if needs_graph else None, config,
             str(out_dir / "traces") if write_traces else None)
            for scenario in suite["scenarios"]
            for mode in modes
            for seed in seeds]

    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(j) for j in jobs]

    results = [r for _, r in outcomes]
    rows = sorted((_result_row(sid, r) for sid, r in outcomes),
                  key=lambda row: (row["scenario"], row["mode"], row["seed"]))

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    (out_dir / "results.csv").write_text(buf.getvalue())

    occluded_ids = {s["id"] for s in suite["scenarios"] if s.get("occlusion")}
    report = _aggregate(results, occluded_ids, modes)
    report.wall_time_s = round(time.monotonic() - t0, 1)
    (out_dir / "report.json").write_text(report.to_json())
    return report


def _aggregate(results: list[ScenarioResult], occluded_ids: set[str],
               modes: list[str]) -> SuiteReport:
    sae_by_mode = {}
    success_by_mode = {}
    runs_by_mode = {}
    mean_px = {}
    occ_sae = {}
    for mode in modes:
        rs = [r for r in results if r.mode == mode]
        sae_by_mode[mode] = round(sae(rs), 4) if rs else 0.0
        success_by_mode[mode] = sum(r.success for r in rs)
        runs_by_mode[mode] = len(rs)
        px = [r.pixel_error for r in rs if r.pixel_error is not None and r.success]
        mean_px[mode] = round(float(np.mean(px)), 1) if px else None
        occ = [r for r in rs if r.scenario_id in occluded_ids]
        occ_sae[mode] = round(sae(occ), 4) if occ else 0.0
    return SuiteReport(sae_by_mode, success_by_mode, runs_by_mode, mean_px,
                       occ_sae)
