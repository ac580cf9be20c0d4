"""Deterministic 2D household simulator and task orchestrator."""

from .explore import ExploreConfig, ExploreResult, WaypointFollower, frontier_explore
from .planner import PlanningError, plan_global_path
from .sensors import Detection, SensorConfig, observe, render_detection
from .task import MODES, ScenarioResult, TaskConfig, run_task, write_trace
from .world import Event, ObjectInstance, RobotState, WorldModel, step

__all__ = [
    "Detection", "Event", "ExploreConfig", "ExploreResult", "MODES",
    "ObjectInstance", "PlanningError", "RobotState", "ScenarioResult",
    "SensorConfig", "TaskConfig", "WaypointFollower", "WorldModel",
    "frontier_explore", "observe", "plan_global_path", "render_detection",
    "run_task", "step", "write_trace",
]
