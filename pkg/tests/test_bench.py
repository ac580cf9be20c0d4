"""Benchmark metric units, aggregation, and suite output determinism."""

import json
import math

import pytest

from vlpgnav.bench import (CSV_COLUMNS, DELTA_THETA_MAX, SuiteReport,
                           _seed_start, angular_error, run_suite, sae)
from vlpgnav.geometry import Pose2D
from vlpgnav.sim.explore import ExploreConfig
from vlpgnav.sim.task import ScenarioResult, TaskConfig


def result(success, delta_theta, mode="full", scenario="s", seed=0):
    return ScenarioResult(scenario, mode, success, None, delta_theta, 0,
                          "reason", seed, 0.0)


class TestSaeUnits:
    def test_perfect_run_scores_one(self):
        assert sae([result(1, 0.0)]) == pytest.approx(1.0, abs=1e-12)

    def test_failure_scores_zero(self):
        assert sae([result(0, 0.0)]) == pytest.approx(0.0, abs=1e-12)

    def test_max_angle_scores_inverse_e(self):
        assert sae([result(1, DELTA_THETA_MAX)]) == \
            pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_mean_over_runs(self):
        rs = [result(1, 0.0), result(0, 0.0), result(1, DELTA_THETA_MAX)]
        assert sae(rs) == pytest.approx((1.0 + 0.0 + math.exp(-1)) / 3,
                                        abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            sae([])

    def test_custom_max_angle(self):
        assert sae([result(1, 0.3)], delta_theta_max=0.3) == \
            pytest.approx(math.exp(-1.0), abs=1e-12)


class TestAngularError:
    def test_quarter_turn(self):
        assert angular_error(Pose2D(0, 0, 0), (1.0, 1.0)) == \
            pytest.approx(math.pi / 4, abs=1e-12)

    def test_behind(self):
        assert angular_error(Pose2D(0, 0, 0), (-2.0, 0.0)) == \
            pytest.approx(math.pi, abs=1e-12)

    def test_wraps_to_half_circle(self):
        err = angular_error(Pose2D(0, 0, 3.0), (1.0, -0.2))
        assert 0.0 <= err <= math.pi

    def test_coincident_rejected(self):
        with pytest.raises(ValueError):
            angular_error(Pose2D(1, 1, 0), (1.0, 1.0))


class TestSeedStart:
    def test_deterministic_and_distinct(self):
        base = Pose2D(5.0, 3.0, 0.5)
        assert _seed_start(base, 3) == _seed_start(base, 3)
        poses = {(_seed_start(base, s).x, _seed_start(base, s).y,
                  _seed_start(base, s).theta) for s in range(5)}
        assert len(poses) == 5

    def test_stays_near_base(self):
        base = Pose2D(5.0, 3.0, 0.5)
        for s in range(25):
            p = _seed_start(base, s)
            assert base.distance_to(p) < 0.5


def tiny_suite(tmp_path):
    world = {
        "name": "tiny",
        "grid": {"resolution": 0.1, "width_m": 6.0, "height_m": 6.0,
                 "origin": [0.0, 0.0], "border_wall": True},
        "walls": [],
        "objects": [{"label": "plant",
                     "polygon": [[4.4, 4.4], [4.8, 4.4],
                                 [4.8, 4.8], [4.4, 4.8]]}],
        "robot_start": [1.5, 1.5, 0.0],
    }
    suite = {"world": world,
             "scenarios": [{"id": "plant", "query": "plant"}]}
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(suite))
    return path


class TestRunSuite:
    def _config(self):
        return TaskConfig(timeout_s=40.0,
                          explore=ExploreConfig(budget_s=120.0))

    def test_outputs_and_byte_identical_reruns(self, tmp_path):
        suite = tiny_suite(tmp_path)
        config = self._config()
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            report = run_suite(suite, ["frontier", "vlpg"], [0, 1], out,
                               config=config, write_traces=False)
            outs.append(out)
            assert set(report.sae_by_mode) == {"frontier", "vlpg"}
            assert report.runs_by_mode == {"frontier": 2, "vlpg": 2}
        csv_a = (outs[0] / "results.csv").read_bytes()
        csv_b = (outs[1] / "results.csv").read_bytes()
        assert csv_a == csv_b
        header = csv_a.decode().splitlines()[0]
        assert header.split(",") == CSV_COLUMNS
        report_doc = json.loads((outs[0] / "report.json").read_text())
        assert "sae_by_mode" in report_doc

    def test_rejects_bad_modes(self, tmp_path):
        suite = tiny_suite(tmp_path)
        with pytest.raises(ValueError):
            run_suite(suite, [], [0], tmp_path / "x")
        with pytest.raises(ValueError):
            run_suite(suite, ["warp"], [0], tmp_path / "y")

    def test_report_round_trip(self):
        rep = SuiteReport({"full": 0.9}, {"full": 5}, {"full": 5},
                          {"full": 3.0}, {"full": 0.8}, wall_time_s=1.0)
        doc = json.loads(rep.to_json())
        assert doc["sae_by_mode"]["full"] == 0.9
