import csv
import json

import numpy as np
import pytest

from mixedhk import ConfigurationError, OpinionState, ScheduleSpec, simulate
from mixedhk.cli import run_cli
from mixedhk.scenario import analyze_trajectory, csv_header, export_trajectory, load_scenario, load_trajectory


def write(tmp_path, data, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


MINIMAL = {
    "n": 2,
    "d": 1,
    "epsilon": 0.5,
    "horizon": 3,
    "initial_opinions": [[0.0], [0.5]],
    "schedule": {"kind": "synchronous"},
}


class TestLoadScenario:
    def test_minimal(self, tmp_path):
        sc = load_scenario(write(tmp_path, MINIMAL))
        assert sc.n == 2 and sc.schedule.kind == "synchronous"
        assert sc.initial_state().opinions.tolist() == [[0.0], [0.5]]

    def test_overlapping_partition(self, tmp_path):
        data = dict(MINIMAL, schedule={"kind": "stochastic_support", "support": [[0, 1], [1]], "probabilities": [0.5, 0.5], "partition_indices": [0, 1]})
        with pytest.raises(ConfigurationError, match="partition not disjoint"):
            load_scenario(write(tmp_path, data))

    def test_bad_probabilities(self, tmp_path):
        data = dict(MINIMAL, schedule={"kind": "stochastic_support", "support": [[0], [1]], "probabilities": [0.5, 0.4], "partition_indices": [0, 1]})
        with pytest.raises(ConfigurationError, match="schedule.probabilities"):
            load_scenario(write(tmp_path, data))

    @pytest.mark.parametrize(
        "patch, field",
        [
            ({"epsilon": -1}, "epsilon"),
            ({"horizon": 0}, "horizon"),
            ({"initial_opinions": [[0.0]]}, "initial_opinions"),
            ({"schedule": {"kind": "weird"}}, "schedule.kind"),
            ({"outputs": ["plots"]}, "outputs"),
        ],
    )
    def test_field_paths(self, tmp_path, patch, field):
        with pytest.raises(ConfigurationError) as exc:
            load_scenario(write(tmp_path, dict(MINIMAL, **patch)))
        assert exc.value.path == field

    def test_bad_json(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text("{not json")
        with pytest.raises(ConfigurationError):
            load_scenario(p)

    def test_generator_per_run(self, tmp_path):
        data = dict(MINIMAL, initial_opinions={"generator": "uniform-box", "low": 2.0, "high": 3.0, "seed": 4})
        sc = load_scenario(write(tmp_path, data))
        a, b = sc.initial_opinions(0), sc.initial_opinions(1)
        assert a.shape == (2, 1) and np.all((a >= 2) & (a <= 3))
        assert not np.array_equal(a, b)
        assert np.array_equal(a, sc.initial_opinions(0))


def short_run():
    spec = ScheduleSpec.singletons(3, open_alpha=(0.0, 0.7), seed=5)
    return simulate(OpinionState([0.0, 0.1, 0.25], 0.2), spec, 2)


class TestExport:
    def test_jsonl_lines(self, tmp_path):
        p = export_trajectory(short_run(), tmp_path / "t.jsonl")
        lines = p.read_text().splitlines()
        assert [json.loads(l)["t"] for l in lines] == [0, 1, 2]

    def test_csv_header(self):
        assert csv_header(2, 1) == ["t", "x_1_1", "x_2_1", "alpha_1", "alpha_2", "Z", "decrement", "nl8_bound", "merges"]

    def test_csv_round_trip(self, tmp_path):
        tr = short_run()
        p = export_trajectory(tr, tmp_path / "t.csv", "csv")
        with p.open() as fh:
            assert next(csv.reader(fh)) == csv_header(3, 1)
        back, rows = load_trajectory(p, epsilon=0.2)
        assert np.array_equal(back.states, tr.states) and np.array_equal(back.alphas, tr.alphas)
        assert analyze_trajectory(back, rows).ok

    def test_jsonl_round_trip_bitwise(self, tmp_path):
        tr = short_run()
        back, rows = load_trajectory(export_trajectory(tr, tmp_path / "t.jsonl"))
        assert np.array_equal(back.energies, tr.energies)
        assert np.array_equal(back.nl8_bounds, tr.nl8_bounds)
        assert analyze_trajectory(back, rows).ok

    def test_analyze_catches_tampering(self, tmp_path):
        p = export_trajectory(short_run(), tmp_path / "t.jsonl")
        lines = [json.loads(l) for l in p.read_text().splitlines()]
        lines[1]["opinions"][0][0] += 1e-3
        p.write_text("\n".join(json.dumps(l) for l in lines))
        back, rows = load_trajectory(p)
        assert not analyze_trajectory(back, rows).ok


class TestCli:
    def test_demo_merge(self, capsys):
        assert run_cli(["demo", "merge"]) == 0
        out = capsys.readouterr().out
        assert "x(0) = (0.0, 0.5)" in out
        assert "x(1) = (0.25, 0.25)" in out
        assert "merge event at t=1" in out

    @pytest.mark.parametrize("name", ["depart", "async-reduction", "no-termination"])
    def test_other_demos(self, name):
        assert run_cli(["demo", name]) == 0

    def test_run_consensus(self, tmp_path, capsys):
        data = dict(MINIMAL, initial_opinions=[[0.2], [0.2]], delta=0.01)
        assert run_cli(["run", str(write(tmp_path, data))]) == 0
        rep = json.loads(capsys.readouterr().out)["stopping_report"]
        assert rep["tau_delta"] == 0 and rep["termination_time"] == 0

    def test_run_then_analyze(self, tmp_path, capsys):
        data = dict(MINIMAL, n=4, initial_opinions=[[0.0], [0.2], [0.3], [0.9]], horizon=40, schedule={"kind": "asynchronous"})
        out = tmp_path / "traj.jsonl"
        assert run_cli(["run", str(write(tmp_path, data)), "--out", str(out)]) == 0
        capsys.readouterr()
        assert run_cli(["analyze", str(out)]) == 0
        assert json.loads(capsys.readouterr().out)["violations"] == 0

    def test_run_deterministic(self, tmp_path):
        data = dict(MINIMAL, n=3, initial_opinions=[[0.0], [0.2], [0.3]], horizon=30, schedule={"kind": "asynchronous"}, master_seed=9)
        sc = write(tmp_path, data)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run_cli(["run", str(sc), "--out", str(a)])
        run_cli(["run", str(sc), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_stop_on_termination(self, tmp_path, capsys):
        data = dict(MINIMAL, horizon=100)
        assert run_cli(["run", str(write(tmp_path, data)), "--stop-on-termination"]) == 0
        assert json.loads(capsys.readouterr().out)["steps"] == 1

    def test_mc(self, tmp_path, capsys):
        data = dict(MINIMAL, n=3, initial_opinions=[[0.0], [0.2], [0.3]], horizon=200, delta=0.01, schedule={"kind": "asynchronous"})
        csv_out = tmp_path / "mc.csv"
        assert run_cli(["mc", str(write(tmp_path, data)), "--runs", "8", "--csv", str(csv_out)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["runs"] == 8 and summary["reached_fraction"] == 1.0
        assert len(csv_out.read_text().splitlines()) == 9

    def test_usage_errors(self, tmp_path):
        assert run_cli(["bogus"]) != 0
        assert run_cli(["run", str(tmp_path / "missing.json")]) == 2
        bad = write(tmp_path, dict(MINIMAL, epsilon=0))
        assert run_cli(["run", str(bad)]) == 1
        assert run_cli(["mc", str(write(tmp_path, MINIMAL, "m.json")), "--runs", "2"]) == 1
