import json

import pytest

from turnpike.cli import run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def result(capsys, *argv):
    code, out, err = call(capsys, *argv)
    assert code == 0, err
    doc = json.loads(out)
    assert doc["schema_version"] == 1
    assert doc["defaults"]["smallness_threshold"] == 0.05
    return doc["result"]


class TestExamples:
    def test_density_squares(self, capsys):
        r = result(capsys, "density", "--set", "squares", "--horizon", "10000", "--ideal", "density")
        assert r["score"] == pytest.approx(0.031, abs=5e-4)
        assert r["small"] is True

    def test_optimize_dense(self, capsys, tmp_path):
        out = tmp_path / "opt.json"
        code, _, err = call(
            capsys, "optimize", "--system", "dense_example", "--horizon", "10", "--method", "exhaustive", "-o", str(out)
        )
        assert code == 0, err
        r = json.loads(out.read_text())["result"]
        assert r["objective"] == pytest.approx(1 / 3, abs=1e-9)
        csv = (tmp_path / "opt.trajectory.csv").read_text().splitlines()
        assert csv[0] == "n,x1,phi,P"
        assert len(csv) == 11

    def test_verify_statistical(self, capsys):
        r = result(capsys, "verify", "statistical-not-fin", "--horizon", "10000")
        assert r["all_pass"] is True

    def test_verify_dense(self, capsys):
        assert result(capsys, "verify", "dense")["all_pass"] is True


class TestExitCodes:
    def test_domain_error(self, capsys):
        code, out, err = call(capsys, "verify", "nope")
        assert code == 1 and out == ""
        assert json.loads(err)["error"] == "invalid-argument"

    def test_resource_limit(self, capsys, monkeypatch):
        monkeypatch.setenv("TURNPIKE_CELL_BUDGET", "10")
        code, _, err = call(capsys, "cluster", "--sequence", "cantor", "--horizon", "1000")
        assert code == 1
        e = json.loads(err)
        assert e["error"] == "resource-limit" and e["limit_name"] == "cell budget"

    def test_search_budget(self, capsys):
        code, _, err = call(capsys, "optimize", "--system", "dense_example", "--horizon", "20", "--budget", "100")
        assert code == 1 and json.loads(err)["limit_name"] == "search budget"

    def test_unreadable_spec(self, capsys, tmp_path):
        code, _, err = call(capsys, "stationary", "--system", str(tmp_path / "missing.json"))
        assert code == 2 and json.loads(err)["error"] == "config-error"

    def test_bad_flag(self, capsys):
        assert call(capsys, "density", "--bogus")[0] == 2
        assert call(capsys)[0] == 2

    def test_strict_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"horizon": 500, "typo_eps": 0.1}))
        code, _, err = call(capsys, "density", "--set", "evens", "--config", str(cfg))
        assert code == 2 and "typo_eps" in err

    def test_config_supplies_values(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"horizon": 500, "ideal": "fin"}))
        r = result(capsys, "density", "--set", "evens", "--config", str(cfg))
        assert r["set"]["horizon"] == 500 and r["ideal"]["kind"] == "Fin"
        assert r["small"] is False

    def test_bad_system_key(self, capsys, tmp_path):
        spec = tmp_path / "s.json"
        spec.write_text(json.dumps({"builtin": "dense_example", "dleta": 0.05}))
        assert call(capsys, "simulate", "--system", str(spec))[0] == 2


class TestRoundTrip:
    def test_index_set(self, capsys, tmp_path):
        out = tmp_path / "d.json"
        assert call(capsys, "density", "--set", "dyadic", "--horizon", "3000", "-o", str(out))[0] == 0
        first = json.loads(out.read_text())["result"]
        second = result(capsys, "density", "--set-file", str(out))
        assert second["set"]["indices"] == first["set"]["indices"]
        assert second["score"] == first["score"]

    def test_sequence_csv(self, capsys, tmp_path):
        traj = tmp_path / "t.csv"
        assert call(capsys, "simulate", "--system", "cantor_shift", "--horizon", "2000", "--format", "csv", "-o", str(traj))[0] == 0
        a = result(capsys, "cluster", "--input", str(traj), "--ideal", "fin")
        b = result(capsys, "cluster", "--sequence", "cantor", "--horizon", "2000", "--ideal", "fin")
        assert a["representatives"] == b["representatives"]

    @pytest.mark.parametrize("command", ["simulate", "stationary", "optimize"])
    def test_system_spec(self, capsys, tmp_path, command):
        out = tmp_path / "r.json"
        extra = ["--horizon", "6"] if command != "stationary" else ["--grid-step", "0.01"]
        assert call(capsys, command, "--system", "dense_example", *extra, "-o", str(out))[0] == 0
        again = tmp_path / "again.json"
        assert call(capsys, command, "--system", str(out), *extra, "-o", str(again))[0] == 0
        a = json.loads(out.read_text())["result"]
        b = json.loads(again.read_text())["result"]
        assert a["system"] == b["system"]

    def test_tabulated_spec(self, capsys, tmp_path):
        spec = tmp_path / "s.json"
        spec.write_text(json.dumps({
            "control_points": [[0.0], [1.0]],
            "dynamics": {"piecewise_affine": {"breakpoints": [0.0, 1.0], "values": [[0.5, 0.5], [0.0, 1.0]]}},
            "phi": {"piecewise_affine": {"breakpoints": [0.0, 0.5, 1.0], "values": [0.0, 1.0, 0.0]}},
            "potential": {"linear": [1.0]},
            "state_box": [[0.0, 1.0]],
            "initial": [0.2],
        }))
        r = result(capsys, "stationary", "--system", str(spec), "--grid-step", "0.01")
        assert r["stationary"]["zeta_star"] == [pytest.approx(0.5)]


class TestDeterminism:
    @pytest.mark.parametrize(
        "argv",
        [
            ["density", "--set", "squares", "--horizon", "5000"],
            ["cluster", "--sequence", "alternating", "--horizon", "500"],
            ["simulate", "--system", "dense_example", "--controls", "1,1,0,1"],
            ["stationary", "--system", "dense_example", "--grid-step", "0.01", "--samples"],
            ["optimize", "--system", "dense_example", "--horizon", "8", "--turnpike"],
            ["verify", "dense"],
        ],
    )
    def test_repeat(self, capsys, argv):
        a = call(capsys, *argv)
        b = call(capsys, *argv)
        assert a[0] == 0 and a == b

    def test_csv_outputs(self, capsys):
        argv = ["optimize", "--system", "dense_example", "--horizon", "6", "--format", "csv"]
        code, out, _ = call(capsys, *argv)
        assert code == 0 and out.startswith("n,x1,phi,P\n")
        assert call(capsys, *argv)[1] == out
