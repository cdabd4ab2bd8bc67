"""Command-line surface: output formats, exit codes and reproducibility."""

import json

import pytest
from click.testing import CliRunner

from conetest.commands import cli


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, *args):
    return runner.invoke(cli, ["--quiet", *args])


class TestProject:
    def test_named_cone(self, runner):
        result = _invoke(runner, "project", "--cone", "orthant", "--x", "1,-2,3")
        assert result.exit_code == 0, result.output
        payload = json.loads(result.stdout)
        assert payload["projection"] == [1.0, 0.0, 3.0]
        assert payload["cone"] == {"kind": "orthant", "dim": 3}

    def test_circular(self, runner):
        result = _invoke(runner, "project", "--cone", "circular", "--x", "0,3,4")
        assert result.exit_code == 0, result.output
        assert json.loads(result.stdout)["projection"] == pytest.approx([2.5, 1.5, 2.0])

    def test_cone_from_json(self, runner, tmp_path):
        path = tmp_path / "cone.json"
        path.write_text(json.dumps({"kind": "generator", "dim": 2, "generators": [[1.0, 1.0], [0.0, 1.0]]}))
        result = _invoke(runner, "project", "--cone-json", str(path), "--x", "-1,2")
        assert result.exit_code == 0, result.output
        assert json.loads(result.stdout)["projection"] == pytest.approx([0.5, 0.5], abs=1e-9)

    def test_needs_a_cone(self, runner):
        result = _invoke(runner, "project", "--x", "1,2")
        assert result.exit_code == 2
        assert '"config_error"' in result.output
        assert '"field": "cone"' in result.output


class TestConfigErrors:
    def test_bad_rho(self, runner):
        result = _invoke(runner, "radius", "--cone", "orthant", "--dims", "4", "--rho", "0.7")
        assert result.exit_code == 2
        assert '"field": "rho"' in result.output

    def test_bad_dims(self, runner):
        result = _invoke(runner, "geometry", "--dims", "four")
        assert result.exit_code == 2
        assert '"field": "dims"' in result.output

    def test_missing_config_file(self, runner, tmp_path):
        result = runner.invoke(cli, ["--quiet", "--config", str(tmp_path / "absent.yaml"),
                                     "experiment", "concentration"])
        assert result.exit_code == 2
        assert "Config file not found" in result.output

    def test_unknown_config_field(self, runner, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("dims: [4]\nreplicates: 10\n")
        result = runner.invoke(cli, ["--quiet", "--config", str(path), "experiment", "concentration"])
        assert result.exit_code == 2
        assert '"field": "replicates"' in result.output


class TestNumericalErrors:
    def test_invalid_prior_exits_3(self, runner):
        result = _invoke(runner, "lower-bound", "--prior", "monotone-fg", "--remainder", "last",
                         "--dims", "1000", "--n", "100", "--eps", "1")
        assert result.exit_code == 3
        assert '"numerical_error"' in result.output


class TestRuns:
    def test_geometry_json(self, runner):
        result = _invoke(runner, "experiment", "geometry-report", "--dims", "5,10", "--n", "200",
                         "--format", "json")
        assert result.exit_code == 0, result.output
        payload = json.loads(result.stdout)
        assert [row["d"] for row in payload["rows"]] == [5, 10]
        assert all(row["status"] == "ok" for row in payload["rows"])
        assert payload["metadata"]["config"]["n"] == 200
        assert "numpy" in payload["metadata"]["build"]

    def test_config_file_with_flag_override(self, runner, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("dims: [8]\nn: 300\ncone: monotone\n")
        result = runner.invoke(cli, ["--quiet", "--config", str(path), "experiment", "concentration",
                                     "--n", "250"])
        assert result.exit_code == 0, result.output
        header, *rows = result.stdout.strip().splitlines()
        assert header.startswith("cone,d,n,seed,mean")
        assert len(rows) == 3
        assert all(",250," in row for row in rows)

    def test_same_seed_same_output(self, runner):
        args = ("radius", "--cone", "orthant", "--dims", "4,9", "--n", "200", "--bisect-iters", "3",
                "--seed", "7")
        first = _invoke(runner, *args)
        second = _invoke(runner, *args)
        assert first.exit_code == 0, first.output
        assert first.stdout == second.stdout

    def test_workers_do_not_change_output(self, runner):
        args = ("geometry", "--cone", "circular", "--dims", "6", "--n", "600", "--seed", "11")
        one = _invoke(runner, *args, "--workers", "1")
        three = _invoke(runner, *args, "--workers", "3")
        assert one.exit_code == 0, one.output
        assert one.stdout == three.stdout

    def test_lower_bound_curve(self, runner):
        result = _invoke(runner, "lower-bound", "--prior", "orthant-sparse", "--dims", "64",
                         "--eps", "0,2,4", "--format", "json")
        assert result.exit_code == 0, result.output
        rows = json.loads(result.stdout)["rows"]
        assert [row["epsilon"] for row in rows] == [0.0, 2.0, 4.0]
        assert rows[0]["error_lb"] == 1.0
        assert all(row["simple_lb"] <= 1.0 for row in rows)
        metadata = json.loads(result.stdout)["metadata"]
        assert "numpy" in metadata["build"]
        assert metadata["wall_time_s"] >= 0

    def test_radius_columns(self, runner):
        result = _invoke(runner, "radius", "--cone", "orthant", "--dims", "4", "--n", "200", "--bisect-iters", "2",
                         "--format", "json")
        assert result.exit_code == 0, result.output
        [row] = json.loads(result.stdout)["rows"]
        assert row["bracket_lo"] <= row["radius_sq"] <= row["bracket_hi"]
        assert row["radius_sq_over_sqrt_d"] == pytest.approx(row["radius_sq"] / 2)

    def test_radius_error_curve(self, runner):
        result = _invoke(runner, "radius", "--cone", "orthant", "--dims", "4", "--n", "200", "--bisect-iters", "2",
                         "--seed", "3", "--curve")
        assert result.exit_code == 0, result.output
        header, *rows = result.stdout.strip().splitlines()
        assert header == "cone,d,sigma,rho,epsilon,type1,type2,total,threshold,seed,n,status"
        assert len(rows) >= 3
        epsilons = [float(row.split(",")[4]) for row in rows]
        assert epsilons == sorted(epsilons)
        assert all(row.startswith("orthant,4,1.0,0.1,") for row in rows)

    def test_writes_csv_with_metadata(self, runner, tmp_path):
        out = tmp_path / "geometry.csv"
        result = _invoke(runner, "geometry", "--cone", "orthant", "--dims", "4", "--n", "100",
                         "--out", str(out))
        assert result.exit_code == 0, result.output
        assert out.read_text().startswith("experiment,d,")
        assert json.loads((tmp_path / "geometry.csv.meta.json").read_text())["config"]["dims"] == [4]

    def test_product_columns(self, runner):
        result = _invoke(runner, "radius", "--cone", "product", "--dims", "6", "--n", "200", "--bisect-iters", "2",
                         "--format", "json")
        assert result.exit_code == 0, result.output
        [row] = json.loads(result.stdout)["rows"]
        assert row["ratio"] == pytest.approx(row["glr_radius_sq"] / row["trunc_radius_sq"])
        assert row["trunc_bracket_lo"] <= row["trunc_radius_sq"] <= row["trunc_bracket_hi"]

    def test_lower_bounds_report_block_structure(self, runner):
        result = _invoke(runner, "experiment", "lower-bounds", "--dims", "1000", "--n", "500", "--format", "json")
        assert result.exit_code == 0, result.output
        rows = {row["prior"]: row for row in json.loads(result.stdout)["rows"]}
        assert (rows["monotone-fg"]["m"], rows["monotone-fg"]["s"]) == (2, 1)
        assert rows["orthant-sparse"]["s"] == 31
        assert rows["orthant-sparse"]["method"] == "exact"
