import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from treedist.cli import run
from treedist.io import load_dendrogram, load_matrix
from treedist.trees import validate

FIXTURES = Path(__file__).parent / "fixtures"


def call(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def two_basin_trees(tmp_path, capsys):
    paths = []
    for name in ("f", "g"):
        out = tmp_path / f"{name}.json"
        code, _, _ = call(capsys, "build-field", FIXTURES / f"two_basins_{name}.csv", "--theta", "L", "--truncate", 1.3, "--out", out)
        assert code == 0
        paths.append(out)
    return paths


class TestBuild:
    def test_build_field_two_basin_distance(self, two_basin_trees, capsys, tmp_path):
        f, g = two_basin_trees
        code, out, _ = call(capsys, "distance", f, g, "--plan", tmp_path / "plan.json")
        assert code == 0 and float(out) <= 0.9 + 1e-9
        plan = json.loads((tmp_path / "plan.json").read_text())
        assert plan["format_version"] == 1 and len(plan["matched_chains"]) == 2

    def test_build_field_unit_to_stdout(self, capsys):
        code, out, _ = call(capsys, "build-field", FIXTURES / "two_basins_f.csv", "--theta", "1", "--truncate", 2)
        assert code == 0 and json.loads(out)["format_version"] == 1

    def test_build_cloud(self, capsys, tmp_path):
        out = tmp_path / "c.json"
        code, _, _ = call(capsys, "build-cloud", FIXTURES / "three_points.csv", "--truncate", 3, "--out", out)
        assert code == 0
        d = load_dendrogram(out)
        assert sorted(w.norm for w in d.weights.values()) == [1.0, 1.0, 2.0, 2.0, 3.0]
        code, _, _ = call(capsys, "build-cloud", FIXTURES / "three_points.csv", "--theta", "1", "--normalize", "--out", out)
        assert code == 0

    def test_decorate(self, capsys, tmp_path):
        tree = FIXTURES / "three_points_unit.json"
        code, out, _ = call(capsys, "decorate", tree, "--truncate", 3)
        assert code == 0
        betti = tmp_path / "b.json"
        code, _, _ = call(capsys, "decorate", tree, "--theta", "betti", "--betti", FIXTURES / "betti.json", "--truncate", 3, "--out", betti)
        assert code == 0 and load_dendrogram(betti).channels == 2
        code, _, err = call(capsys, "decorate", tree, "--theta", "betti")
        assert code == 2 and "--betti" in err

    def test_truncate_and_prune(self, capsys, tmp_path, two_basin_trees):
        f, _ = two_basin_trees
        code, _, _ = call(capsys, "truncate", f, 1.2, "--out", tmp_path / "t.json")
        assert code == 0 and validate(load_dendrogram(tmp_path / "t.json")) == []
        code, _, err = call(capsys, "prune", FIXTURES / "three_points_unit.json", "--prune-eps", 1.5, "--seed", 3, "--out", tmp_path / "p.json")
        report = json.loads(err)
        # one unit leaf goes; its sibling absorbs the parent edge and reaches norm 2
        assert code == 0 and len(report["removed_leaves"]) == 1
        code, _, err = call(capsys, "prune", FIXTURES / "three_points_unit.json", "--prune-target-pe", 0.2)
        assert code == 0 and 0 < json.loads(err.splitlines()[-1])["pruning_error"]


class TestDistanceAndMatrix:
    def test_identical_files(self, capsys, two_basin_trees):
        f, _ = two_basin_trees
        code, out, _ = call(capsys, "distance", f, f)
        assert code == 0 and out.strip() == "0.0"

    def test_matrix_and_correlate(self, capsys, tmp_path, two_basin_trees):
        folder = tmp_path / "trees"
        folder.mkdir()
        for p in two_basin_trees:
            shutil.copy(p, folder / p.name)
        code, _, _ = call(capsys, "build-cloud", FIXTURES / "three_points.csv", "--theta", "1", "--truncate", 3, "--out", folder / "h.json")
        code, _, _ = call(capsys, "matrix", folder, "--jobs", 2, "--out", tmp_path / "m.csv", "--svg", tmp_path / "m.svg")
        assert code == 0
        m = load_matrix(tmp_path / "m.csv")
        assert m.labels == ("f", "g", "h")
        assert np.allclose(m.values, m.values.T, atol=1e-9, rtol=0)
        assert (tmp_path / "m.svg").read_text().startswith("<svg")
        code, out, _ = call(capsys, "correlate", tmp_path / "m.csv", tmp_path / "m.csv")
        assert code == 0 and float(out) == pytest.approx(1.0)
        code, out, _ = call(capsys, "matrix", folder)
        assert code == 0 and out.startswith("f,0.0,")


class TestSimulations:
    def test_simulate_clusters(self, capsys, tmp_path):
        code, out, _ = call(capsys, "simulate-clusters", "--n-clouds", 3, "--n-points", 10, "--out-dir", tmp_path)
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary == json.loads(out)
        assert (tmp_path / "clusters_matrix.csv").exists() and (tmp_path / "clusters_matrix.svg").exists()

    def test_simulate_sines(self, capsys, tmp_path):
        code, out, _ = call(capsys, "simulate-sines", "--n-units", 4, "--grid-step", 0.5, "--out-dir", tmp_path)
        assert code == 0 and -1 <= json.loads(out)["dendrogram_vs_warping"] <= 1
        assert len(list(tmp_path.glob("sines_*.csv"))) == 3

    def test_check_axioms(self, capsys):
        code, out, _ = call(capsys, "check-axioms", "--samples", 8)
        report = json.loads(out)
        assert code == 0 and report["max_violation"] <= 1e-9
        assert all(v is True for k, v in report.items() if k.endswith("_ok"))


class TestFailures:
    def test_schema_violation_exit_2(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"format_version": 1, "root": "r", "vertices": [{"id": "a"}], "edges": [{"child": "a", "parent": "x", "weight": {"channels": 1, "pieces": []}}]}))
        code, _, err = call(capsys, "distance", bad, bad)
        assert code == 2 and "edges[0].parent" in err and err.count("\n") == 1

    def test_validation_lists_violations(self, capsys, tmp_path):
        d = json.loads((FIXTURES / "three_points_unit.json").read_text())
        for e in d["edges"]:
            e["weight"]["pieces"][0]["start"] = -5.0
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(d))
        code, _, err = call(capsys, "truncate", bad, 3)
        assert code == 2 and "support exceeds edge span" in err

    def test_missing_file_exit_1(self, capsys, tmp_path):
        code, _, err = call(capsys, "distance", tmp_path / "nope.json", tmp_path / "nope.json")
        assert code == 1 and "nope.json" in err

    def test_malformed_csv_exit_2(self, capsys, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("x,y\n0,1\n1,oops\n")
        code, _, err = call(capsys, "build-field", p)
        assert code == 2 and "line 2" in err

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            run(["distance", "--bogus"])
        assert exc.value.code == 2

    def test_console_script(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "treedist.cli", "distance", FIXTURES / "three_points_unit.json", FIXTURES / "three_points_unit.json"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0 and proc.stdout.strip() == "0.0"
