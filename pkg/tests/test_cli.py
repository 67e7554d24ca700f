import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from relplan import io as rio
from relplan.cli import main
from relplan.identify import PreferenceMatrix
from relplan.plan import PlanSolution, RequirementSet
from relplan.resample import fit
from relplan.sim import table3
from relplan.vdg import ValueDependencyGraph

from conftest import TABLE2


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def prefs_csv(tmp_path):
    rng = np.random.default_rng(0)
    a = rng.random(50) < 0.5
    cells = np.c_[a, a, rng.random(50) < 0.4, ~a].astype(int)
    path = tmp_path / "prefs.csv"
    rio.write_preferences(path, PreferenceMatrix(cells))
    return str(path)


@pytest.fixture
def example3_files(tmp_path, example3_reqs):
    reqs = tmp_path / "reqs.csv"
    infl = tmp_path / "influence.csv"
    rio.write_requirements(reqs, example3_reqs)
    rio.write_matrix(infl, TABLE2)
    return str(reqs), str(infl)


class TestIo:
    def test_preferences_round_trip(self, tmp_path):
        p = PreferenceMatrix(np.array([[1, 0, 1], [0, 1, 1]]))
        rio.write_preferences(tmp_path / "p.csv", p, ["a", "b", "c"], ["u1", "u2"])
        back, names, users = rio.read_preferences(tmp_path / "p.csv")
        assert np.array_equal(back.cells, p.cells)
        assert names == ["a", "b", "c"] and users == ["u1", "u2"]

    def test_preferences_bad_cell_names_location(self, tmp_path):
        path = write(tmp_path / "p.csv", "user_id,r1,r2\n1,0,1\n2,1,x\n")
        with pytest.raises(rio.DataError, match=r"row 3, column 3 \(r2\)"):
            rio.read_preferences(path)

    def test_preferences_missing_header(self, tmp_path):
        with pytest.raises(rio.DataError, match="user_id"):
            rio.read_preferences(write(tmp_path / "p.csv", "1,0,1\n2,1,1\n"))

    def test_preferences_ragged_row(self, tmp_path):
        with pytest.raises(rio.DataError, match="row 2"):
            rio.read_preferences(write(tmp_path / "p.csv", "user_id,r1,r2\n1,0\n"))

    def test_requirements_round_trip(self, tmp_path):
        reqs = RequirementSet(np.array([1.5, 0.0]), np.array([3.0, 7.25]), ("x", "y"))
        rio.write_requirements(tmp_path / "r.csv", reqs)
        back = rio.read_requirements(tmp_path / "r.csv")
        assert back.ids == reqs.ids
        assert np.array_equal(back.cost, reqs.cost) and np.array_equal(back.value, reqs.value)

    @pytest.mark.parametrize("body", ["a,1,2\n", "id,cost,value\na,-1,2\n",
                                      "id,cost,value\na,one,2\n", "id,cost,value\na,1\n"])
    def test_requirements_invalid(self, tmp_path, body):
        with pytest.raises(rio.DataError):
            rio.read_requirements(write(tmp_path / "r.csv", body))

    def test_vdg_round_trip(self, tmp_path, example1):
        rio.write_vdg(tmp_path / "g.json", example1)
        assert rio.read_vdg(tmp_path / "g.json") == example1

    def test_vdg_invalid(self, tmp_path):
        with pytest.raises(rio.DataError):
            rio.read_vdg(write(tmp_path / "g.json", '{"n": 2, "edges": [{"from": 0}]}'))
        with pytest.raises(rio.DataError):
            rio.read_vdg(write(tmp_path / "g.json", "{not json"))

    def test_matrix_round_trip_is_exact(self, tmp_path):
        m = np.random.default_rng(1).uniform(-1, 1, (5, 5))
        rio.write_matrix(tmp_path / "m.csv", m)
        back, names = rio.read_matrix(tmp_path / "m.csv")
        assert np.array_equal(back, m) and names == ["r1", "r2", "r3", "r4", "r5"]

    def test_matrix_not_square(self, tmp_path):
        with pytest.raises(rio.DataError):
            rio.read_matrix(write(tmp_path / "m.csv", "id,r1,r2\nr1,0,0.5\n"))

    def test_model_round_trip(self, tmp_path):
        model = fit(PreferenceMatrix(np.array([[1, 0, 1], [0, 1, 1], [1, 1, 1], [0, 0, 1]])))
        rio.write_model(tmp_path / "m.json", model)
        back = rio.read_model(tmp_path / "m.json")
        assert back.to_json() == model.to_json()

    def test_intrinsic(self, tmp_path):
        deps = rio.read_intrinsic(write(tmp_path / "i.csv", "from,to,kind\n0,1,requires\n"))
        assert deps == [(0, 1, "requires")]
        with pytest.raises(rio.DataError):
            rio.read_intrinsic(write(tmp_path / "i.csv", "from,to,kind\na,1,requires\n"))


class TestIdentify:
    def test_outputs_and_manifest(self, tmp_path, prefs_csv):
        out = tmp_path / "o"
        assert main(["identify", prefs_csv, "--out-dir", str(out)]) == 0
        g = rio.read_vdg(out / "vdg.json")
        assert g.quality(0, 1).value == "+" and g.strength(0, 1) == 1.0
        infl, names = rio.read_matrix(out / "influence.csv")
        assert infl.shape == (4, 4) and names == ["r1", "r2", "r3", "r4"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "identify"
        assert manifest["parameters"]["membership"] == "identity"

    def test_independence_gives_empty_graph(self, tmp_path):
        path = write(tmp_path / "p.csv", "user_id,r1,r2\n1,1,1\n2,1,0\n3,0,1\n4,0,0\n")
        assert main(["identify", path, "--out-dir", str(tmp_path / "o")]) == 0
        assert json.loads((tmp_path / "o" / "vdg.json").read_text())["edges"] == []

    def test_hand_example(self, tmp_path):
        path = write(tmp_path / "p.csv", "user_id,r1,r2\n1,1,1\n2,1,1\n3,0,0\n4,0,0\n")
        assert main(["identify", path, "--out-dir", str(tmp_path / "o")]) == 0
        edges = json.loads((tmp_path / "o" / "vdg.json").read_text())["edges"]
        assert {"from": 0, "to": 1, "quality": "+", "strength": 1.0} in edges

    def test_missing_header_exit_2(self, tmp_path, capsys):
        path = write(tmp_path / "p.csv", "1,1,1\n2,0,0\n")
        assert main(["identify", path, "--out-dir", str(tmp_path / "o")]) == 2
        assert "row 1" in capsys.readouterr().err

    def test_degenerate_column_warns_exit_0(self, tmp_path, capsys):
        path = write(tmp_path / "p.csv", "user_id,r1,r2\n1,1,1\n2,0,1\n3,1,1\n")
        assert main(["identify", path, "--out-dir", str(tmp_path / "o")]) == 0
        assert "empty conditioning class" in capsys.readouterr().err

    def test_ramp_intrinsic_and_resampled_source(self, tmp_path, prefs_csv):
        intrinsic = write(tmp_path / "i.csv", "from,to,kind\n2,3,conflicts\n")
        args = ["identify", prefs_csv, "--membership", "ramp", "--intrinsic", intrinsic,
                "--source", "pooled", "--resample-m", "300", "--seed", "4"]
        assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
        g = rio.read_vdg(tmp_path / "a" / "vdg.json")
        assert g.quality(2, 3).value == "-" and g.strength(2, 3) == 1.0
        assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
        assert digest(tmp_path / "a" / "vdg.json") == digest(tmp_path / "b" / "vdg.json")

    def test_bad_ramp_exit_2(self, tmp_path, prefs_csv):
        assert main(["identify", prefs_csv, "--membership", "ramp", "--ramp-low", "0.9",
                     "--ramp-high", "0.1", "--out-dir", str(tmp_path)]) == 2


class TestResample:
    def test_outputs(self, tmp_path, prefs_csv):
        out = tmp_path / "o"
        assert main(["resample", prefs_csv, "--m", "123", "--seed", "1", "--out-dir", str(out)]) == 0
        samples, names, _ = rio.read_preferences(out / "samples.csv")
        assert samples.users == 123 and names == ["r1", "r2", "r3", "r4"]
        assert rio.read_model(out / "model.json").n == 4

    def test_default_size_is_ten_times_users(self, tmp_path, prefs_csv):
        assert main(["resample", prefs_csv, "--out-dir", str(tmp_path)]) == 0
        assert rio.read_preferences(tmp_path / "samples.csv")[0].users == 500

    def test_zero_m_exit_2(self, tmp_path, prefs_csv):
        assert main(["resample", prefs_csv, "--m", "0", "--out-dir", str(tmp_path)]) == 2

    def test_moments_large_sample(self, tmp_path):
        rng = np.random.default_rng(3)
        a = rng.random(40) < 0.3
        b = np.where(rng.random(40) < 0.75, a, ~a)
        path = tmp_path / "p.csv"
        rio.write_preferences(path, PreferenceMatrix(np.c_[a, b].astype(int)))
        assert main(["resample", str(path), "--m", "100000", "--out-dir", str(tmp_path / "o")]) == 0
        samples = rio.read_preferences(tmp_path / "o" / "samples.csv")[0].cells
        assert np.max(np.abs(samples.mean(axis=0) - np.c_[a, b].mean(axis=0))) < 0.01


class TestPlan:
    def test_example3(self, tmp_path, example3_files):
        reqs, infl = example3_files
        assert main(["plan", reqs, "--influence", infl, "--budget", "15",
                     "--out-dir", str(tmp_path)]) == 0
        sol = PlanSolution.from_json(json.loads((tmp_path / "solution.json").read_text()))
        assert list(sol.x) == [1, 1, 1, 0]
        assert sol.ov == pytest.approx(28, abs=1e-12) and sol.av == 80
        assert list(sol.penalties) == [0.7, 0.3, 0.7, 0.0]

    def test_table3_bkp(self, tmp_path):
        reqs = tmp_path / "reqs.csv"
        rio.write_requirements(reqs, table3())
        rio.write_vdg(tmp_path / "g.json", ValueDependencyGraph(27))
        assert main(["plan", str(reqs), "--vdg", str(tmp_path / "g.json"), "--model", "bkp",
                     "--budget", "222", "--out-dir", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "solution.json").read_text())["av"] == 312

    def test_zero_budget_positive_costs(self, tmp_path):
        reqs = write(tmp_path / "r.csv", "id,cost,value\na,1,5\nb,2,7\n")
        infl = write(tmp_path / "i.csv", "id,a,b\na,0,0.5\nb,-0.3,0\n")
        assert main(["plan", reqs, "--influence", infl, "--budget", "0",
                     "--out-dir", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "solution.json").read_text())
        assert doc["x"] == [0, 0] and doc["ov"] == doc["av"] == 0

    def test_budget_pct(self, tmp_path, example3_files):
        reqs, infl = example3_files
        assert main(["plan", reqs, "--influence", infl, "--budget-pct", "100",
                     "--out-dir", str(tmp_path)]) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["parameters"]["budget"] == 35

    def test_bkp_pc_with_vdg(self, tmp_path, example1):
        reqs = tmp_path / "r.csv"
        rio.write_requirements(reqs, RequirementSet(np.ones(4), np.array([5.0, 4.0, 3.0, 2.0])))
        rio.write_vdg(tmp_path / "g.json", example1)
        assert main(["plan", str(reqs), "--vdg", str(tmp_path / "g.json"), "--model", "bkp-pc",
                     "--budget", "4", "--out-dir", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "solution.json").read_text())
        assert doc["ov"] == doc["av"]

    def test_bkp_pc_needs_vdg(self, tmp_path, example3_files):
        reqs, infl = example3_files
        assert main(["plan", reqs, "--influence", infl, "--model", "bkp-pc", "--budget", "5",
                     "--out-dir", str(tmp_path)]) == 2

    def test_dimension_mismatch_exit_2(self, tmp_path, example3_files, capsys):
        _, infl = example3_files
        reqs = write(tmp_path / "r3.csv", "id,cost,value\na,1,1\nb,1,1\nc,1,1\n")
        assert main(["plan", reqs, "--influence", infl, "--budget", "2",
                     "--out-dir", str(tmp_path)]) == 2
        assert "requirements" in capsys.readouterr().err

    def test_missing_file_exit_2(self, tmp_path):
        assert main(["plan", str(tmp_path / "nope.csv"), "--influence", "x.csv", "--budget", "1",
                     "--out-dir", str(tmp_path)]) == 2

    def test_usage_error_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["plan", "r.csv", "--budget", "1"])
        assert exc.value.code == 2

    def test_time_limit_exit_3_writes_incumbent(self, tmp_path):
        rng = np.random.default_rng(0)
        n = 150
        rio.write_requirements(tmp_path / "r.csv", RequirementSet(
            rng.integers(1, 101, n).astype(float), rng.integers(1, 101, n).astype(float)))
        m = rng.uniform(-1, 1, (n, n)) * (rng.random((n, n)) < 0.1)
        np.fill_diagonal(m, 0)
        rio.write_matrix(tmp_path / "i.csv", m)
        code = main(["plan", str(tmp_path / "r.csv"), "--influence", str(tmp_path / "i.csv"),
                     "--budget-pct", "50", "--timeout-s", "0.2", "--out-dir", str(tmp_path)])
        assert code == 3
        doc = json.loads((tmp_path / "solution.json").read_text())
        assert doc["stats"]["proven"] is False and doc["feasible"] is True


class TestSimulateAndTiming:
    ARGS = ["--vdl-grid", "0,0.2", "--budget-grid", "0,50,100", "--trials", "3", "--seed", "2"]

    def test_grid_and_resume(self, tmp_path):
        out = tmp_path / "s"
        assert main(["simulate", *self.ARGS, "--out-dir", str(out)]) == 0
        lines = (out / "grid.csv").read_text().splitlines()
        assert lines[0] == "vdl,budget_pct,nvdl,model,metric,mean,trials"
        assert len(lines) == 1 + 2 * 3 * 3 * 4
        first = digest(out / "grid.csv")
        (out / "cells" / "1_1.json").unlink()
        assert main(["simulate", *self.ARGS, "--resume", "--out-dir", str(out)]) == 0
        assert digest(out / "grid.csv") == first

    def test_zero_vdl_models_agree(self, tmp_path):
        assert main(["simulate", "--vdl-grid", "0", "--budget-grid", "20,70", "--trials", "2",
                     "--out-dir", str(tmp_path)]) == 0
        rows = [r.split(",") for r in (tmp_path / "grid.csv").read_text().splitlines()[1:]]
        for b in ("20.0", "70.0"):
            avs = {r[5] for r in rows if r[1] == b and r[4] == "pct_av"}
            assert len(avs) == 1

    def test_custom_requirements_and_nvdl(self, tmp_path, example3_files):
        reqs, _ = example3_files
        assert main(["simulate", "--reqs", reqs, "--nvdl", "0.5", "--vdl-grid", "0.5",
                     "--budget-grid", "50", "--trials", "2", "--out-dir", str(tmp_path)]) == 0
        assert "0.5,50.0,0.5,da-srp" in (tmp_path / "grid.csv").read_text()

    def test_invalid_grid_exit_2(self, tmp_path):
        assert main(["simulate", "--vdl-grid", "1.5", "--out-dir", str(tmp_path)]) == 2
        assert main(["simulate", "--nvdl", "2", "--out-dir", str(tmp_path)]) == 2

    def test_timing(self, tmp_path):
        assert main(["timing", "--sizes", "1,8", "--out-dir", str(tmp_path)]) == 0
        lines = (tmp_path / "timing.csv").read_text().splitlines()
        assert lines[0] == "size,model,wall_time,nodes,proven,ov,av" and len(lines) == 7
        assert main(["timing", "--sizes", "0", "--out-dir", str(tmp_path)]) == 2

    def test_console_script(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "relplan.cli", "--version"],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.strip()
