import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.io

from sclab.cli import main
from sclab.fixtures import get_fixture
from sclab.meshspec import MeshSpec

PI_BOX = {"box": [[0.0, 0.0], [float(np.pi), float(np.pi)]]}


@pytest.fixture
def spec_file(tmp_path):
    def make(spec):
        p = tmp_path / ("%s.json" % (spec.name or "spec"))
        p.write_text(spec.to_json())
        return str(p)
    return make


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


class TestCheck:
    def test_empty_refinement_is_exact(self, capsys, spec_file):
        path = spec_file(MeshSpec([3, 3], [6, 6], levels=[{"refined_elements": []}], name="empty"))
        code, out = run(capsys, ["check", path])
        rep = json.loads(out)
        assert code == 0
        assert rep["exact"] and rep["verdict"] == "exact"
        assert rep["assumption_support"]["ok"] and rep["assumption_overlap"]["ok"]
        assert rep["spec_hash"] == MeshSpec([3, 3], [6, 6], levels=[{"refined_elements": []}], name="empty").hash

    def test_counterexample(self, capsys, spec_file):
        code, out = run(capsys, ["check", spec_file(get_fixture("counterexample"))])
        rep = json.loads(out)
        assert code == 1
        assert rep["dims"] == [147, 328, 181] and rep["verdict"] == "not exact"
        assert rep["dd_probe_max"] < 1e-12

    def test_assumption_c(self, capsys):
        code, out = run(capsys, ["check", "--fixture", "assumption_c", "--strict"])
        rep = json.loads(out)
        assert code == 0 and rep["exact"]
        assert rep["assumption_support"]["ok"] and rep["assumption_overlap"]["ok"]

    def test_strict_flags_assumption_failure(self, capsys):
        # exact, but the overlap condition fails
        assert run(capsys, ["check", "--fixture", "maxwell_diag_1x1"])[0] == 0
        assert run(capsys, ["check", "--fixture", "maxwell_diag_1x1", "--strict"])[0] == 1

    def test_report_file_and_seed(self, capsys, tmp_path):
        rpt = tmp_path / "r.json"
        code, out = run(capsys, ["--seed", "5", "check", "--fixture", "assumption_c", "--report", str(rpt)])
        a, b = json.loads(out), json.loads(rpt.read_text())
        assert a["seed"] == b["seed"] == 5
        assert run(capsys, ["check", "--fixture", "assumption_c", "--seed", "9"])[1].count('"seed": 9') == 1

    def test_float_rank_method(self, capsys):
        code, out = run(capsys, ["check", "--fixture", "counterexample", "--rank-method", "float"])
        assert code == 1 and json.loads(out)["dims"] == [147, 328, 181]


class TestInfo:
    def test_single_level(self, capsys, spec_file):
        code, out = run(capsys, ["info", spec_file(MeshSpec([2, 2], [4, 4], name="single"))])
        rep = json.loads(out)
        assert code == 0
        assert rep["dims"] == [16, 40, 25] and rep["levels"] == 1
        assert rep["dim_identity"]["holds"]

    def test_two_level_identity(self, capsys):
        rep = json.loads(run(capsys, ["info", "--fixture", "counterexample"])[1])
        assert rep["dim_identity"] == {"lhs": 328, "rhs": 329, "holds": False}
        assert sum(rep["active_counts"]["0"]) == 147

    def test_emit_spec_round_trip(self, capsys):
        out = run(capsys, ["info", "--fixture", "stokes_graded_4levels", "--emit-spec"])[1]
        assert MeshSpec(**json.loads(out)) == get_fixture("stokes_graded_4levels")


class TestSolve:
    def test_maxwell_outputs(self, capsys, spec_file, tmp_path):
        path = spec_file(MeshSpec([4, 4], [8, 8], geometry=PI_BOX, name="uniform8"))
        out_dir = tmp_path / "out"
        code, out = run(capsys, ["solve", path, "--problem", "maxwell", "--nev", "10", "--out", str(out_dir),
                                 "--dump-matrices"])
        assert code == 0
        summary = json.loads(out)
        assert summary == json.loads((out_dir / "summary.json").read_text())
        assert summary["analytic_match"]["spurious_free"]
        assert summary["analytic_max_rel_error"] < 1e-5
        with open(out_dir / "spectrum.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["index", "lambda"] and len(rows) == 11
        np.testing.assert_allclose([float(r[1]) for r in rows[1:]], [1, 1, 2, 4, 4, 5, 5, 8, 9, 9], rtol=1e-5)
        K = scipy.io.mmread(str(out_dir / "curl_curl.mtx"))
        M = scipy.io.mmread(str(out_dir / "mass_1.mtx"))
        assert K.shape == M.shape == (summary["dim"],) * 2
        assert b"\r\n" not in (out_dir / "spectrum.csv").read_bytes()

    def test_csv_to_stdout(self, capsys):
        code, out = run(capsys, ["solve", "--fixture", "stokes_uniform", "--problem", "infsup", "--csv", "-",
                                 "--nev", "3"])
        rows = list(csv.reader(out.splitlines()))
        assert code == 0 and len(rows) == 4
        assert np.sqrt(float(rows[1][1])) == pytest.approx(0.40996, abs=1e-3)

    def test_infsup_summary(self, capsys):
        rep = json.loads(run(capsys, ["solve", "--fixture", "stokes_uniform", "--problem", "infsup"])[1])
        assert rep["beta"] == pytest.approx(0.40996, abs=1e-3)
        assert rep["spec_hash"] == get_fixture("stokes_uniform").hash

    def test_mixed1_zero_count(self, capsys):
        rep = json.loads(run(capsys, ["solve", "--fixture", "maxwell_diag_2x2", "--problem", "maxwell-mixed1",
                                      "--nev", "5"])[1])
        assert rep["zero_count"] == 4

    def test_residual_failure_exit(self, capsys):
        code, _ = run(capsys, ["solve", "--fixture", "counterexample", "--residual-tol", "0"])
        assert code == 3


class TestUsage:
    @pytest.mark.parametrize("argv", [
        [],
        ["frobnicate"],
        ["check"],
        ["check", "/nonexistent/spec.json"],
        ["solve", "--fixture", "counterexample", "--problem", "heat"],
        ["solve", "--fixture", "counterexample", "--dump-matrices"],
        ["check", "--fixture", "nope"],
    ])
    def test_exit_2(self, capsys, argv):
        assert main(argv) == 2

    def test_both_spec_and_fixture(self, capsys, spec_file):
        assert main(["check", spec_file(get_fixture("assumption_c")), "--fixture", "assumption_c"]) == 2

    def test_schema_error(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"degrees": [3, 3], "base_elements": [4, -1]}')
        assert main(["check", str(p)]) == 2
        assert "base_elements/1" in capsys.readouterr().err

    def test_solve_needs_2d(self, capsys, spec_file):
        assert main(["solve", spec_file(MeshSpec([2, 2, 2], [2, 2, 2], name="cube"))]) == 2

    def test_check_3d_tensor(self, capsys, spec_file):
        code, out = run(capsys, ["check", spec_file(MeshSpec([2, 2, 2], [2, 2, 2], name="cube"))])
        assert code == 0 and json.loads(out)["cohomology_dims"] == [0, 0, 0, 1]

    def test_version(self, capsys):
        assert main(["--version"]) == 0


def test_subprocess_with_thread_cap(tmp_path):
    env = dict(os.environ, SCLAB_THREADS="1")
    code = ("import os, sclab.cli; print(os.environ['OPENBLAS_NUM_THREADS'], os.environ['OMP_NUM_THREADS'])")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["1", "1"]
    r = subprocess.run([sys.executable, "-m", "sclab", "check", "--fixture", "counterexample"], env=env,
                       capture_output=True, text=True)
    assert r.returncode == 1 and json.loads(r.stdout)["dims"] == [147, 328, 181]
