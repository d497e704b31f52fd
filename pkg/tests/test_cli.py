import json
import os

import pytest

from moyal_m3 import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestVerifySubcommands:
    def test_verify_algebra_passes(self, capsys):
        code, out, _ = run(capsys, "verify-algebra")
        doc = json.loads(out)
        assert code == 0 and doc["passed"]
        assert all(c["verdict"] == "pass" for c in doc["checks"])
        assert all("anchor" in c for c in doc["checks"])

    def test_verify_covariance_solved(self, capsys):
        code, out, _ = run(capsys, "verify-covariance", "--lambda", "1/2")
        doc = json.loads(out)
        assert code == 0 and doc["passed"]
        solve = doc["config"]["solve"]
        assert solve["scale_vs_unit_coupling"] == "-1/2"
        assert solve["exactly_solvable"]
        outcomes = {o["pairing"]: o["consistent"]
                    for o in solve["pairing_outcomes"]}
        assert outcomes["chart(s1~x2, s2~x3)"] is False
        assert outcomes["covariant(s1~x2, s2~x1)"] is True

    def test_verify_covariance_verbatim_matrix_fails(self, capsys):
        code, out, _ = run(capsys, "verify-covariance", "--lambda", "1",
                           "--bivector", "eq29")
        doc = json.loads(out)
        assert code == 1 and not doc["passed"]

    def test_fourier_check(self, capsys):
        code, out, _ = run(capsys, "fourier-check", "--n", "64",
                           "--extent", "10")
        doc = json.loads(out)
        assert code == 0 and doc["passed"]

    def test_verify_polarization(self, capsys):
        code, out, _ = run(capsys, "verify-polarization", "--lambda", "2",
                           "--chi", "1/4,-1/3")
        doc = json.loads(out)
        assert code == 0 and doc["passed"]


class TestErrors:
    def test_nonpositive_radius_is_usage_error(self, capsys):
        code, _, err = run(capsys, "verify-rep", "--lambda", "0")
        assert code == 2
        assert "positive" in err

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as e:
            cli.main(["verify-algebra", "--bogus"])
        assert e.value.code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as e:
            cli.main(["frobnicate"])
        assert e.value.code == 2

    def test_bad_tolerance_value(self, capsys):
        code, _, err = run(capsys, "verify-algebra", "--tol.symbolic", "soft")
        assert code == 2 and "tolerance" in err

    def test_star_eval_parse_error(self, capsys):
        code, _, err = run(capsys, "star-eval", "s1 +", "t2")
        assert code == 2


class TestDeterminism:
    def test_identical_flags_identical_bytes(self, capsys):
        _, out1, _ = run(capsys, "verify-covariance", "--lambda", "1",
                         "--seed", "7")
        _, out2, _ = run(capsys, "verify-covariance", "--lambda", "1",
                         "--seed", "7")
        assert out1 == out2

    def test_timing_flag_adds_wall_time(self, capsys):
        _, out, _ = run(capsys, "verify-algebra", "--timing")
        assert "wall_time_seconds" in json.loads(out)

    def test_no_wall_time_by_default(self, capsys):
        _, out, _ = run(capsys, "verify-algebra")
        assert "wall_time_seconds" not in json.loads(out)


class TestOutputs:
    def test_out_csv_figures(self, capsys, tmp_path):
        out_json = tmp_path / "report.json"
        out_csv = tmp_path / "grid.csv"
        figdir = tmp_path / "figs"
        code, out, _ = run(capsys, "fourier-check", "--n", "64",
                           "--out", str(out_json), "--csv", str(out_csv),
                           "--figures", str(figdir))
        assert code == 0
        assert out == ""  # report went to the file
        doc = json.loads(out_json.read_text())
        assert doc["passed"]
        header = out_csv.read_text().splitlines()[0]
        assert header.split(",")[0] == "s1"
        pngs = sorted(os.listdir(figdir))
        assert any(p.endswith(".png") for p in pngs)

    def test_covariance_csv_rows(self, capsys, tmp_path):
        out_csv = tmp_path / "cov.csv"
        code, _, _ = run(capsys, "verify-covariance", "--lambda", "1",
                         "--csv", str(out_csv))
        assert code == 0
        lines = out_csv.read_text().splitlines()
        assert len(lines) == 1 + 36

    def test_tolerance_override_changes_verdict(self, capsys):
        # impossible tolerance forces a failure, proving the override lands
        code, out, _ = run(capsys, "fourier-check", "--n", "64",
                           "--tol.parseval=-1")
        doc = json.loads(out)
        assert code == 1
        bad = [c for c in doc["checks"] if c["name"] == "parseval"]
        assert bad and bad[0]["verdict"] == "fail"


class TestOrbitCommands:
    def test_classify(self, capsys):
        code, out, _ = run(capsys, "orbit", "classify", "--mu", "0,0,0",
                           "--alpha", "0,0,2")
        doc = json.loads(out)
        assert code == 0
        assert doc["kind"] == "cotangent-bundle" and doc["radius"] == 2.0

    def test_classify_sphere(self, capsys):
        code, out, _ = run(capsys, "orbit", "classify", "--mu", "3,4,0",
                           "--alpha", "0,0,0")
        doc = json.loads(out)
        assert doc["kind"] == "sphere" and doc["radius"] == 5.0

    def test_chart(self, capsys):
        code, out, _ = run(capsys, "orbit", "chart", "--lambda", "1/2",
                           "--point", "1,0,0,0")
        doc = json.loads(out)
        assert code == 0
        assert doc["dual_coefficients"] == ["0", "4", "0", "1/2", "0", "0"]


class TestStarEval:
    def test_prints_expansion_with_first_contraction(self, capsys):
        code, out, _ = run(capsys, "star-eval", "s1", "t2", "--lambda", "1")
        doc = json.loads(out)
        assert code == 0
        assert doc["exact"] and doc["order"] == 1
        assert doc["first_contraction"] == "1"
        assert "s1*t2" in doc["product"]

    def test_verbatim_matrix_option(self, capsys):
        code, out, _ = run(capsys, "star-eval", "s1", "t2",
                           "--bivector", "eq29")
        doc = json.loads(out)
        assert doc["first_contraction"] == "(-1)"
