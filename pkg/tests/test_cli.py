import json
import math

import pytest

from persistx import cli


def run(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestParsing:
    def test_missing_flag_value_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["simulate", "--coeffs"])
        assert exc.value.code == 2

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_model_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["simulate", "--coeffs", "0.5"])
        assert exc.value.code == 2

    def test_innovation_grammar(self):
        assert cli.parse_innovation("uniform:-1,1").lo == -1.0
        assert cli.parse_innovation("gaussian:2").sd == 2.0
        assert cli.parse_innovation("exponential").kind == "exponential"
        assert cli.parse_innovation("rademacher").kind == "rademacher"
        for bad in ("uniform:1", "gaussian:1,2", "exponential:3", "cauchy:1"):
            with pytest.raises(ValueError):
                cli.parse_innovation(bad)

    def test_bad_innovation_is_computation_failure(self, capsys):
        code, out, err = run(capsys, [
            "simulate", "--process", "ar", "--coeffs", "0.5",
            "--innovation", "cauchy:1", "--n", "2", "--reps", "100"])
        assert code == 1
        assert "cauchy" in err


class TestOracleCommand:
    def test_ma1_exponential_value(self, capsys):
        code, out, _ = run(capsys, ["oracle", "--case", "ma1-exponential", "--a1", "-0.5"])
        assert code == 0
        payload = json.loads(out)
        assert payload["exponent"] == 0.5

    def test_ar1_uniform(self, capsys):
        code, out, _ = run(capsys, ["oracle", "--case", "ar1-uniform", "--a", "1", "--b", "1"])
        payload = json.loads(out)
        assert payload["exponent"] == pytest.approx(1.0 / math.pi)

    def test_rademacher_table(self, capsys):
        code, out, _ = run(capsys, ["oracle", "--case", "rademacher",
                                    "--convention", "gt", "--n", "3"])
        payload = json.loads(out)
        assert payload["exponent"] == 0.5
        assert payload["pn"][1]["p"] == pytest.approx(0.125)

    def test_supercritical_root(self, capsys):
        code, out, _ = run(capsys, ["oracle", "--case", "supercritical-ar",
                                    "--coeffs", "1.2"])
        payload = json.loads(out)
        assert payload["characteristic_root"] == 1.2
        assert payload["exponent"] == 1.0

    def test_ar1_exponential_pn_table(self, capsys):
        code, out, _ = run(capsys, ["oracle", "--case", "ar1-exponential",
                                    "--a1", "-1.0", "--initial", "point:0", "--n", "3"])
        payload = json.loads(out)
        assert payload["pn"][0] == {"n": 1, "p": 1.0}
        assert payload["pn"][1]["p"] == pytest.approx(0.5)

    def test_domain_error_exits_one(self, capsys):
        code, _, err = run(capsys, ["oracle", "--case", "ma1-exponential", "--a1", "0.5"])
        assert code == 1 and "a1" in err


class TestSimulateCommand:
    def test_small_run_payload(self, capsys):
        code, out, _ = run(capsys, [
            "simulate", "--process", "ar", "--coeffs", "0.0",
            "--innovation", "uniform:-1,1", "--n", "4", "--reps", "20000", "--seed", "1"])
        assert code == 0
        payload = json.loads(out)
        assert len(payload["estimate"]["table"]) == 5
        assert payload["estimate"]["lambda_hat"] == pytest.approx(0.5, abs=0.05)
        assert payload["model"]["process"] == "ar"

    def test_stdout_deterministic_in_seed_and_threads(self, capsys):
        argv = ["simulate", "--process", "ma", "--coeffs", "0.5",
                "--innovation", "gaussian:1", "--n", "5", "--reps", "30000",
                "--seed", "9"]
        _, out1, _ = run(capsys, argv + ["--threads", "1"])
        _, out2, _ = run(capsys, argv + ["--threads", "4"])
        assert out1 == out2

    def test_different_seed_changes_output(self, capsys):
        argv = ["simulate", "--process", "ma", "--coeffs", "0.5",
                "--innovation", "gaussian:1", "--n", "5", "--reps", "30000"]
        _, out1, _ = run(capsys, argv + ["--seed", "1"])
        _, out2, _ = run(capsys, argv + ["--seed", "2"])
        assert out1 != out2

    def test_window_and_files(self, capsys, tmp_path):
        out_json = tmp_path / "r.json"
        out_csv = tmp_path / "r.csv"
        code, out, _ = run(capsys, [
            "simulate", "--process", "ar", "--coeffs", "-1.0",
            "--innovation", "exponential", "--init", "iid",
            "--method", "splitting", "--n", "30", "--particles", "5000",
            "--seed", "3", "--window", "10:30",
            "--out", str(out_json), "--csv", str(out_csv)])
        assert code == 0
        payload = json.loads(out)
        assert json.loads(out_json.read_text()) == payload
        assert payload["estimate"]["window"] == [10, 30]
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "n,p_hat,se" and len(lines) == 32

    def test_all_paths_died_exits_one(self, capsys):
        code, _, err = run(capsys, [
            "simulate", "--process", "ar", "--coeffs", "0.0",
            "--innovation", "uniform:-2,-1", "--n", "2", "--reps", "500"])
        assert code == 1 and "AllPathsDied" in err


class TestOperatorCommand:
    def test_reference_value_and_fields(self, capsys):
        code, out, _ = run(capsys, [
            "operator", "--process", "ar", "--coeffs", "-1.0",
            "--innovation", "uniform:-1,1", "--N", "200"])
        payload = json.loads(out)
        assert payload["result"]["lambda"] == pytest.approx(1.0 / math.pi, abs=1e-4)
        assert payload["result"]["converged"] is True
        assert payload["result"]["grid"]["n"] == 200

    def test_eigenfunction_csv(self, capsys, tmp_path):
        path = tmp_path / "psi.csv"
        code, out, _ = run(capsys, [
            "operator", "--process", "ma", "--coeffs", "-0.5",
            "--innovation", "exponential", "--M", "8", "--N", "100",
            "--eigenfunction", str(path)])
        assert code == 0
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "x,psi" and len(lines) == 101

    def test_auto_delta(self, capsys):
        code, out, _ = run(capsys, [
            "operator", "--process", "ar", "--coeffs", "0.5",
            "--innovation", "gaussian:1", "--N", "150", "--delta", "auto"])
        payload = json.loads(out)
        assert payload["result"]["delta"] == 0.5


class TestCompareCommand:
    def test_inline_flags(self, capsys):
        code, out, _ = run(capsys, [
            "compare", "--process", "ar", "--coeffs", "-1.0",
            "--innovation", "uniform:-1,1", "--method", "crude",
            "--reps", "60000", "--N", "200", "--seed", "2"])
        assert code == 0
        payload = json.loads(out)
        assert payload["passed"] is True
        assert payload["lambda_oracle"] == pytest.approx(1.0 / math.pi)

    def test_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "case.json"
        cfg.write_text(json.dumps({
            "process": "ma", "coeffs": [-0.5],
            "innovation": {"kind": "exponential"},
            "mc": {"method": "none"}, "operator": {"N": 200, "M": 8.0},
        }))
        code, out, _ = run(capsys, ["compare", "--config", str(cfg)])
        assert code == 0
        payload = json.loads(out)
        assert payload["operator"]["lambda"] == pytest.approx(0.5, abs=1e-3)
        assert payload["mc"] is None


class TestSweepCommand:
    def test_monotonicity(self, capsys):
        code, out, _ = run(capsys, [
            "sweep", "--kind", "monotonicity", "--process", "ar", "--coeffs", "0.0",
            "--innovation", "gaussian:1", "--coeff-grid", "0.0;0.2;0.4",
            "--N", "120", "--delta", "auto"])
        assert code == 0
        payload = json.loads(out)
        assert payload["passed"] is True
        assert len(payload["lambdas"]) == 3

    def test_convergence(self, capsys):
        code, out, _ = run(capsys, [
            "sweep", "--kind", "convergence", "--process", "ar", "--coeffs", "0.4",
            "--innovation", "gaussian:1", "--Ms", "4,6", "--Ns", "80,160"])
        assert code == 0
        payload = json.loads(out)
        assert len(payload["table"]) == 4

    def test_continuity(self, capsys):
        code, out, _ = run(capsys, [
            "sweep", "--kind", "continuity", "--process", "ar", "--coeffs", "0.0",
            "--innovation", "gaussian:1", "--path", "0.24;0.249;0.2499",
            "--target", "0.25", "--N", "120", "--delta", "0.25"])
        assert code == 0
        payload = json.loads(out)
        assert payload["passed"] is True

    def test_suite_exit_codes(self, capsys, tmp_path):
        good = tmp_path / "good.json"
        good.write_text(json.dumps({"seed": 0, "cases": [
            {"name": "ok", "type": "property", "check": "nonnegativity",
             "process": "ar", "coeffs": [0.4],
             "innovation": {"kind": "gaussian", "sd": 1.0}, "operator": {"N": 80}},
        ]}))
        code, out, _ = run(capsys, [
            "sweep", "--kind", "suite", "--config", str(good),
            "--out-dir", str(tmp_path / "rep")])
        assert code == 0
        assert json.loads(out)["any_failed"] is False

        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"seed": 0, "cases": [
            {"name": "dead", "type": "compare", "process": "ar", "coeffs": [0.0],
             "innovation": {"kind": "uniform", "lo": -2.0, "hi": -1.0},
             "mc": {"method": "crude", "replicates": 1000, "horizons": [0]},
             "operator": {"skip": True}},
        ]}))
        code, out, _ = run(capsys, [
            "sweep", "--kind", "suite", "--config", str(bad),
            "--out-dir", str(tmp_path / "rep2")])
        assert code == 1

    def test_suite_malformed_config(self, capsys, tmp_path):
        bad = tmp_path / "broken.json"
        bad.write_text("{not json")
        code, _, err = run(capsys, [
            "sweep", "--kind", "suite", "--config", str(bad),
            "--out-dir", str(tmp_path / "rep")])
        assert code == 1
        assert "line" in err


class TestRoundTrip:
    def test_seventeen_digit_output_parses_back(self, capsys):
        code, out, _ = run(capsys, ["oracle", "--case", "ma1-uniform",
                                    "--a", "1", "--b", "3"])
        payload = json.loads(out)
        assert payload["exponent"] == 0.8993316389440023
