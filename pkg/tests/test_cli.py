import json
import os

import pytest

from ecosched.cli import main


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "inst.json"
    code = run_cli(
        "generate", "--problem", "energy_plus_lost_value", "--n", "5",
        "--alpha", "2", "--seed", "11", "--out", str(path),
    )
    assert code == 0
    return path


class TestGenerate:
    def test_writes_valid_instance(self, instance_file):
        data = json.loads(instance_file.read_text())
        assert data["problem"] == "energy_plus_lost_value"
        assert len(data["jobs"]) == 5

    def test_deterministic_output(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            run_cli(
                "generate", "--problem", "min_energy_sleep", "--n", "4",
                "--alpha", "2", "--g", "1", "--wake", "2", "--seed", "3",
                "--out", str(out),
            )
        assert a.read_bytes() == b.read_bytes()


class TestRunAndCertify:
    def test_pipeline_certified(self, tmp_path, instance_file):
        report = tmp_path / "run.json"
        assert run_cli("run", "--algo", "ev", "--instance", str(instance_file), "--out", str(report)) == 0
        data = json.loads(report.read_text())
        assert "primal" in data and "lambda" in data and "instance" in data
        cert_file = tmp_path / "cert.json"
        code = run_cli("certify", "--run", str(report), "--out", str(cert_file))
        assert code == 0
        cert = json.loads(cert_file.read_text())
        assert cert["verdict"] == "certified"

    def test_run_is_deterministic(self, tmp_path, instance_file):
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        for out in (r1, r2):
            run_cli("run", "--algo", "ev", "--instance", str(instance_file), "--out", str(out))
        assert r1.read_bytes() == r2.read_bytes()

    def test_tampered_report_fails_with_exit_2(self, tmp_path, instance_file):
        report = tmp_path / "run.json"
        run_cli("run", "--algo", "ev", "--instance", str(instance_file), "--out", str(report))
        data = json.loads(report.read_text())
        data["primal"] = data["primal"] * 2 + 1
        report.write_text(json.dumps(data))
        assert run_cli("certify", "--run", str(report)) == 2

    def test_all_algorithms_produce_reports(self, tmp_path):
        cases = [
            ("energy_plus_lost_value", "ev", []),
            ("value_minus_energy", "ve", []),
            ("min_energy_sleep", "oa", []),
            ("min_energy_sleep", "soa", ["--g", "2", "--wake", "1"]),
            ("flow_plus_energy", "flow", ["--g", "2", "--wake", "1"]),
        ]
        for problem, algo, extra in cases:
            inst = tmp_path / f"{algo}.json"
            run_cli(
                "generate", "--problem", problem, "--n", "4", "--alpha", "2",
                "--seed", "5", "--out", str(inst), *extra,
            )
            out = tmp_path / f"{algo}-run.json"
            assert run_cli("run", "--algo", algo, "--instance", str(inst), "--out", str(out)) == 0
            assert "checks" in json.loads(out.read_text())

    def test_missing_file_is_io_error(self, tmp_path):
        assert run_cli("run", "--algo", "ev", "--instance", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x.json")) == 3

    def test_unknown_flag_is_usage_error(self):
        assert run_cli("run", "--bogus") == 1


class TestSweepAndReport:
    def test_sweep_to_csv_with_figures(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        out = tmp_path / "sweep.csv"
        cfg.write_text(
            json.dumps(
                {
                    "problem": "energy_plus_lost_value",
                    "alpha": [2.0],
                    "g": [0.0],
                    "A": [0.0],
                    "n": [4],
                    "seeds": [1, 6],
                    "output": str(out),
                }
            )
        )
        assert run_cli("sweep", "--config", str(cfg)) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("seed,n,alpha,g,A,epsilon,problem")
        assert len(lines) == 1 + 6 + 1
        assert (tmp_path / "sweep_ratio_hist.png").exists()
        assert (tmp_path / "sweep_ratio_by_alpha.png").exists()
        assert run_cli("report", "--csv", str(out), "--no-figures") == 0

    def test_sweep_deterministic(self, tmp_path):
        outs = []
        for name in ("s1.csv", "s2.csv"):
            cfg = tmp_path / f"{name}.cfg"
            out = tmp_path / name
            cfg.write_text(
                json.dumps(
                    {
                        "problem": "min_energy_sleep",
                        "alpha": [2.0],
                        "g": [1.0],
                        "A": [1.0],
                        "n": [4],
                        "seeds": [1, 4],
                        "output": str(out),
                    }
                )
            )
            assert run_cli("sweep", "--config", str(cfg), "--no-figures") == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_sweep_row_reproducible_by_single_run(self, tmp_path):
        # a sweep row's primal must match generate+run with the same seed
        cfg = tmp_path / "cfg.json"
        out = tmp_path / "sweep.csv"
        cfg.write_text(
            json.dumps(
                {
                    "problem": "energy_plus_lost_value",
                    "alpha": [2.0],
                    "g": [0.0],
                    "A": [0.0],
                    "n": [5],
                    "seeds": [11, 11],
                    "output": str(out),
                }
            )
        )
        run_cli("sweep", "--config", str(cfg), "--no-figures")
        row = out.read_text().splitlines()[1].split(",")
        inst = tmp_path / "inst.json"
        rep = tmp_path / "rep.json"
        run_cli("generate", "--problem", "energy_plus_lost_value", "--n", "5",
                "--alpha", "2", "--seed", "11", "--out", str(inst))
        run_cli("run", "--algo", "ev", "--instance", str(inst), "--out", str(rep))
        # CSV stores 12 significant digits
        assert float(row[7]) == pytest.approx(json.loads(rep.read_text())["primal"], rel=1e-10)

    def test_thread_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ECOSCHED_THREADS", "4")
        cfg = tmp_path / "cfg.json"
        out = tmp_path / "sweep.csv"
        cfg.write_text(
            json.dumps(
                {
                    "problem": "energy_plus_lost_value",
                    "alpha": [2.0],
                    "g": [0.0],
                    "A": [0.0],
                    "n": [4],
                    "seeds": [1, 8],
                    "output": str(out),
                }
            )
        )
        assert run_cli("sweep", "--config", str(cfg), "--no-figures") == 0
        assert len(out.read_text().strip().splitlines()) == 1 + 8 + 1
