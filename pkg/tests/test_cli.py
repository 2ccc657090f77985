"""Command-line verbs, exit codes, and deterministic file outputs."""

import json
import os
import subprocess
import sys

import pytest

from combwalk.cli import main

CONFIG = {
    "schema": 1,
    "profile": {"family": "constant", "params": {"a": 0}},
    "estimator": {"kind": "GamblerRuin", "v": 3},
    "replicas": 2000,
    "horizon": 100000,
    "master_seed": 12345,
    "ci_level": 0.95,
}


def write_config(tmp_path, data=None, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data if data is not None else CONFIG))
    return str(path)


class TestClassify:
    def test_nlogn(self, capsys):
        assert main(["classify", "--family", "nlogn"]) == 0
        out = capsys.readouterr().out
        assert "InfiniteCollision_Thm1_1" in out
        assert "sum(1/breve_f" in out

    def test_linlog_beta3(self, capsys):
        assert main(["classify", "--family", "linlog", "--beta", "3"]) == 0
        assert "FiniteCollision_Thm4_1" in capsys.readouterr().out

    def test_linlog_conjectured_range(self, capsys):
        assert main(["classify", "--family", "linlog", "--beta", "1.5"]) == 0
        assert "Unknown" in capsys.readouterr().out

    def test_json_report(self, capsys):
        assert main(["classify", "--family", "iid", "--dist", "poisson",
                     "--lam", "2.0", "--profile-seed", "5", "--json"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["verdict"] == "TripleCollision_Thm3_1"
        assert data["triple_collision"] is True

    def test_malformed_profile_file_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "p.json"
        bad.write_text("{broken")
        assert main(["classify", "--profile", str(bad)]) == 2

    def test_profile_file_round_trip(self, tmp_path, capsys):
        p = tmp_path / "p.json"
        p.write_text(json.dumps({"family": "linlog", "params": {"beta": 3.0}}))
        assert main(["classify", "--profile", str(p)]) == 0
        assert "FiniteCollision_Thm4_1" in capsys.readouterr().out


class TestSimulate:
    def test_dump_csv(self, tmp_path, capsys):
        dump = tmp_path / "traj.csv"
        code = main([
            "simulate", "--family", "constant", "--a", "2", "--start", "0,0",
            "--horizon", "50", "--seed", "9", "--dump", str(dump),
        ])
        assert code == 0
        lines = dump.read_text().strip().split("\n")
        assert lines[0] == "n,x,y"
        assert len(lines) == 52

    def test_early_exit_reported(self, capsys):
        code = main([
            "simulate", "--family", "constant", "--a", "0", "--start", "0,0",
            "--horizon", "100000", "--seed", "3", "--theta", "5",
            "--early", "theta:5",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "theta[5] = " in out
        assert "censored: False" in out

    def test_bad_start_exits_2(self, capsys):
        assert main(["simulate", "--family", "constant", "--a", "0",
                     "--start", "0,5", "--horizon", "10"]) == 2


class TestExact:
    def test_absorption_json(self, capsys):
        assert main(["exact", "absorption", "--a", "1", "--b", "6"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["quantity"] == "absorption"
        assert data["value"] == pytest.approx(1 / 6)
        assert data["mode"] == "float"

    def test_absorption_rational(self, capsys):
        assert main(["exact", "absorption", "--a", "1", "--b", "6", "--rational"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["value"] == {"numerator": 1, "denominator": 6}
        assert data["mode"] == "rational"

    def test_tooth_collisions(self, capsys):
        assert main(["exact", "tooth-collisions", "--height", "1", "--v", "0",
                     "--rational"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["value"] == {"numerator": 17, "denominator": 16}

    def test_psi0_bracket_csv(self, tmp_path):
        out = tmp_path / "psi.csv"
        code = main([
            "exact", "psi0-bracket", "--family", "constant", "--a", "16",
            "--u", "0", "--v", "4", "--radius", "4", "--format", "csv",
            "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "quantity,params,value,lower,upper,mode"
        assert lines[1].startswith("psi0-bracket,")

    def test_kernel_decay(self, capsys):
        assert main(["exact", "kernel-decay", "--beta", "3", "--n", "2"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["params"]["t"] == 2
        assert data["value"] > 0

    def test_invalid_arguments_exit_2(self, capsys):
        assert main(["exact", "absorption", "--a", "7", "--b", "3"]) == 2


class TestEstimate:
    def test_writes_row_and_echoes_fingerprint(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "est.csv"
        assert main(["estimate", "--config", cfg, "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert printed.startswith("fingerprint=")
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 2
        assert printed.strip().split("=")[1] == lines[1].split(",")[-1]

    def test_byte_identical_reruns(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["estimate", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["estimate", "--config", cfg, "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_json_format(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "est.json"
        assert main(["estimate", "--config", cfg, "--format", "json",
                     "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["estimator"] == "GamblerRuin"

    def test_seed_override_changes_results(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["estimate", "--config", cfg, "--out", str(out1)])
        main(["estimate", "--config", cfg, "--out", str(out2), "--seed", "999"])
        assert out1.read_bytes() != out2.read_bytes()

    def test_schema_violation_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(CONFIG, replicas=0))
        assert main(["estimate", "--config", cfg]) == 2

    def test_unknown_field_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(CONFIG, surprise=1))
        assert main(["estimate", "--config", cfg]) == 2

    def test_all_censored_exits_3(self, tmp_path, capsys):
        censored = dict(
            CONFIG,
            profile={"family": "constant", "params": {"a": 16}},
            estimator={"kind": "ToothH", "u": 0, "v": 4, "h": 16},
            replicas=20,
            horizon=1,
        )
        cfg = write_config(tmp_path, censored)
        assert main(["estimate", "--config", cfg]) == 3

    def test_missing_config_exits_2(self, capsys):
        assert main(["estimate", "--config", "/nonexistent.json"]) == 2


class TestSweep:
    def test_grid_rows_in_order(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(CONFIG, replicas=500))
        out = tmp_path / "sweep.csv"
        code = main([
            "sweep", "--config", cfg, "--grid", '[{"v": 2}, {"v": 3}]',
            "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 3
        assert '""v"":2' in lines[1]
        assert '""v"":3' in lines[2]

    def test_grid_file(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(CONFIG, replicas=300))
        grid = tmp_path / "grid.json"
        grid.write_text('[{"v": 2}]')
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--config", cfg, "--grid", str(grid),
                     "--out", str(out)]) == 0

    def test_bad_point_keeps_others(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(CONFIG, replicas=300))
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--config", cfg,
                     "--grid", '[{"v": 0}, {"v": 2}]', "--out", str(out)]) == 0
        lines = out.read_text().strip().split("\n")
        assert "error" in lines[1]
        assert "error" not in lines[2]

    def test_empty_grid_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["sweep", "--config", cfg, "--grid", "[]"]) == 2


class TestAcceptanceVerb:
    def test_unknown_suite_exits_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "combwalk", "acceptance", "bogus"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2


class TestThreadsEnv:
    def test_env_does_not_change_output(self, tmp_path):
        cfg = write_config(tmp_path, dict(CONFIG, replicas=1000))
        outputs = []
        for threads in ("1", "4"):
            out = tmp_path / f"t{threads}.csv"
            env = dict(os.environ, COMBWALK_THREADS=threads)
            proc = subprocess.run(
                [sys.executable, "-m", "combwalk", "estimate", "--config", cfg,
                 "--out", str(out)],
                env=env, capture_output=True, text=True,
            )
            assert proc.returncode == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
