"""Command-line interface tests, run in-process through main()."""
import json

import pytest

from su11sim.cli import main


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestLimits:
    def test_json_payload(self, capsys):
        code, out, _ = run_cli(
            ["limits", "--mean-photons", "4", "--measurements", "1000"], capsys
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["qcrb"] == pytest.approx(4.1666666666666665e-05)
        assert payload["heisenberg"] == pytest.approx(6.25e-05)
        assert payload["shot_noise"] == pytest.approx(2.5e-04)

    def test_out_file(self, tmp_path, capsys):
        target = tmp_path / "limits.json"
        code, out, _ = run_cli(
            ["limits", "--mean-photons", "4", "--measurements", "10", "--out", str(target)],
            capsys,
        )
        assert code == 0
        assert out == ""
        assert json.loads(target.read_text())["qcrb"] == pytest.approx(1.0 / 240.0)


class TestLikelihood:
    def test_csv_columns_and_tail_row(self, tmp_path, capsys):
        target = tmp_path / "curves.csv"
        code, _, _ = run_cli(
            [
                "likelihood", "--scheme", "photon", "--mean-photons", "4",
                "--points", "11", "--out", str(target),
            ],
            capsys,
        )
        assert code == 0
        lines = target.read_text().splitlines()
        assert lines[0].startswith("# su11sim/likelihood-curves/v1 version=")
        assert lines[1].startswith("# config=")
        assert lines[2] == "delta_phi,outcome,probability"
        labels = {row.split(",")[1] for row in lines[3:]}
        assert "pair:0" in labels
        assert "tail" in labels

    def test_probabilities_sum_to_one_per_offset(self, tmp_path, capsys):
        target = tmp_path / "curves.csv"
        run_cli(
            [
                "likelihood", "--scheme", "optimal", "--mean-photons", "2",
                "--points", "7", "--out", str(target),
            ],
            capsys,
        )
        sums: dict[str, float] = {}
        for row in target.read_text().splitlines()[3:]:
            u, _, p = row.split(",")
            sums[u] = sums.get(u, 0.0) + float(p)
        assert len(sums) == 7
        for total in sums.values():
            assert total == pytest.approx(1.0, abs=1e-9)


class TestRun:
    def test_record_and_trajectory(self, tmp_path, capsys):
        rec_path = tmp_path / "trial.json"
        traj_path = tmp_path / "trial.csv"
        code, _, _ = run_cli(
            [
                "run", "--protocol", "optimal", "--phi-true", "0.75",
                "--mean-photons", "4", "--measurements", "40",
                "--seed", "11", "--out", str(rec_path),
                "--trajectory-out", str(traj_path),
            ],
            capsys,
        )
        assert code == 0
        record = json.loads(rec_path.read_text())
        assert record["schema"] == "su11sim/trial/v1"
        assert record["seed"] == 11
        assert len(record["steps"]) == 40
        lines = traj_path.read_text().splitlines()
        assert lines[2] == "step,theta,outcome,map"
        assert len(lines) == 3 + 40

    def test_fixed_mode_requires_theta(self, capsys):
        code, _, err = run_cli(
            [
                "run", "--protocol", "fixed", "--phi-true", "0.75",
                "--mean-photons", "4", "--measurements", "10",
            ],
            capsys,
        )
        assert code == 1
        assert "error:" in err

    def test_byte_identical_reruns(self, tmp_path, capsys):
        paths = []
        for name in ("a.json", "b.json"):
            p = tmp_path / name
            code, _, _ = run_cli(
                [
                    "run", "--protocol", "ladder", "--phi-true", "0.75",
                    "--mean-photons", "4", "--measurements", "150",
                    "--pre-rounds", "30", "--seed", "3", "--out", str(p),
                ],
                capsys,
            )
            assert code == 0
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()


class TestEnsembleCommand:
    def test_campaign_json_and_csvs(self, tmp_path, capsys):
        out = tmp_path / "campaign.json"
        cells = tmp_path / "cells.csv"
        trials = tmp_path / "trials.csv"
        code, _, _ = run_cli(
            [
                "ensemble", "--protocol", "optimal", "--phi-true", "0.5,0.75",
                "--mean-photons", "4", "--trials", "3", "--measurements", "50",
                "--out", str(out), "--cells-csv", str(cells),
                "--trials-csv", str(trials),
            ],
            capsys,
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["schema"] == "su11sim/campaign/v1"
        assert len(payload["cells"]) == 2
        assert payload["config"]["master_seed"] == 7
        cell_lines = cells.read_text().splitlines()
        assert cell_lines[2].startswith("cell_index,phi_true,")
        assert len(cell_lines) == 3 + 2
        trial_lines = trials.read_text().splitlines()
        assert "rival_ratio" in trial_lines[2]
        assert len(trial_lines) == 3 + 6

    def test_config_file_round_trip(self, tmp_path, capsys):
        out1 = tmp_path / "flags.json"
        run_cli(
            [
                "ensemble", "--protocol", "optimal", "--phi-true", "0.75",
                "--mean-photons", "4", "--trials", "2", "--measurements", "30",
                "--out", str(out1),
            ],
            capsys,
        )
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(json.loads(out1.read_text())["config"]))
        out2 = tmp_path / "fromcfg.json"
        code, _, _ = run_cli(
            ["ensemble", "--config", str(cfg_path), "--out", str(out2)], capsys
        )
        assert code == 0
        assert out2.read_bytes() == out1.read_bytes()


class TestThresholdCommand:
    def test_scan_json(self, tmp_path, capsys):
        out = tmp_path / "scan.json"
        code, _, _ = run_cli(
            [
                "threshold", "--thetas", "0.55,0.65", "--phi-true", "0.75",
                "--mean-photons", "4", "--trials", "4",
                "--max-measurements", "150", "--out", str(out),
            ],
            capsys,
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["schema"] == "su11sim/threshold-scan/v1"
        assert [r["theta"] for r in payload["rows"]] == [0.55, 0.65]


class TestVerifyCommand:
    def test_fast_battery_passes(self, tmp_path, capsys):
        out = tmp_path / "verify.json"
        code, _, err = run_cli(["verify", "--fast", "--out", str(out)], capsys)
        assert code == 0
        report = json.loads(out.read_text())
        assert report["passed"] is True
        assert "PASS" in err
        assert "FAIL" not in err


class TestSeedsAndErrors:
    def test_env_seed_override(self, tmp_path, capsys, monkeypatch):
        out_env = tmp_path / "env.json"
        monkeypatch.setenv("SU11_SEED", "99")
        run_cli(
            [
                "run", "--protocol", "optimal", "--phi-true", "0.75",
                "--mean-photons", "4", "--measurements", "10", "--out", str(out_env),
            ],
            capsys,
        )
        monkeypatch.delenv("SU11_SEED")
        out_flag = tmp_path / "flag.json"
        run_cli(
            [
                "run", "--protocol", "optimal", "--phi-true", "0.75",
                "--mean-photons", "4", "--measurements", "10",
                "--seed", "99", "--out", str(out_flag),
            ],
            capsys,
        )
        assert json.loads(out_env.read_text())["seed"] == 99
        assert out_env.read_bytes() == out_flag.read_bytes()

    def test_bad_env_seed_is_reported(self, capsys, monkeypatch):
        monkeypatch.setenv("SU11_SEED", "not-a-number")
        code, _, err = run_cli(
            [
                "run", "--protocol", "optimal", "--phi-true", "0.75",
                "--mean-photons", "4", "--measurements", "10",
            ],
            capsys,
        )
        assert code == 1
        assert "SU11_SEED" in err

    def test_usage_error_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_domain_error_exits_one(self, capsys):
        code, _, err = run_cli(
            ["limits", "--mean-photons", "-4", "--measurements", "10"], capsys
        )
        assert code == 1
        assert "error:" in err
