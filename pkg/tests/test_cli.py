"""Config validation, exit codes, and output determinism of the CLI."""

import json
import subprocess
import sys

import pytest

from ratelab.cli import main
from ratelab.experiments import ExperimentConfig


def write_config(tmp_path, **kw):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(kw))
    return str(path)


class TestConfigValidation:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            ExperimentConfig.from_dict({"experiment": "holder", "typo_key": 1})

    def test_unknown_experiment(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"experiment": "does_not_exist"})

    def test_inadmissible_beta_cites_divergent_sum(self):
        with pytest.raises(ValueError, match="partial sums"):
            ExperimentConfig.from_dict({"experiment": "temporal_weak",
                                        "gamma": 0.25, "beta": 0.9})

    def test_admissible_beta_accepted(self):
        cfg = ExperimentConfig.from_dict({"experiment": "temporal_weak",
                                          "gamma": 0.25, "beta": 0.7})
        assert cfg.beta_target() == pytest.approx(0.7)

    def test_chc_caps_beta(self):
        with pytest.raises(ValueError, match="capped"):
            ExperimentConfig.from_dict({"experiment": "chc_weak", "beta": 1.2})

    def test_chc_rejects_crank_nicolson(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"experiment": "chc_weak",
                                        "scheme": "crank_nicolson"})


class TestExitCodes:
    def test_invalid_beta_exits_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path, experiment="temporal_weak", gamma=0.25,
                           beta=0.9, out=str(tmp_path / "x"))
        assert main(["run", cfg]) == 2
        assert "partial sums" in capsys.readouterr().err

    def test_unknown_key_exits_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path, experiment="holder", bogus=3,
                           out=str(tmp_path / "x"))
        assert main(["run", cfg]) == 2

    def test_missing_out_exits_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path, experiment="holder")
        assert main(["run", cfg]) == 2

    def test_successful_run(self, tmp_path, capsys):
        out = tmp_path / "holder_run"
        cfg = write_config(tmp_path, experiment="holder", out=str(out))
        assert main(["run", cfg]) == 0
        csv_text = (out.with_suffix(".csv")).read_text()
        assert csv_text.startswith("experiment,family,scheme,gamma,beta,J,h,k,"
                                   "n_paths,seed,error_kind,error_value,std_error")
        summary = json.loads(out.with_suffix(".json").read_text())
        assert summary["pass"] is True
        assert summary["claim"]


class TestReproducibility:
    def test_same_seed_byte_identical(self, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        for out in (out1, out2):
            cfg = write_config(tmp_path, experiment="representation", seed=77,
                               out=str(out))
            assert main(["run", cfg]) == 0
        assert out1.with_suffix(".csv").read_bytes() == out2.with_suffix(".csv").read_bytes()
        assert out1.with_suffix(".json").read_bytes() == out2.with_suffix(".json").read_bytes()

    def test_mc_rows_reproducible(self, tmp_path):
        texts = []
        for name in ("m1", "m2"):
            out = tmp_path / name
            cfg = write_config(tmp_path, experiment="temporal_weak",
                               scheme="crank_nicolson", J_ref=64, seed=5,
                               n_paths=400, k_level_min=4, k_level_max=7,
                               out=str(out))
            assert main(["run", cfg]) == 0
            texts.append(out.with_suffix(".csv").read_bytes())
        assert texts[0] == texts[1]


class TestListExperiments:
    def test_lists_all_kinds(self, capsys):
        assert main(["list-experiments"]) == 0
        out = capsys.readouterr().out
        for kind in ("temporal_weak", "chc_weak", "representation"):
            assert kind in out

    def test_console_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "ratelab.cli",
                               "list-experiments"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "holder" in proc.stdout


class TestVerifyAll:
    def test_subset_writes_outputs(self, tmp_path, monkeypatch, capsys):
        import ratelab.cli as cli
        monkeypatch.setattr(cli, "VERIFY_ALL_SUITE",
                            ({"experiment": "holder"},
                             {"experiment": "representation"}))
        out = tmp_path / "suite"
        assert main(["verify-all", "--out", str(out), "--seed", "3"]) == 0
        assert (out / "holder.csv").exists()
        assert (out / "representation.json").exists()
        combined = json.loads((out / "verify_all.json").read_text())
        assert {r["experiment"] for r in combined["results"]} == \
            {"holder", "representation"}
        assert all(r["pass"] for r in combined["results"])


class TestSpecExample:
    def test_cn_temporal_weak_levels_4_to_10(self, tmp_path):
        # the canonical config: 7 CSV rows and a fitted slope near 1.0
        out = tmp_path / "cn"
        cfg = write_config(tmp_path, experiment="temporal_weak",
                           scheme="crank_nicolson", gamma=0.25,
                           k_level_min=4, k_level_max=10, out=str(out))
        assert main(["run", cfg]) == 0
        lines = out.with_suffix(".csv").read_text().strip().splitlines()
        data = [l for l in lines[1:] if ",weak_exact," in l]
        assert len(data) == 7
        summary = json.loads(out.with_suffix(".json").read_text())
        slope = summary["reports"][0]["slope"]
        assert abs(slope - 1.0) <= 0.1


class TestFunctionalKey:
    def test_canonical_functional_accepted(self):
        cfg = ExperimentConfig.from_dict({"experiment": "temporal_weak",
                                          "functional": "sine"})
        assert cfg.functional == "sine"

    def test_mismatched_functional_rejected(self):
        with pytest.raises(ValueError, match="sine"):
            ExperimentConfig.from_dict({"experiment": "temporal_weak",
                                        "functional": "gauss_exp"})

    def test_functional_on_check_kind_rejected(self):
        with pytest.raises(ValueError, match="no functional"):
            ExperimentConfig.from_dict({"experiment": "holder",
                                        "functional": "sine"})
