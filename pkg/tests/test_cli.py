"""End-to-end CLI behavior and exit codes."""

import pytest

from proxymark.cli import EXIT_CONFIG, EXIT_EXPERIMENT, EXIT_OK, main

YAML = """
seed: 9
output_dir: "{out}"
dataset:
  generator: {{classes: 4, dim: 2, per_class: 30, spread: 0.6}}
  split: {{holdout_fraction: 0.5}}
source:
  model: {{hidden_layers: [16]}}
  train: {{epochs: 50}}
ball: {{delta: 0.05, m: 8, n: 6, max_candidates: 4000}}
attacks:
  - {{kind: soft_label}}
independents: {{count: 2, subset_fraction: 0.5}}
repeats: 1
"""


@pytest.fixture()
def config_file(tmp_path):
    out = tmp_path / "out"
    path = tmp_path / "exp.yaml"
    path.write_text(YAML.format(out=out))
    return path, out


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("sede: 1\n")
        assert main(["train", "--config", str(bad)]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_experiment_error_is_3(self, config_file, capsys):
        path, _ = config_file
        # an enormous relative delta makes proxy agreement hopeless
        text = path.read_text().replace("delta: 0.05", "delta: 50.0")
        text = text.replace("max_candidates: 4000", "max_candidates: 10")
        path.write_text(text)
        assert main(["watermark", "--config", str(path)]) == EXIT_EXPERIMENT
        assert "experiment error" in capsys.readouterr().err


class TestSubcommands:
    def test_train_writes_checkpoint(self, config_file, capsys):
        path, out = config_file
        assert main(["train", "--config", str(path)]) == EXIT_OK
        assert (out / "source.ckpt").exists()
        assert "accuracy" in capsys.readouterr().out

    def test_watermark_then_verify_source_is_stolen(self, config_file, capsys):
        path, out = config_file
        assert main(["watermark", "--config", str(path)]) == EXIT_OK
        assert (out / "trigger_set.json").exists()
        capsys.readouterr()
        code = main(
            [
                "verify",
                "--suspect", str(out / "source.ckpt"),
                "--trigger-set", str(out / "trigger_set.json"),
                "--out", str(out / "verdict"),
            ]
        )
        assert code == EXIT_OK
        text = capsys.readouterr().out
        assert "verdict:           stolen" in text
        assert (out / "verdict" / "verification.csv").exists()
        header = (out / "verdict" / "verification.csv").read_text().splitlines()[0]
        assert header.startswith("trigger_accuracy,")

    def test_attack_writes_surrogates(self, config_file, capsys):
        path, out = config_file
        assert main(["attack", "--config", str(path)]) == EXIT_OK
        assert (out / "surrogate_soft_label_0_0.ckpt").exists()

    def test_integrity_reports_rates(self, config_file, capsys):
        path, out = config_file
        assert main(["integrity", "--config", str(path)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "integrity acceptance rate" in text
        assert "complement trigger accuracy on strict set: 0.0000" in text

    def test_run_full_pipeline(self, config_file, capsys):
        path, out = config_file
        assert main(["run", "--config", str(path)]) == EXIT_OK
        assert (out / "report.csv").exists()
        assert "baseline" in capsys.readouterr().out

    def test_seed_and_out_overrides(self, config_file, tmp_path):
        path, _ = config_file
        alt = tmp_path / "alt"
        assert main(["train", "--config", str(path), "--seed", "123", "--out", str(alt)]) == EXIT_OK
        assert (alt / "source.ckpt").exists()
