import json

import pandas as pd
import pytest

from sdda.data.container import read_container
from sdda.exceptions import NonFiniteError
from sdda.main import main

CONFIG = """\
log_level = "WARNING"

[synth]
n_classes = 2
n_channels = 4
n_samples = 256
trials_per_class = 8
seed = 5

[train]
batch_size = 8
max_epochs_stage1 = 2
max_epochs_stage2 = 1
repetitions = 1
lambda1_grid = [0.0, 1.0]
lambda2_grid = [0.0]
"""


def _record(path):
    record = json.loads(path.read_text())
    record.pop("wall_time_s")
    return record


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    config = root / "settings.toml"
    config.write_text(CONFIG)

    def run(*argv):
        return main(["--config", str(config), *map(str, argv)])

    assert run("synth", "--out", root / "synth", "--skip-calibration") == 0
    assert run("train", root / "synth" / "source.trl", root / "synth" / "target.trl", "--out", root / "train",
               "--seed", 3) == 0
    return root, run


def test_synth_writes_both_sessions(workspace):
    root, _ = workspace
    source = read_container(root / "synth" / "source.trl")
    target = read_container(root / "synth" / "target.trl")
    assert source.trials.shape == (16, 4, 256) and target.n_trials == 16
    assert set(source.sessions) == {1} and set(target.sessions) == {2}
    assert read_container(root / "synth" / "sessions.trl").n_trials == 32
    manifest = json.loads((root / "synth" / "manifest.json").read_text())
    assert manifest["command"] == "synth" and manifest["settings"]["synth"]["n_samples"] == 256


def test_synth_calibration(workspace, tmp_path):
    _, run = workspace
    assert run("synth", "--out", tmp_path, "--shift", 0.0) == 0
    calibration = json.loads((tmp_path / "calibration.json").read_text())
    assert set(calibration) == {"source_probe_cv_accuracy", "source_to_target_probe_accuracy",
                                "session_shift_pvalue"}
    assert 0.0 < calibration["session_shift_pvalue"] <= 1.0


def test_preprocess_aligns_each_domain(workspace, tmp_path):
    root, run = workspace
    assert run("preprocess", root / "synth" / "source.trl", root / "synth" / "target.trl", "--out", tmp_path) == 0
    report = json.loads((tmp_path / "preprocess.json").read_text())
    assert set(report) == {"source", "target"}
    for entry in report.values():
        assert entry["stages"] == ["filter", "ema", "normalize", "align"]
        assert entry["mean_covariance_deviation"] < 1e-6
    assert read_container(tmp_path / "target.trl").labeled


def test_preprocess_without_alignment(workspace, tmp_path):
    root, run = workspace
    assert run("preprocess", root / "synth" / "source.trl", "--out", tmp_path, "--no-align") == 0
    entry = json.loads((tmp_path / "preprocess.json").read_text())["source"]
    assert "align" not in entry["stages"]
    assert entry["mean_covariance_deviation"] > 1e-2


def test_preprocess_split_policy(workspace, tmp_path):
    root, run = workspace
    assert run("preprocess", root / "synth" / "sessions.trl", "--split", "IIA", "--out", tmp_path) == 0
    assert read_container(tmp_path / "source.trl").n_trials == 16
    assert set(read_container(tmp_path / "target.trl").sessions) == {2}


def test_train_outputs(workspace):
    root, _ = workspace
    train_dir = root / "train"
    for name in ("model.ckpt", "record.json", "trace.csv", "eval.json", "manifest.json"):
        assert (train_dir / name).is_file()
    record = json.loads((train_dir / "record.json").read_text())
    assert record["status"] == "completed" and record["seed"] == 3
    manifest = json.loads((train_dir / "manifest.json").read_text())
    assert manifest["notes"]["method"] == "sdda"
    assert manifest["notes"]["participant"] == "S01"
    assert manifest["notes"]["param_count"] > 0
    assert len(manifest["inputs"]) == 2
    rows = json.loads((train_dir / "eval.json").read_text())
    assert rows[0]["domain"] == "target" and 0.0 <= rows[0]["report"]["accuracy"] <= 1.0
    assert len(pd.read_csv(train_dir / "trace.csv")) == record["stage1_epochs"] + record["stage2_epochs"]


def test_training_is_reproducible(workspace, tmp_path):
    root, run = workspace
    assert run("train", root / "synth" / "source.trl", root / "synth" / "target.trl", "--out", tmp_path,
               "--seed", 3) == 0
    assert _record(tmp_path / "record.json") == _record(root / "train" / "record.json")


def test_ablation_is_recorded(workspace, tmp_path):
    root, run = workspace
    assert run("train", root / "synth" / "source.trl", root / "synth" / "target.trl", "--out", tmp_path,
               "--ablate", "no-mmd") == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["settings"]["train"]["use_mmd"] is False
    assert manifest["notes"]["method"] == "sdda/no-mmd"
    assert manifest["notes"]["effective_lambdas"][1] == 0.0
    record = json.loads((tmp_path / "record.json").read_text())
    assert all(epoch["mmd_loss"] is None for epoch in record["epochs"])


def test_train_on_preprocessed_inputs(workspace, tmp_path):
    root, run = workspace
    pre = tmp_path / "pre"
    assert run("preprocess", root / "synth" / "source.trl", root / "synth" / "target.trl", "--out", pre) == 0
    assert run("train", pre / "source.trl", pre / "target.trl", "--out", tmp_path / "train", "--preprocessed",
               "--variant", "vanilla") == 0
    manifest = json.loads((tmp_path / "train" / "manifest.json").read_text())
    assert manifest["notes"]["method"] == "vanilla"
    assert manifest["notes"]["preprocessing"] == {}


def test_eval_then_report(workspace, tmp_path):
    root, run = workspace
    checkpoint = root / "train" / "model.ckpt"
    assert run("eval", checkpoint, root / "synth" / "source.trl", root / "synth" / "target.trl",
               "--out", tmp_path / "eval") == 0
    rows = json.loads((tmp_path / "eval" / "eval.json").read_text())
    assert [row["domain"] for row in rows] == ["source", "target"]
    assert all(row["method"] == "sdda" for row in rows)
    train_rows = json.loads((root / "train" / "eval.json").read_text())
    assert rows[1]["report"]["accuracy"] == pytest.approx(train_rows[0]["report"]["accuracy"])

    assert run("report", tmp_path / "eval", "--out", tmp_path / "report") == 0
    table = pd.read_csv(tmp_path / "report" / "table.csv", index_col="method")
    assert list(table.columns) == ["S01", "Mean"]
    assert table.loc["sdda", "S01"] == table.loc["sdda", "Mean"]
    assert (tmp_path / "report" / "table.txt").is_file()


def test_export_embeddings(workspace, tmp_path):
    root, run = workspace
    assert run("export-embeddings", root / "train" / "model.ckpt", root / "synth" / "source.trl",
               root / "synth" / "target.trl", "--out", tmp_path) == 0
    frame = pd.read_csv(tmp_path / "embeddings.csv")
    assert list(frame.columns[:3]) == ["domain", "label", "h0"]
    assert frame["domain"].value_counts().to_dict() == {"source": 16, "target": 16}
    width = json.loads((tmp_path / "manifest.json").read_text())["notes"]["embedding_width"]
    assert frame.shape[1] == 2 + width


def test_gridsearch(workspace, tmp_path):
    root, run = workspace
    assert run("gridsearch", root / "synth" / "source.trl", root / "synth" / "target.trl", "--out", tmp_path) == 0
    grid = pd.read_csv(tmp_path / "grid.csv", index_col=0)
    assert grid.shape == (2, 1)
    result = json.loads((tmp_path / "grid.json").read_text())
    assert result["oracle_selection"] is True
    assert result["best_lambda1"] in (0.0, 1.0) and result["best_lambda2"] == 0.0
    assert json.loads((tmp_path / "manifest.json").read_text())["notes"]["oracle_selection"] is True


def test_replay_from_manifest(workspace):
    root, _ = workspace
    before = _record(root / "train" / "record.json")
    assert main(["--from-manifest", str(root / "train")]) == 0
    assert _record(root / "train" / "record.json") == before


def test_divergence_exit_code(workspace, tmp_path, monkeypatch):
    root, run = workspace

    def exploding(*args, **kwargs):
        raise NonFiniteError("loss is inf")

    monkeypatch.setattr("sdda.train.siamese.total_loss", exploding)
    assert run("train", root / "synth" / "source.trl", root / "synth" / "target.trl", "--out", tmp_path) == 3
    assert json.loads((tmp_path / "record.json").read_text())["status"] == "diverged"
    assert "failure" in json.loads((tmp_path / "manifest.json").read_text())["notes"]


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["train", "--no-such-flag"]) == 2


def test_bad_container_is_reported(tmp_path, capsys):
    bad = tmp_path / "bad.trl"
    bad.write_bytes(b"NOPE" + bytes(40))
    assert main(["preprocess", str(bad), "--out", str(tmp_path / "out")]) == 1
    assert "error[bad_magic]" in capsys.readouterr().err


def test_missing_input_is_reported(tmp_path, capsys):
    assert main(["preprocess", str(tmp_path / "absent.trl"), "--out", str(tmp_path / "out")]) == 1
    assert "error[invalid_config]" in capsys.readouterr().err


def test_unknown_config_key_is_rejected(tmp_path, capsys):
    config = tmp_path / "bad.toml"
    config.write_text("no_such_field = 1\n")
    assert main(["--config", str(config), "report", str(tmp_path), "--out", str(tmp_path)]) == 1
    assert "error[invalid_config]" in capsys.readouterr().err


@pytest.mark.slow
def test_unshifted_sessions_score_alike(tmp_path):
    config = tmp_path / "settings.toml"
    config.write_text('log_level = "WARNING"\n\n[synth]\nn_classes = 2\n\n[train]\nmodel = "eegnet"\n'
                      'max_epochs_stage1 = 120\nmax_epochs_stage2 = 60\npatience = 30\n')

    def run(*argv):
        return main(["--config", str(config), *map(str, argv)])

    assert run("synth", "--out", tmp_path / "synth", "--shift", 0.0, "--skip-calibration") == 0
    source, target = tmp_path / "synth" / "source.trl", tmp_path / "synth" / "target.trl"
    assert run("train", source, target, "--out", tmp_path / "train") == 0
    assert run("eval", tmp_path / "train" / "model.ckpt", source, target, "--out", tmp_path / "eval") == 0
    rows = json.loads((tmp_path / "eval" / "eval.json").read_text())
    accuracies = {row["domain"]: row["report"]["accuracy"] for row in rows}
    assert abs(accuracies["source"] - accuracies["target"]) <= 0.03
