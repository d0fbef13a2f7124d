import json
import time

import pytest

from wtal.cli import build_parser, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file()}


SMALL = ("--n-train", 3, "--n-test", 2)
FAST = ("--preset", "desk", "--epochs", 2, "--model-dim", 16)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> train-detector -> train-regressor -> eval, timed."""
    root = tmp_path_factory.mktemp("e2e")
    t0 = time.perf_counter()
    codes = [
        main(["synth", "--out", str(root / "ds"), "--seed", "7", *map(str, SMALL)]),
        main(["train-detector", "--manifest", str(root / "ds/manifest.json"),
              "--out", str(root / "det"), *map(str, FAST)]),
        main(["train-regressor", "--manifest", str(root / "ds/manifest.json"),
              "--detector", str(root / "det/detector.ckpt"), "--out", str(root / "reg"),
              *map(str, FAST)]),
        main(["eval", "--manifest", str(root / "ds/manifest.json"),
              "--detector", str(root / "det/detector.ckpt"),
              "--regressor", str(root / "reg/regressor.ckpt"), "--out", str(root / "ev"),
              "--workers", "2"]),
    ]
    return root, codes, time.perf_counter() - t0


def test_end_to_end(pipeline):
    root, codes, seconds = pipeline
    assert codes == [0, 0, 0, 0]
    assert seconds < 120
    report = json.loads((root / "ev/report.json").read_text())
    for key in ("frame_auc", "accuracy", "mae", "mse"):
        assert isinstance(report[key], float)
    assert len(report["confusion"]) == 4 and all(len(r) == 4 for r in report["confusion"])
    assert (root / "ev/confusion.csv").is_file() and (root / "ev/confusion.png").is_file()
    heat = root / "ev/heatmaps"
    assert {p.suffix for p in heat.iterdir()} == {".csv", ".pgm", ".png"}
    for name in ("det/detector_loss.csv", "det/detector_loss.png", "reg/regressor_loss.png",
                 "det/config.json", "ev/scores.csv"):
        assert (root / name).is_file(), name


def test_synth_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, "synth", "--out", tmp_path / name, "--seed", 7, *SMALL)[0] == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")
    assert run(capsys, "synth", "--out", tmp_path / "c", "--seed", 8, *SMALL)[0] == 0
    assert tree(tmp_path / "a") != tree(tmp_path / "c")


def test_training_outputs_byte_identical(pipeline, tmp_path, capsys):
    root = pipeline[0]
    for name in ("x", "y"):
        code, _, _ = run(capsys, "train-detector", "--manifest", root / "ds/manifest.json",
                         "--out", tmp_path / name, *FAST, "--seed", 3)
        assert code == 0
    assert tree(tmp_path / "x") == tree(tmp_path / "y")


def test_infer(pipeline, tmp_path, capsys):
    root = pipeline[0]
    feat = root / "ds/features/L3_test_004.feat"
    code, out, _ = run(capsys, "infer", "--detector", root / "det/detector.ckpt",
                       "--regressor", root / "reg/regressor.ckpt", "--features", feat,
                       "--out", tmp_path)
    assert code == 0
    obj = json.loads((tmp_path / "L3_test_004.json").read_text())
    assert len(obj["scores"]) == 32
    assert obj["severity"]["class"] in range(4)
    assert len(obj["severity"]["rank_probabilities"]) == 3


def test_config_file_and_flag_precedence(pipeline, tmp_path, capsys):
    root = pipeline[0]
    (tmp_path / "c.json").write_text(json.dumps({"epochs": 1, "lambda2": 0.25, "model_dim": 16}))
    code, _, _ = run(capsys, "train-detector", "--manifest", root / "ds/manifest.json",
                     "--out", tmp_path / "o", "--preset", "desk", "--config", tmp_path / "c.json",
                     "--lambda2", 0.5, "--sref", "mean", "--no-figures")
    assert code == 0
    echoed = json.loads((tmp_path / "o/config.json").read_text())["train"]
    assert echoed["epochs"] == 1 and echoed["lambda2"] == 0.5 and echoed["sref"] == "mean"
    assert echoed["reg_batch_size"] == 4  # from the preset


def test_help_lists_flags(capsys):
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    text = sub["train-detector"].format_help()
    for flag in ("--manifest", "--out", "--seed", "--epochs", "--lr", "--lambda1", "--lambda2",
                 "--sref", "--loss-mode", "--levels", "--model-dim", "--preset", "--config"):
        assert flag in text
    assert "--workers" in sub["eval"].format_help()


@pytest.mark.parametrize("argv,kind", [
    (["synth", "--out", "x", "--bogus"], "usage"),
    (["nosuch"], "usage"),
    (["train-detector", "--manifest", "m.json", "--out", "o", "--loss-mode", "max"], "usage"),
    (["train-detector", "--manifest", "missing.json", "--out", "o"], "missing_file"),
    (["infer", "--detector", "missing.ckpt", "--features", "f", "--out", "o"], "checkpoint"),
])
def test_errors_are_json(argv, kind, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, out, err = run(capsys, *argv)
    assert code != 0 and out == ""
    assert json.loads(err)["error"] == kind


def test_bad_config_file(tmp_path, capsys):
    (tmp_path / "c.json").write_text("{not json")
    code, _, err = run(capsys, "synth", "--out", tmp_path / "o", "--config", tmp_path / "c.json")
    assert code == 2 and json.loads(err)["error"] == "usage"
    (tmp_path / "d.json").write_text(json.dumps({"mu": -1, "budgets": [[0, 0], [5, 1]]}))
    code, _, err = run(capsys, "synth", "--out", tmp_path / "o", "--config", tmp_path / "d.json")
    assert code == 1 and json.loads(err)["error"] == "configuration"


def test_incompatible_checkpoints(pipeline, tmp_path, capsys):
    root = pipeline[0]
    code, _, err = run(capsys, "eval", "--manifest", root / "ds/manifest.json",
                       "--detector", root / "reg/regressor.ckpt", "--out", tmp_path)
    assert code == 1 and json.loads(err)["error"] == "checkpoint"
