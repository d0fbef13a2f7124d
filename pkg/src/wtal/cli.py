"""``wtal`` command line: synth, train-detector, train-regressor, eval, infer.

Settings resolve as preset < ``--config`` JSON < explicit flags, and the
effective configuration is written to ``config.json`` in the output
directory. Failures print one JSON object to stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import ModelCheckpoint
from .data import SynthConfig, load_feature_file, load_manifest, load_masks, synth_dataset
from .errors import WtalError
from .metrics import evaluate, write_confusion_csv, write_report
from .pipeline import PRESETS, Predictor, TrainConfig, preset_config, train_detector, train_regressor

EXIT_USAGE = 2
EXIT_FAILURE = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sref(value):
    if value == "mean":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'mean', got {value!r}")


def _read_config(path):
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(obj, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return obj


def _overrides(args, mapping):
    """Flags the user actually passed, renamed to config keys."""
    return {key: getattr(args, dest) for dest, key in mapping.items()
            if getattr(args, dest, None) is not None}


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _train_config(args, phase):
    base = dict(PRESETS[args.preset])
    file_cfg = _read_config(args.config)
    base.update(file_cfg)
    common = {"seed": "seed", "levels": "levels", "model_dim": "model_dim"}
    if phase == "detector":
        flags = {"epochs": "epochs", "lr": "lr", "lambda1": "lambda1", "lambda2": "lambda2",
                 "sref": "sref", "loss_mode": "loss_mode", "batch_size": "batch_size",
                 "freeze_oe": "freeze_oe", **common}
    else:
        flags = {"epochs": "reg_epochs", "lr": "reg_lr", "batch_size": "reg_batch_size",
                 **common}
    base.update(_overrides(args, flags))
    return TrainConfig.from_json(base)


def _figures(args):
    return not args.no_figures


def cmd_synth(args):
    cfg_obj = _read_config(args.config)
    cfg_obj.update(_overrides(args, {"seed": "seed", "n_train": "n_train", "n_test": "n_test",
                                     "T": "T", "D": "D", "mu": "mu", "sigma": "sigma"}))
    known = set(SynthConfig.__dataclass_fields__)
    unknown = set(cfg_obj) - known
    if unknown:
        raise UsageError(f"unknown synth config keys: {sorted(unknown)}")
    cfg = SynthConfig(**cfg_obj)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest, _, _ = synth_dataset(cfg, out)
    _write_json(out / "config.json", {"command": "synth", "synth": cfg.to_json()})
    return {"manifest": str(out / "manifest.json"), "videos": len(manifest)}


def _plot_history(history, path, keys):
    from .plotting import plot_loss_curves

    plot_loss_curves(history, path, keys)


def cmd_train_detector(args):
    cfg = _train_config(args, "detector")
    manifest = load_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", {"command": "train-detector", "train": cfg.to_json()})
    ckpt, history = train_detector(manifest, cfg, history_path=out / "detector_loss.csv")
    ckpt.save(out / "detector.ckpt")
    if _figures(args):
        _plot_history(history, out / "detector_loss.png", ["recon", "detector", "total"])
    return {"checkpoint": str(out / "detector.ckpt"), "steps": len(history),
            "final_total": history[-1]["total"]}


def cmd_train_regressor(args):
    cfg = _train_config(args, "regressor")
    manifest = load_manifest(args.manifest)
    detector = ModelCheckpoint.load(args.detector)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", {"command": "train-regressor", "train": cfg.to_json(),
                                      "detector_config_hash": detector.config_hash})
    ckpt, history = train_regressor(manifest, detector, cfg, history_path=out / "regressor_loss.csv")
    ckpt.save(out / "regressor.ckpt")
    if _figures(args):
        _plot_history(history, out / "regressor_loss.png", ["corn"])
    return {"checkpoint": str(out / "regressor.ckpt"), "steps": len(history),
            "final_corn": history[-1]["corn"]}


def _predictor(args):
    detector = ModelCheckpoint.load(args.detector)
    regressor = ModelCheckpoint.load(args.regressor) if args.regressor else None
    return Predictor(detector, regressor)


def cmd_eval(args):
    manifest = load_manifest(args.manifest)
    predictor = _predictor(args)
    seqs = manifest.sequences(args.split, T=predictor.T)
    if not seqs:
        raise UsageError(f"manifest has no videos in split {args.split!r}")
    mask_dir = Path(args.masks) if args.masks else Path(args.manifest).parent / "masks"
    masks = load_masks(mask_dir, [s.id for s in seqs]) if mask_dir.is_dir() else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", {"command": "eval", "split": args.split,
                                      "workers": args.workers,
                                      "detector": predictor.detector_ckpt.config_hash})
    K = predictor.regressor.config.K if predictor.regressor is not None else 4
    report = evaluate(predictor, seqs, masks, K=K, workers=args.workers,
                      heatmap_dir=out / "heatmaps", png=_figures(args))
    write_report(out / "report.json", report)
    if report.confusion is not None:
        write_confusion_csv(out / "confusion.csv", report.confusion)
        if _figures(args):
            from .plotting import plot_confusion

            plot_confusion(report.confusion, out / "confusion.png")
    with (out / "scores.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "token", "score"])
        for seq in seqs:
            res = predictor(seq)
            for t, s in enumerate(res.scores):
                writer.writerow([seq.id, t, repr(float(s))])
    return {"report": str(out / "report.json"), "frame_auc": report.frame_auc,
            "accuracy": report.accuracy, "mae": report.mae, "mse": report.mse}


def cmd_infer(args):
    predictor = _predictor(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for path in args.features:
        seq = load_feature_file(path)
        res = predictor(seq)
        target = out / f"{seq.id}.json"
        _write_json(target, res.to_json())
        if _figures(args):
            from .plotting import plot_scores

            plot_scores(res.scores, None, out / f"{seq.id}_scores.png", title=seq.id)
        written.append(str(target))
    return {"outputs": written}


def _add_common(p, train=False):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--config", help="JSON file of settings; flags override it")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    if train:
        p.add_argument("--manifest", required=True, help="dataset manifest.json")
        p.add_argument("--preset", choices=sorted(PRESETS), default="paper",
                       help="base settings (default: paper)")
        p.add_argument("--epochs", type=int, help="training epochs")
        p.add_argument("--lr", type=float, help="Adam learning rate")
        p.add_argument("--batch-size", type=int, dest="batch_size", help="batch size")
        p.add_argument("--levels", type=int, help="CTST pyramid levels")
        p.add_argument("--model-dim", type=int, dest="model_dim", help="CTST width m")


def build_parser():
    parser = _Parser(prog="wtal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--n-train", type=int, dest="n_train", help="training videos per level")
    p.add_argument("--n-test", type=int, dest="n_test", help="test videos per level")
    p.add_argument("--T", type=int, help="tokens per video")
    p.add_argument("--D", type=int, help="feature width")
    p.add_argument("--mu", type=float, help="burst mean shift")
    p.add_argument("--sigma", type=float, help="token noise scale")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-detector", help="phase 1: OE + CTST + detector")
    _add_common(p, train=True)
    p.add_argument("--lambda1", type=float, help="hinge weight")
    p.add_argument("--lambda2", type=float, help="pseudo-label weight")
    p.add_argument("--sref", type=_sref, help="pseudo-label threshold: a number or 'mean'")
    p.add_argument("--loss-mode", choices=["diff", "sum"], dest="loss_mode",
                   help="pseudo-label term: |err_t - err_a| or err_t + err_a")
    p.add_argument("--freeze-oe", action="store_const", const=True, dest="freeze_oe",
                   help="do not train the outlier embedder")
    p.set_defaults(func=cmd_train_detector)

    p = sub.add_parser("train-regressor", help="phase 2: severity regressor on a frozen detector")
    _add_common(p, train=True)
    p.add_argument("--detector", required=True, help="detector checkpoint")
    p.set_defaults(func=cmd_train_regressor)

    for name, func, text in (("eval", cmd_eval, "metrics over a manifest split"),
                             ("infer", cmd_infer, "per-video scores and severity")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        p.add_argument("--detector", required=True, help="detector checkpoint")
        p.add_argument("--regressor", help="regressor checkpoint")
        p.add_argument("--workers", type=int, default=1, help="parallel evaluation workers")
        if name == "eval":
            p.add_argument("--manifest", required=True, help="dataset manifest.json")
            p.add_argument("--split", default="test", choices=["train", "test"])
            p.add_argument("--masks", help="directory of per-video mask JSON files")
        else:
            p.add_argument("--features", nargs="+", required=True, help="feature files")
        p.set_defaults(func=func)
    return parser


def _fail(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except WtalError as exc:
        return _fail(exc.kind, str(exc), EXIT_FAILURE)
    except FileNotFoundError as exc:
        return _fail("missing_file", str(exc), EXIT_FAILURE)
    except (OSError, ValueError, TypeError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_FAILURE)
    sys.stdout.write(json.dumps(summary, default=_jsonable) + "\n")
    return 0


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


if __name__ == "__main__":
    sys.exit(main())
