"""Command-line pipeline: synth -> plg -> train -> pld -> retrain -> eval.

Every stage is a pure function of its on-disk inputs, its config, and the
seed; re-running a stage with identical inputs produces byte-identical
artifacts.  Each stage writes a provenance manifest with config echo and
input digests next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io as dio
from . import synth as synthmod
from .labels import Stage
from .losses import DEFAULT_CLAMP_EPS, DEFAULT_LAMBDA
from .metrics import BinaryParse, report
from .network import (
    DEFAULT_THRESHOLD,
    FeatureBundle,
    ModelParams,
    TrainConfig,
    TrainExample,
    binarize,
    forward,
    train,
)
from .pld import DEFAULT_ALPHA, DEFAULT_K, PldConfig, denoise_with_predictions
from .plg import DEFAULT_EPSILON, DEFAULT_TAU, PlgConfig, generate_pseudo_labels
from .synth import ScenarioConfig, calibrate_tau, evaluate_pseudo_labels, generate_scenario


class StageError(Exception):
    """User-facing stage failure; message goes to stderr, exit code 2."""


def _require(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise StageError(f"missing {what}: {path}")
    return path


def cmd_synth(args) -> int:
    cfg = ScenarioConfig(
        n_videos=args.n_videos, T=args.segments, C=args.classes,
        max_events_per_modality=args.max_events,
        min_event_len=args.min_event_len, max_event_len=args.max_event_len,
        signal=args.signal, noise_sigma=args.noise_sigma,
        feature_dim=args.feature_dim, seed=args.seed,
    )
    scenario = generate_scenario(cfg)
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    outputs = []
    for video in scenario.videos:
        vdir = root / video.video_id
        vdir.mkdir(exist_ok=True)
        dio.write_manifest(vdir, video.video_id, video.labels)
        dio.write_csv(vdir / "audio.csv", video.features.audio)
        dio.write_csv(vdir / "visual.csv", video.features.visual)
        dio.write_csv(vdir / "clip_sim.csv", video.similarities.values, scenario.categories)
        dio.write_csv(vdir / "gt_audio.csv", video.gt_audio, scenario.categories)
        dio.write_csv(vdir / "gt_visual.csv", video.gt_visual, scenario.categories)
        outputs += [vdir / name for name in
                    ("manifest.json", "audio.csv", "visual.csv", "clip_sim.csv",
                     "gt_audio.csv", "gt_visual.csv")]
    dio.write_run_manifest(root / "run.json", "synth", cfg.__dict__ | {"categories": scenario.categories},
                           args.seed, [], outputs)
    print(f"wrote {len(scenario.videos)} videos under {root}")
    return 0


def _calibration_videos(video_dirs):
    # rebuild just enough of a scenario view for tau calibration from disk
    videos = []
    for vdir in video_dirs:
        labels = dio.load_labels(vdir)
        sims = dio.load_similarities(vdir, labels)
        gt_visual = dio.load_gt(vdir, "visual", labels)
        videos.append(synthmod.SyntheticVideo(
            video_id=vdir.name, gt_audio=gt_visual, gt_visual=gt_visual,
            labels=labels, features=None, similarities=sims,
        ))
    return videos


def cmd_plg(args) -> int:
    video_dirs = dio.list_videos(_require(args.data, "dataset directory"))
    if args.tau_auto:
        cal = _calibration_videos(video_dirs)
        tau = calibrate_tau(cal, fraction=args.calibration_fraction)
    else:
        tau = args.tau
    cfg = PlgConfig(tau=tau, prompt_id=args.prompt_id)
    inputs, outputs = [], []
    for vdir in video_dirs:
        labels = dio.load_labels(vdir)
        sims = dio.load_similarities(vdir, labels)
        pseudo = generate_pseudo_labels(sims, labels, cfg)
        dio.save_pseudo(vdir, pseudo, labels)
        inputs += [vdir / "manifest.json", vdir / "clip_sim.csv"]
        outputs.append(vdir / "plg.csv")
    dio.write_run_manifest(
        Path(args.data) / "run_plg.json", "plg",
        {"tau": cfg.tau, "prompt_id": cfg.prompt_id, "tau_auto": bool(args.tau_auto)},
        None, inputs, outputs,
    )
    print(f"tau={cfg.tau!r}: wrote pseudo labels for {len(video_dirs)} videos")
    return 0


def _load_dataset(video_dirs, stage: Stage):
    examples, skipped = [], []
    for vdir in video_dirs:
        labels = dio.load_labels(vdir)
        if labels.video_label.sum() == 0:
            skipped.append(vdir.name)
            continue
        audio, visual = dio.load_features(vdir)
        pseudo = dio.load_pseudo(vdir, stage, labels)
        examples.append(TrainExample(FeatureBundle(audio, visual), labels, pseudo))
    return examples, skipped


def _run_train(args, stage: Stage, stage_name: str) -> int:
    video_dirs = dio.list_videos(_require(args.data, "dataset directory"))
    for vdir in video_dirs:
        _require(vdir / f"{stage.value}.csv", f"{stage.value} labels (run the {stage.value} stage first)")
    examples, skipped = _load_dataset(video_dirs, stage)
    if not examples:
        raise StageError("no trainable videos (all have empty video labels)")
    cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        lam=args.lam, label_smoothing=args.label_smoothing,
        clamp_eps=args.clamp_eps, d_model=args.d_model, n_heads=args.n_heads,
        seed=args.seed,
    )
    params, epoch_log = train(examples, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params.save(out / "model.ckpt")
    inputs = []
    for vdir in video_dirs:
        inputs += [vdir / "manifest.json", vdir / "audio.csv", vdir / "visual.csv",
                   vdir / f"{stage.value}.csv"]
    dio.write_run_manifest(
        out / "run.json", stage_name,
        cfg.__dict__ | {"labels": stage.value, "skipped_videos": skipped,
                        "epoch_losses": epoch_log},
        args.seed, inputs, [out / "model.ckpt"],
    )
    print(f"trained on {len(examples)} videos for {cfg.epochs} epochs; "
          f"loss {epoch_log[0]:.4f} -> {epoch_log[-1]:.4f}" if epoch_log else "no epochs run")
    return 0


def cmd_train(args) -> int:
    return _run_train(args, Stage(args.labels), "train")


def cmd_retrain(args) -> int:
    return _run_train(args, Stage.PLD, "retrain")


def cmd_pld(args) -> int:
    ckpt_path = _require(args.checkpoint, "model checkpoint")
    video_dirs = dio.list_videos(_require(args.data, "dataset directory"))
    for vdir in video_dirs:
        _require(vdir / "plg.csv", "plg labels (run the plg stage first)")
    params = ModelParams.load(ckpt_path)
    cfg = PldConfig(k=args.k, alpha=args.alpha)
    inputs, outputs = [ckpt_path], []
    for vdir in video_dirs:
        labels = dio.load_labels(vdir)
        audio, visual = dio.load_features(vdir)
        pseudo = dio.load_pseudo(vdir, Stage.PLG, labels)
        preds = forward(FeatureBundle(audio, visual), params)
        refined = denoise_with_predictions(preds.P_v, pseudo, cfg, clamp_eps=args.clamp_eps)
        dio.save_pseudo(vdir, refined, labels)
        inputs += [vdir / "manifest.json", vdir / "audio.csv", vdir / "visual.csv", vdir / "plg.csv"]
        outputs.append(vdir / "pld.csv")
    dio.write_run_manifest(
        Path(args.data) / "run_pld.json", "pld",
        {"k": cfg.k, "alpha": cfg.alpha, "clamp_eps": args.clamp_eps},
        None, inputs, outputs,
    )
    print(f"denoised pseudo labels for {len(video_dirs)} videos")
    return 0


def cmd_eval(args) -> int:
    ckpt_path = _require(args.checkpoint, "model checkpoint")
    video_dirs = dio.list_videos(_require(args.data, "dataset directory"))
    params = ModelParams.load(ckpt_path)
    preds, gts, inputs = [], [], [ckpt_path]
    for vdir in video_dirs:
        labels = dio.load_labels(vdir)
        _require(vdir / "gt_audio.csv", "ground truth (eval needs gt_audio.csv/gt_visual.csv)")
        _require(vdir / "gt_visual.csv", "ground truth (eval needs gt_audio.csv/gt_visual.csv)")
        audio, visual = dio.load_features(vdir)
        pred = binarize(forward(FeatureBundle(audio, visual), params), args.threshold)
        gt = BinaryParse(dio.load_gt(vdir, "audio", labels), dio.load_gt(vdir, "visual", labels))
        preds.append(pred)
        gts.append(gt)
        inputs += [vdir / "manifest.json", vdir / "audio.csv", vdir / "visual.csv",
                   vdir / "gt_audio.csv", vdir / "gt_visual.csv"]
    rep = report(preds, gts, miou_threshold=args.miou)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dio.atomic_write_text(out / "report.json", json.dumps(rep.to_dict(), indent=1, sort_keys=True) + "\n")
    dio.write_run_manifest(
        out / "run.json", "eval",
        {"threshold": args.threshold, "miou": args.miou},
        None, inputs, [out / "report.json"],
    )
    seg = rep.segment_f
    print("segment-level  " + "  ".join(f"{k}={seg[k]:.4f}" for k in seg))
    evt = rep.event_f
    print("event-level    " + "  ".join(f"{k}={evt[k]:.4f}" for k in evt))
    return 0


def cmd_eval_labels(args) -> int:
    video_dirs = dio.list_videos(_require(args.data, "dataset directory"))
    stage = Stage(args.stage)
    tp = fp = fn = 0
    per_video = {}
    for vdir in video_dirs:
        labels = dio.load_labels(vdir)
        _require(vdir / f"{stage.value}.csv", f"{stage.value} labels")
        _require(vdir / "gt_visual.csv", "visual ground truth")
        pseudo = dio.load_pseudo(vdir, stage, labels)
        quality = evaluate_pseudo_labels(pseudo, dio.load_gt(vdir, "visual", labels))
        per_video[vdir.name] = quality.segment
        tp += quality.segment["tp"]
        fp += quality.segment["fp"]
        fn += quality.segment["fn"]
    precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
    recall = 1.0 if tp + fn == 0 else tp / (tp + fn)
    f = 1.0 if tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)
    doc = {
        "schema_version": 1,
        "stage": stage.value,
        "segment_micro": {"precision": precision, "recall": recall, "f": f,
                          "tp": tp, "fp": fp, "fn": fn},
        "per_video": per_video,
    }
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.out:
        dio.atomic_write_text(args.out, text)
    print(f"{stage.value} vs gt_visual: precision={precision:.4f} recall={recall:.4f} f={f:.4f}")
    return 0


def cmd_validate(args) -> int:
    video_dirs = dio.list_videos(_require(args.data, "dataset directory"))
    n_bad = 0
    for vdir in video_dirs:
        for violation in dio.validate_video_dir(vdir):
            print(f"{vdir.name}: {violation}", file=sys.stderr)
            n_bad += 1
    if n_bad:
        print(f"{n_bad} violation(s) found", file=sys.stderr)
        return 1
    print(f"{len(video_dirs)} videos: no violations")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="avparse", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-videos", type=int, default=50)
    p.add_argument("--segments", type=int, default=10, help="segments per video (T)")
    p.add_argument("--classes", type=int, default=8, help="event categories (C)")
    p.add_argument("--max-events", type=int, default=2)
    p.add_argument("--min-event-len", type=int, default=2)
    p.add_argument("--max-event-len", type=int, default=6)
    p.add_argument("--signal", type=float, default=4.0)
    p.add_argument("--noise-sigma", type=float, default=2.0)
    p.add_argument("--feature-dim", type=int, default=16)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("plg", help="generate segment-level pseudo labels from similarities")
    p.add_argument("--data", required=True)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--tau-auto", action="store_true",
                   help="calibrate tau on a split with gt_visual.csv instead of using --tau")
    p.add_argument("--calibration-fraction", type=float, default=0.2)
    p.add_argument("--prompt-id", default="P1")
    p.set_defaults(func=cmd_plg)

    for name, helptext in (("train", "train the parsing network on pseudo labels"),
                           ("retrain", "train again on denoised (pld) labels")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, required=True)
        if name == "train":
            p.add_argument("--labels", choices=["plg", "pld"], default="plg")
        p.add_argument("--epochs", type=int, default=30)
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--lr", type=float, default=3e-4)
        p.add_argument("--lam", type=float, default=DEFAULT_LAMBDA)
        p.add_argument("--label-smoothing", type=float, default=DEFAULT_EPSILON)
        p.add_argument("--clamp-eps", type=float, default=DEFAULT_CLAMP_EPS)
        p.add_argument("--d-model", type=int, default=64)
        p.add_argument("--n-heads", type=int, default=4)
        p.set_defaults(func=cmd_train if name == "train" else cmd_retrain)

    p = sub.add_parser("pld", help="denoise pseudo labels with a trained model")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--clamp-eps", type=float, default=DEFAULT_CLAMP_EPS)
    p.set_defaults(func=cmd_pld)

    p = sub.add_parser("eval", help="score a model against ground truth")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--miou", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("eval-labels", help="precision/recall of pseudo labels against gt_visual")
    p.add_argument("--data", required=True)
    p.add_argument("--stage", choices=["plg", "pld"], required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_labels)

    p = sub.add_parser("validate", help="report invariant violations in a dataset")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
