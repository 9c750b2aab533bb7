"""Command line front door: data generation, training, replay, serving."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional

from .actions import ACTION_NAMES, ActionClass
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ServiceConfig, load_service_config
from .datasets import (
    load_dataset,
    save_dataset,
    save_video_jsonl,
    split_by_video,
    window_dataset,
)
from .pipeline import PipelineConfig, replay
from .robot import load_trajectory_library
from .synthetic import generate_corpus, generate_synthetic_video
from .training import TrainConfig, ablate, evaluate, train, write_ablation_csv


def _print_metrics(name: str, metrics) -> None:
    per_class = " ".join(
        f"{cls}={acc:.3f}" for cls, acc in zip(ACTION_NAMES, metrics.per_class)
    )
    print(f"{name}: accuracy={metrics.accuracy:.4f} loss={metrics.loss:.4f} {per_class}")


def _progress(stats) -> None:
    print(
        f"epoch {stats.epoch:3d}  train_loss={stats.train_loss:.4f}  "
        f"valid_acc={stats.valid.accuracy:.4f}  lr={stats.lr:.2e}  "
        f"{stats.seconds:.1f}s",
        flush=True,
    )


def cmd_gen(args: argparse.Namespace) -> int:
    if args.stream is not None:
        video = generate_synthetic_video(
            ActionClass.from_name(args.stream),
            seed=args.seed,
            noise_level=args.noise,
            num_frames=args.num_frames,
            fps=args.fps,
        )
        save_video_jsonl(video, args.out)
        print(f"wrote {video.num_frames} frames of {args.stream} to {args.out}")
        return 0
    videos = generate_corpus(
        args.videos_per_class,
        noise_level=args.noise,
        seed=args.seed,
        num_frames=args.num_frames,
        fps=args.fps,
    )
    split_of = None
    if args.presplit:
        parts = split_by_video(videos, seed=args.seed)
        split_of = {
            v.video_id: name
            for name, part in zip(("train", "valid", "test"), parts)
            for v in part
        }
    save_dataset(videos, args.out, split_of=split_of)
    print(f"wrote {len(videos)} videos ({args.videos_per_class}/class) to {args.out}")
    return 0


def _train_config(args: argparse.Namespace) -> TrainConfig:
    config = TrainConfig(seed=args.seed, window_size=args.window_size)
    overrides = {}
    for name in ("hidden_dim", "batch_size", "max_epochs", "learning_rate",
                 "stop_at_val_accuracy"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return replace(config, **overrides)


def cmd_train(args: argparse.Namespace) -> int:
    videos, _ = load_dataset(args.data)
    config = _train_config(args)
    train_videos, valid_videos, test_videos = split_by_video(
        videos, config.split_ratios, seed=config.seed
    )
    train_set = window_dataset(train_videos, config.window_size)
    valid_set = window_dataset(valid_videos, config.window_size)
    test_set = window_dataset(test_videos, config.window_size)
    print(
        f"windows: train={len(train_set.samples)} valid={len(valid_set.samples)} "
        f"test={len(test_set.samples)}"
    )
    result = train(train_set, valid_set, config, progress=_progress)
    print(f"stopped: {result.stopped_reason} (best epoch {result.best_epoch})")
    _print_metrics("test", evaluate(result.params, test_set))
    save_checkpoint(args.out, result.params, train_config=asdict(config))
    print(f"saved model to {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    params, train_config = load_checkpoint(args.model)
    window_size = args.window_size or train_config.get("window_size")
    if window_size is None:
        raise ValueError("window size not in checkpoint; pass --window-size")
    videos, _ = load_dataset(args.data)
    seed = args.seed if args.seed is not None else train_config.get("seed", 0)
    parts = dict(zip(("train", "valid", "test"), split_by_video(videos, seed=seed)))
    subset = parts[args.split]
    metrics = evaluate(params, window_dataset(subset, window_size))
    _print_metrics(args.split, metrics)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    videos, _ = load_dataset(args.data)
    sizes = tuple(int(s) for s in args.sizes.split(","))
    config = _train_config(args)
    rows = ablate(videos, sizes, config, progress=_progress if args.verbose else None)
    write_ablation_csv(rows, args.out)
    for row in rows:
        if row.error:
            print(f"window {row.window_size:3d}: failed ({row.error})")
        else:
            print(
                f"window {row.window_size:3d}: samples={row.num_samples} "
                f"test_acc={row.test.accuracy:.4f}"
            )
    print(f"wrote {args.out}")
    return 0


def _pipeline_config(args: argparse.Namespace,
                     service: Optional[ServiceConfig]) -> PipelineConfig:
    base = service.pipeline_config() if service else PipelineConfig()
    overrides = {}
    if args.window_size is not None:
        overrides["window_size"] = args.window_size
    if args.fps is not None:
        overrides["fps"] = args.fps
    if args.k_consecutive is not None:
        overrides["k_consecutive"] = args.k_consecutive
    return replace(base, **overrides)


def cmd_replay(args: argparse.Namespace) -> int:
    service = load_service_config(args.config) if args.config else None
    model_path = args.model or (service.model_path if service else None)
    if model_path is None:
        raise ValueError("pass --model or a --config with model_path")
    params, train_config = load_checkpoint(model_path)
    config = _pipeline_config(args, service)
    if args.window_size is None and not args.config:
        saved = train_config.get("window_size")
        if saved:
            config = replace(config, window_size=saved)
    library_path = service.trajectory_library_path if service else None
    library = load_trajectory_library(library_path)
    lines, metrics = replay(
        args.file, params, config, library, speed=args.speed, out_path=args.out
    )
    if args.out is None:
        for line in lines:
            print(line)
    fill = metrics.fill_delay_seconds
    rate = metrics.update_rate_hz
    print(
        f"frames={metrics.frames_processed} recognitions={metrics.recognitions} "
        f"fill_delay={fill if fill is not None else 'n/a'} "
        f"update_rate={f'{rate:.2f}' if rate is not None else 'n/a'} "
        f"commands={len(metrics.command_timestamps)}",
        file=sys.stderr,
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    service = load_service_config(args.config) if args.config else None
    model_path = args.model or (service.model_path if service else None)
    if model_path is None:
        raise ValueError("pass --model or a --config with model_path")
    params, train_config = load_checkpoint(model_path)
    config = _pipeline_config(args, service)
    if args.window_size is None and not args.config:
        saved = train_config.get("window_size")
        if saved:
            config = replace(config, window_size=saved)
    library_path = service.trajectory_library_path if service else None
    library = load_trajectory_library(library_path)
    static_dir = args.static_dir or (service.static_dir if service else None)
    app = create_app(params, config, library, static_dir=static_dir)
    host = args.host or (service.host if service else "127.0.0.1")
    port = args.port or (service.port if service else 8765)
    print(f"serving on ws://{host}:{port}/ws (window={config.window_size}, "
          f"fps={config.fps}, k={config.k_consecutive})")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="har-teleop",
        description="Windowed skeleton-graph action recognition driving a "
                    "simulated robot",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset or stream")
    gen.add_argument("--out", required=True, help="dataset directory or stream file")
    gen.add_argument("--videos-per-class", type=int, default=40)
    gen.add_argument("--noise", type=float, default=0.02)
    gen.add_argument("--num-frames", type=int, default=150)
    gen.add_argument("--fps", type=float, default=20.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--stream", choices=ACTION_NAMES, default=None,
                     help="write one video as a replayable JSONL stream instead")
    gen.add_argument("--presplit", action="store_true",
                     help="record a train/valid/test assignment in the manifest")
    gen.set_defaults(func=cmd_gen)

    tr = sub.add_parser("train", help="train a model on a dataset directory")
    tr.add_argument("--data", required=True)
    tr.add_argument("--out", required=True, help="checkpoint path (.npz)")
    tr.add_argument("--window-size", type=int, default=40)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--hidden-dim", type=int, default=None)
    tr.add_argument("--batch-size", type=int, default=None)
    tr.add_argument("--max-epochs", type=int, default=None)
    tr.add_argument("--learning-rate", type=float, default=None)
    tr.add_argument("--stop-at-val-accuracy", type=float, default=None)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--split", choices=("train", "valid", "test"), default="test")
    ev.add_argument("--window-size", type=int, default=None)
    ev.add_argument("--seed", type=int, default=None)
    ev.set_defaults(func=cmd_eval)

    ab = sub.add_parser("ablate", help="sweep window sizes and write a CSV")
    ab.add_argument("--data", required=True)
    ab.add_argument("--out", required=True)
    ab.add_argument("--sizes", default="1,2,5,10,20,40,60,80,150")
    ab.add_argument("--window-size", type=int, default=40)  # unused base size
    ab.add_argument("--seed", type=int, default=0)
    ab.add_argument("--hidden-dim", type=int, default=None)
    ab.add_argument("--batch-size", type=int, default=None)
    ab.add_argument("--max-epochs", type=int, default=None)
    ab.add_argument("--stop-at-val-accuracy", type=float, default=None)
    ab.add_argument("--verbose", action="store_true")
    ab.set_defaults(func=cmd_ablate)

    rp = sub.add_parser("replay", help="run a recorded stream through the pipeline")
    rp.add_argument("--file", required=True)
    rp.add_argument("--model", default=None)
    rp.add_argument("--config", default=None)
    rp.add_argument("--out", default=None, help="write the event log here")
    rp.add_argument("--window-size", type=int, default=None)
    rp.add_argument("--fps", type=float, default=None)
    rp.add_argument("--k-consecutive", type=int, default=None)
    rp.add_argument("--speed", type=float, default=0.0,
                    help="real-time pacing multiplier; 0 runs flat out")
    rp.set_defaults(func=cmd_replay)

    sv = sub.add_parser("serve", help="run the websocket service")
    sv.add_argument("--config", default=None)
    sv.add_argument("--model", default=None)
    sv.add_argument("--window-size", type=int, default=None)
    sv.add_argument("--fps", type=float, default=None)
    sv.add_argument("--k-consecutive", type=int, default=None)
    sv.add_argument("--host", default=None)
    sv.add_argument("--port", type=int, default=None)
    sv.add_argument("--static-dir", default=None)
    sv.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, CheckpointError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
