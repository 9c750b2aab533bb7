#!/usr/bin/env python3
"""Start the streaming service with fresh random weights.

Useful for exercising the wire protocol and the browser console without
training a model first: recognition quality is meaningless, but windows,
debouncing, trajectories, and metrics all behave exactly as they do with
a real checkpoint. Pass --model to serve trained weights instead.
"""

import argparse
from pathlib import Path

import uvicorn

from har_teleop.checkpoint import load_checkpoint
from har_teleop.gcn import init_params
from har_teleop.pipeline import PipelineConfig
from har_teleop.server import create_app


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--model", default=None, help="optional checkpoint (.npz)")
    parser.add_argument("--hidden-dim", type=int, default=16)
    parser.add_argument("--window-size", type=int, default=40)
    parser.add_argument("--fps", type=float, default=20.0)
    parser.add_argument("--k-consecutive", type=int, default=5)
    parser.add_argument("--metrics-every", type=int, default=20)
    parser.add_argument(
        "--static-dir",
        default=str(Path(__file__).resolve().parent.parent / "frontend" / "dist"),
        help="browser console build to mount at /",
    )
    args = parser.parse_args()

    if args.model is not None:
        params, train_config = load_checkpoint(args.model)
        window = int(train_config.get("window_size", args.window_size))
    else:
        params = init_params(hidden_dim=args.hidden_dim, seed=0)
        window = args.window_size
    config = PipelineConfig(
        window_size=window,
        fps=args.fps,
        k_consecutive=args.k_consecutive,
        metrics_every=args.metrics_every,
    )
    app = create_app(params, config, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
