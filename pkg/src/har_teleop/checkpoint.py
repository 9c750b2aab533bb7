"""Versioned model checkpoints: an npz container with a JSON header.

Tensors are stored row-major under their parameter names; batch-norm
running statistics and the training configuration ride along. Loading
validates every shape against the recorded model dimensions.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .gcn import (
    NUM_GCN_LAYERS,
    BatchNormParams,
    LinearParams,
    ModelParams,
    ShapeError,
)

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """The checkpoint file is malformed or inconsistent."""


def _all_tensors(params: ModelParams) -> dict[str, np.ndarray]:
    tensors = dict(params.named_parameters())
    for i, bn in enumerate(params.batch_norms, start=1):
        tensors[f"bn{i}.running_mean"] = bn.running_mean
        tensors[f"bn{i}.running_var"] = bn.running_var
    return tensors


def save_checkpoint(
    path: str | Path, params: ModelParams, train_config: Optional[dict] = None
) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "hidden_dim": params.hidden_dim,
        "num_classes": params.num_classes,
        "in_features": params.in_features,
        "dropout_rate": params.dropout_rate,
        "leaky_slope": params.leaky_slope,
        "bn_momentum": params.batch_norms[0].momentum,
        "bn_eps": params.batch_norms[0].eps,
        "dtype": str(np.dtype(params.dtype)),
        "train_config": train_config or {},
    }
    arrays = {k.replace(".", "__"): np.ascontiguousarray(v)
              for k, v in _all_tensors(params).items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                 **arrays)


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    """Rebuild parameters from disk; returns (params, train_config)."""
    try:
        with np.load(path) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    raw_meta = arrays.pop("__meta__", None)
    if raw_meta is None:
        raise CheckpointError("checkpoint has no metadata header")
    try:
        meta = json.loads(raw_meta.tobytes().decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt metadata header: {exc}") from None
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version!r}")

    tensors = {k.replace("__", "."): v for k, v in arrays.items()}

    def take(name: str) -> np.ndarray:
        if name not in tensors:
            raise CheckpointError(f"checkpoint missing tensor {name!r}")
        return tensors[name]

    gcn_layers = [
        LinearParams(take(f"gcn{i}.weight"), take(f"gcn{i}.bias"))
        for i in range(1, NUM_GCN_LAYERS + 1)
    ]
    batch_norms = [
        BatchNormParams(
            gamma=take(f"bn{i}.gamma"),
            beta=take(f"bn{i}.beta"),
            running_mean=take(f"bn{i}.running_mean"),
            running_var=take(f"bn{i}.running_var"),
            momentum=float(meta.get("bn_momentum", 0.1)),
            eps=float(meta.get("bn_eps", 1e-5)),
        )
        for i in range(1, NUM_GCN_LAYERS + 1)
    ]
    params = ModelParams(
        gcn_layers=gcn_layers,
        batch_norms=batch_norms,
        classifier=LinearParams(take("classifier.weight"), take("classifier.bias")),
        hidden_dim=int(meta["hidden_dim"]),
        num_classes=int(meta["num_classes"]),
        in_features=int(meta["in_features"]),
        dropout_rate=float(meta["dropout_rate"]),
        leaky_slope=float(meta["leaky_slope"]),
    )
    try:
        params.validate()
    except (ShapeError, ValueError) as exc:
        raise CheckpointError(f"checkpoint inconsistent: {exc}") from None
    return params, dict(meta.get("train_config", {}))
