"""Graph convolutional classifier: forward pass and exact backpropagation.

Three graph-convolution layers (hidden width 128), each followed by batch
normalization, Leaky ReLU and dropout, then global mean pooling and a
linear classification head over the four actions. Propagation uses the
symmetrically normalized adjacency with self-loops,
D^-1/2 (A + I) D^-1/2. Everything is plain numpy plus scipy sparse for the
adjacency multiply; gradients are derived by hand and are exact.

Probabilities and losses are always computed in float64 regardless of the
parameter dtype, so softmax outputs sum to 1 to within 1e-9.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .actions import NUM_ACTIONS
from .graphs import NODES_PER_FRAME, WindowGraph, spatial_edge_array, temporal_edge_array

IN_FEATURES = 2
NUM_GCN_LAYERS = 3


class NumericalError(RuntimeError):
    """Non-finite values appeared during a forward or backward pass."""


class ShapeError(ValueError):
    """Array shapes are inconsistent with the model configuration."""


# ---------------------------------------------------------------------------
# adjacency


def normalized_adjacency(
    num_nodes: int, edges: np.ndarray, dtype=np.float64
) -> sp.csr_matrix:
    """D^-1/2 (A + I) D^-1/2 for the given directed edge pairs.

    Duplicate edges collapse to a single binary entry; every node gets a
    self-loop. Edge (u, v) sends a message from u to v.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        raise ShapeError(f"edge endpoint out of range for {num_nodes} nodes")
    loops = np.arange(num_nodes, dtype=np.int64)
    rows = np.concatenate([edges[:, 1], loops])
    cols = np.concatenate([edges[:, 0], loops])
    adj = sp.csr_matrix(
        (np.ones(len(rows), dtype=np.float64), (rows, cols)),
        shape=(num_nodes, num_nodes),
    )
    adj.data[:] = 1.0  # coalesce duplicates to binary
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    adj = adj.multiply(inv_sqrt[:, None]).multiply(inv_sqrt[None, :])
    return adj.tocsr().astype(dtype)


def window_adjacency(window_size: int, dtype=np.float64) -> sp.csr_matrix:
    """Normalized adjacency shared by every standard window of this size."""
    n = window_size * NODES_PER_FRAME
    edges = np.concatenate(
        [spatial_edge_array(window_size), temporal_edge_array(window_size)], axis=0
    )
    return normalized_adjacency(n, edges, dtype=dtype)


def batched_adjacency(adj: sp.csr_matrix, batch_size: int) -> sp.csr_matrix:
    """Block-diagonal adjacency for a batch of identically shaped graphs."""
    if batch_size == 1:
        return adj
    return sp.block_diag([adj] * batch_size, format="csr")


# ---------------------------------------------------------------------------
# parameters


@dataclass
class LinearParams:
    weight: np.ndarray  # (d_in, d_out)
    bias: np.ndarray  # (d_out,)


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5


@dataclass
class ModelParams:
    """All learnable state of the classifier plus batch-norm buffers."""

    gcn_layers: list[LinearParams]
    batch_norms: list[BatchNormParams]
    classifier: LinearParams
    hidden_dim: int
    num_classes: int = NUM_ACTIONS
    in_features: int = IN_FEATURES
    dropout_rate: float = 0.3
    leaky_slope: float = 0.01

    @property
    def dtype(self) -> np.dtype:
        return self.gcn_layers[0].weight.dtype

    def named_parameters(self) -> Iterator[tuple[str, np.ndarray]]:
        """Trainable tensors only; running statistics are buffers."""
        for i, layer in enumerate(self.gcn_layers, start=1):
            yield f"gcn{i}.weight", layer.weight
            yield f"gcn{i}.bias", layer.bias
        for i, bn in enumerate(self.batch_norms, start=1):
            yield f"bn{i}.gamma", bn.gamma
            yield f"bn{i}.beta", bn.beta
        yield "classifier.weight", self.classifier.weight
        yield "classifier.bias", self.classifier.bias

    def copy(self) -> "ModelParams":
        return ModelParams(
            gcn_layers=[
                LinearParams(l.weight.copy(), l.bias.copy()) for l in self.gcn_layers
            ],
            batch_norms=[
                BatchNormParams(
                    bn.gamma.copy(),
                    bn.beta.copy(),
                    bn.running_mean.copy(),
                    bn.running_var.copy(),
                    bn.momentum,
                    bn.eps,
                )
                for bn in self.batch_norms
            ],
            classifier=LinearParams(
                self.classifier.weight.copy(), self.classifier.bias.copy()
            ),
            hidden_dim=self.hidden_dim,
            num_classes=self.num_classes,
            in_features=self.in_features,
            dropout_rate=self.dropout_rate,
            leaky_slope=self.leaky_slope,
        )

    def validate(self) -> None:
        h, c, d = self.hidden_dim, self.num_classes, self.in_features
        expect = [(d, h)] + [(h, h)] * (NUM_GCN_LAYERS - 1)
        if len(self.gcn_layers) != NUM_GCN_LAYERS or len(self.batch_norms) != NUM_GCN_LAYERS:
            raise ShapeError("model must have exactly three convolution layers")
        for i, (layer, shape) in enumerate(zip(self.gcn_layers, expect), start=1):
            if layer.weight.shape != shape or layer.bias.shape != (h,):
                raise ShapeError(f"gcn{i} has shape {layer.weight.shape}, expected {shape}")
        for i, bn in enumerate(self.batch_norms, start=1):
            for name in ("gamma", "beta", "running_mean", "running_var"):
                if getattr(bn, name).shape != (h,):
                    raise ShapeError(f"bn{i}.{name} has shape {getattr(bn, name).shape}")
            if np.any(bn.running_var < 0):
                raise ValueError(f"bn{i} running variance must be >= 0")
        if self.classifier.weight.shape != (h, c) or self.classifier.bias.shape != (c,):
            raise ShapeError(f"classifier has shape {self.classifier.weight.shape}")
        for name, arr in self.named_parameters():
            if not np.all(np.isfinite(arr)):
                raise NumericalError(f"non-finite values in {name}")


def init_params(
    hidden_dim: int = 128,
    num_classes: int = NUM_ACTIONS,
    in_features: int = IN_FEATURES,
    dropout_rate: float = 0.3,
    leaky_slope: float = 0.01,
    seed: int = 0,
    dtype=np.float32,
) -> ModelParams:
    """Glorot-uniform initialized parameters, deterministic per seed."""
    rng = np.random.default_rng(seed)

    def glorot(d_in: int, d_out: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (d_in + d_out))
        return rng.uniform(-limit, limit, size=(d_in, d_out)).astype(dtype)

    dims = [in_features] + [hidden_dim] * NUM_GCN_LAYERS
    gcn_layers = [
        LinearParams(glorot(dims[i], dims[i + 1]), np.zeros(hidden_dim, dtype=dtype))
        for i in range(NUM_GCN_LAYERS)
    ]
    batch_norms = [
        BatchNormParams(
            gamma=np.ones(hidden_dim, dtype=dtype),
            beta=np.zeros(hidden_dim, dtype=dtype),
            running_mean=np.zeros(hidden_dim, dtype=dtype),
            running_var=np.ones(hidden_dim, dtype=dtype),
        )
        for _ in range(NUM_GCN_LAYERS)
    ]
    classifier = LinearParams(
        glorot(hidden_dim, num_classes), np.zeros(num_classes, dtype=dtype)
    )
    params = ModelParams(
        gcn_layers=gcn_layers,
        batch_norms=batch_norms,
        classifier=classifier,
        hidden_dim=hidden_dim,
        num_classes=num_classes,
        in_features=in_features,
        dropout_rate=dropout_rate,
        leaky_slope=leaky_slope,
    )
    params.validate()
    return params


# ---------------------------------------------------------------------------
# single operations


def gcn_layer_forward(
    features: np.ndarray,
    edges: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray,
) -> np.ndarray:
    """One propagation step: D^-1/2 (A+I) D^-1/2 X W + b."""
    features = np.asarray(features)
    if features.dtype not in (np.float32, np.float64):
        features = features.astype(np.float64)
    if features.ndim != 2 or features.shape[1] != weight.shape[0]:
        raise ShapeError(
            f"features {features.shape} incompatible with weight {weight.shape}"
        )
    if bias.shape != (weight.shape[1],):
        raise ShapeError(f"bias {bias.shape} incompatible with weight {weight.shape}")
    adj = normalized_adjacency(features.shape[0], edges, dtype=features.dtype)
    return adj @ (features @ weight) + bias


def global_mean_pool(features: np.ndarray) -> np.ndarray:
    """Arithmetic mean over nodes; rejects empty graphs."""
    features = np.asarray(features)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ShapeError(f"cannot pool features of shape {features.shape}")
    return features.mean(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax in float64 along the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=-1, keepdims=True)


def cross_entropy_loss(logits: np.ndarray, label: int) -> float:
    """-log softmax(logits)[label] with log-sum-exp stabilization."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ShapeError("cross_entropy_loss expects a single logit vector")
    if not 0 <= label < logits.shape[0]:
        raise ValueError(f"label {label} out of range for {logits.shape[0]} classes")
    z = logits - logits.max()
    return float(np.log(np.exp(z).sum()) - z[label])


def cross_entropy_batch(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy over a batch of logit rows."""
    z = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= z.shape[1]:
        raise ValueError("label out of range")
    z = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(labels)), labels]))


# ---------------------------------------------------------------------------
# full model


@dataclass
class ForwardTrace:
    """Intermediates retained by a training-mode forward pass."""

    mode: str
    batch_size: int
    nodes_per_graph: int
    adjacency: Optional[sp.csr_matrix]
    layer_inputs: list[np.ndarray] = field(default_factory=list)
    bn_xhat: list[np.ndarray] = field(default_factory=list)
    bn_inv_std: list[np.ndarray] = field(default_factory=list)
    act_masks: list[np.ndarray] = field(default_factory=list)
    dropout_masks: list[Optional[np.ndarray]] = field(default_factory=list)
    pooled: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None
    probabilities: Optional[np.ndarray] = None
    params: Optional[ModelParams] = None


def _check_finite(arr: np.ndarray, stage: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values after {stage}")


def forward_batch(
    features: np.ndarray,
    adjacency: sp.csr_matrix,
    batch_size: int,
    params: ModelParams,
    mode: str = "inference",
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, ForwardTrace]:
    """Run the classifier over a batch of identically shaped graphs.

    ``features`` is the stacked node matrix of shape (batch * nodes, d) and
    ``adjacency`` the matching (block-diagonal) normalized adjacency. In
    training mode batch statistics are used and running statistics updated
    in place; dropout needs ``rng``. Inference is deterministic.
    Returns float64 probabilities of shape (batch, classes).
    """
    if mode not in ("training", "inference"):
        raise ValueError(f"unknown mode {mode!r}")
    training = mode == "training"
    if training and rng is None:
        raise ValueError("training mode requires an rng for dropout")
    x = np.asarray(features, dtype=params.dtype)
    if x.ndim == 3:
        x = x.reshape(-1, x.shape[-1])
    total_nodes = x.shape[0]
    if total_nodes % batch_size != 0:
        raise ShapeError(f"{total_nodes} nodes do not split into {batch_size} graphs")
    if adjacency.shape != (total_nodes, total_nodes):
        raise ShapeError(
            f"adjacency {adjacency.shape} does not match {total_nodes} nodes"
        )
    if x.shape[1] != params.in_features:
        raise ShapeError(f"expected {params.in_features} input features, got {x.shape[1]}")
    _check_finite(x, "input features")

    n = total_nodes // batch_size
    trace = ForwardTrace(
        mode=mode, batch_size=batch_size, nodes_per_graph=n,
        adjacency=adjacency if training else None,
        params=params if training else None,
    )
    keep = 1.0 - params.dropout_rate

    for i in range(NUM_GCN_LAYERS):
        layer, bn = params.gcn_layers[i], params.batch_norms[i]
        if training:
            trace.layer_inputs.append(x)
        x = adjacency @ (x @ layer.weight) + layer.bias
        _check_finite(x, f"gcn layer {i + 1}")

        if training:
            mean = x.mean(axis=0)
            centered = x - mean
            var = np.mean(centered * centered, axis=0)
            inv_std = 1.0 / np.sqrt(var + bn.eps)
            x_hat = centered * inv_std
            m = x.shape[0]
            unbiased = var * (m / (m - 1)) if m > 1 else var
            bn.running_mean[...] = (1 - bn.momentum) * bn.running_mean + bn.momentum * mean
            bn.running_var[...] = (1 - bn.momentum) * bn.running_var + bn.momentum * unbiased
            trace.bn_xhat.append(x_hat)
            trace.bn_inv_std.append(inv_std.astype(params.dtype))
        else:
            inv_std = 1.0 / np.sqrt(bn.running_var + bn.eps)
            x_hat = (x - bn.running_mean) * inv_std
        x = bn.gamma * x_hat + bn.beta
        _check_finite(x, f"batch norm {i + 1}")

        mask = x > 0
        x = np.where(mask, x, params.leaky_slope * x)
        if training:
            trace.act_masks.append(mask)

        if training and params.dropout_rate > 0.0:
            drop_mask = rng.random(x.shape, dtype=np.float32) >= params.dropout_rate
            x = x * drop_mask / keep
            trace.dropout_masks.append(drop_mask)
        elif training:
            trace.dropout_masks.append(None)

    pooled = x.reshape(batch_size, n, -1).mean(axis=1)
    logits = pooled @ params.classifier.weight + params.classifier.bias
    _check_finite(logits, "classifier")
    probs = softmax(logits)

    trace.pooled = pooled
    trace.logits = logits
    trace.probabilities = probs
    return probs, trace


def model_forward(
    graph: WindowGraph,
    params: ModelParams,
    mode: str = "inference",
    rng_seed: Optional[int] = None,
) -> tuple[np.ndarray, ForwardTrace]:
    """Classify one window graph; probabilities is a float64 4-vector."""
    adjacency = normalized_adjacency(
        graph.num_nodes, graph.all_edges(), dtype=params.dtype
    )
    rng = np.random.default_rng(rng_seed) if mode == "training" else None
    probs, trace = forward_batch(
        graph.node_features, adjacency, 1, params, mode=mode, rng=rng
    )
    return probs[0], trace


def backward_batch(trace: ForwardTrace, labels: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of mean cross-entropy w.r.t. every trainable tensor."""
    if trace.mode != "training" or trace.params is None:
        raise ValueError("gradients require a training-mode trace")
    params = trace.params
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    b, n = trace.batch_size, trace.nodes_per_graph
    if labels.shape[0] != b:
        raise ShapeError(f"{labels.shape[0]} labels for batch of {b}")
    adjacency = trace.adjacency
    grads: dict[str, np.ndarray] = {}

    dlogits = trace.probabilities.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits = (dlogits / b).astype(params.dtype)

    grads["classifier.weight"] = trace.pooled.T @ dlogits
    grads["classifier.bias"] = dlogits.sum(axis=0)
    dpooled = dlogits @ params.classifier.weight.T
    d = np.repeat(dpooled / n, n, axis=0)

    keep = 1.0 - params.dropout_rate
    for i in reversed(range(NUM_GCN_LAYERS)):
        layer, bn = params.gcn_layers[i], params.batch_norms[i]
        drop_mask = trace.dropout_masks[i]
        if drop_mask is not None:
            d = d * drop_mask / keep
        d = np.where(trace.act_masks[i], d, params.leaky_slope * d)

        x_hat = trace.bn_xhat[i]
        inv_std = trace.bn_inv_std[i]
        grads[f"bn{i + 1}.gamma"] = (d * x_hat).sum(axis=0)
        grads[f"bn{i + 1}.beta"] = d.sum(axis=0)
        dxhat = d * bn.gamma
        m = x_hat.shape[0]
        d = (inv_std / m) * (
            m * dxhat - dxhat.sum(axis=0) - x_hat * (dxhat * x_hat).sum(axis=0)
        )

        grads[f"gcn{i + 1}.bias"] = d.sum(axis=0)
        dmsg = adjacency @ d  # adjacency is symmetric
        grads[f"gcn{i + 1}.weight"] = trace.layer_inputs[i].T @ dmsg
        if i > 0:
            d = dmsg @ layer.weight.T

    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {name}")
    return grads


def model_backward(trace: ForwardTrace, label: int) -> dict[str, np.ndarray]:
    """Gradients for a single-graph trace."""
    return backward_batch(trace, np.array([label]))


def model_info(params: ModelParams) -> dict:
    """Lightweight metadata for handshakes and checkpoints."""
    return {
        "hidden_dim": params.hidden_dim,
        "num_classes": params.num_classes,
        "in_features": params.in_features,
        "dropout_rate": params.dropout_rate,
        "leaky_slope": params.leaky_slope,
        "dtype": str(np.dtype(params.dtype)),
    }
