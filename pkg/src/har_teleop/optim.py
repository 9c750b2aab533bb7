"""AdamW with decoupled weight decay and a reduce-on-plateau scheduler."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .gcn import ModelParams

log = logging.getLogger(__name__)


@dataclass
class AdamWState:
    """Moment accumulators and hyperparameters, one slot per named tensor."""

    lr: float = 1e-3
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(
    params: ModelParams | Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamWState,
) -> bool:
    """Apply one decoupled-weight-decay update in place.

    theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta).
    ``params`` is the model or any name-to-array mapping. A non-finite
    gradient skips the whole update and reports; returns whether the
    update was applied.
    """
    if isinstance(params, ModelParams):
        named = dict(params.named_parameters())
    else:
        named = dict(params)
    for name in grads:
        if name not in named:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if not np.all(np.isfinite(grads[name])):
            log.warning("skipping update at step %d: non-finite gradient for %s",
                        state.step_count + 1, name)
            return False

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, theta in named.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.first_moment.setdefault(name, np.zeros_like(theta))
        v = state.second_moment.setdefault(name, np.zeros_like(theta))
        m[...] = state.beta1 * m + (1.0 - state.beta1) * g
        v[...] = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        theta -= state.lr * (update + state.weight_decay * theta)
    return True


@dataclass
class PlateauScheduler:
    """Halve the learning rate after a run of non-improving epochs.

    Improvement (a strictly higher validation accuracy than the best seen)
    resets the stagnation counter; once the counter reaches ``patience``
    the learning rate is reduced once by ``factor`` and the counter resets.
    The learning rate never increases and never drops below ``min_lr``.
    """

    factor: float = 0.5
    patience: int = 10
    min_lr: float = 1e-6
    best: float = -np.inf
    stagnant: int = 0

    def step(self, state: AdamWState, val_accuracy: float) -> float:
        if not 0.0 <= val_accuracy <= 1.0:
            raise ValueError(f"accuracy must be in [0, 1], got {val_accuracy}")
        if val_accuracy > self.best:
            self.best = val_accuracy
            self.stagnant = 0
        else:
            self.stagnant += 1
            if self.stagnant >= self.patience:
                state.lr = max(state.lr * self.factor, self.min_lr)
                self.stagnant = 0
        return state.lr
