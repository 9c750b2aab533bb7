"""Shared oracles used by both the unit tests and the acceptance suite."""

import numpy as np

from har_teleop.gcn import cross_entropy_batch, model_backward, model_forward
from har_teleop.graphs import build_window_graph
from tests.conftest import frame_sequence


def param_tensor(params, name):
    return dict(params.named_parameters())[name]


def max_fd_relative_error(params, window_size=3, step=1e-5, label=2, rng_seed=123,
                          jitter_seed=11):
    """Max relative error of analytic gradients vs. central finite differences.

    Runs the model in training mode with a fixed dropout seed, so every
    loss evaluation sees identical masks and batch statistics are part of
    the differentiated function. Float64 parameters expected.
    """
    graph = build_window_graph(frame_sequence(window_size, jitter_seed=jitter_seed,
                                              scale=0.03))

    def loss_at(p):
        _, trace = model_forward(graph, p, mode="training", rng_seed=rng_seed)
        return cross_entropy_batch(trace.logits, np.array([label]))

    _, trace = model_forward(graph, params.copy(), mode="training", rng_seed=rng_seed)
    grads = model_backward(trace, label)

    worst = 0.0
    for name, arr in params.named_parameters():
        analytic = grads[name]
        for idx in np.ndindex(arr.shape):
            plus = params.copy()
            param_tensor(plus, name)[idx] += step
            minus = params.copy()
            param_tensor(minus, name)[idx] -= step
            fd = (loss_at(plus) - loss_at(minus)) / (2.0 * step)
            err = abs(fd - float(analytic[idx])) / max(abs(fd), abs(float(analytic[idx])), 1e-6)
            worst = max(worst, err)
    return worst


def permute_graph(features, edges, perm):
    """Relabel nodes so new node j carries old node perm[j]."""
    perm = np.asarray(perm)
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(len(perm))
    return features[perm], inverse[np.asarray(edges)]


def oracle_debounce_commands(actions, k, exec_steps):
    """Brute-force debounce oracle: commands as (step, action) pairs.

    Derives trigger points from the global trailing-run-length law (a
    command can only arise where a run of identical actions reaches
    exactly k), then walks those events chronologically against a robot
    that stays busy for `exec_steps` steps per trajectory. Completions
    occurring at step i are handled before the recognition at step i.
    """
    actions = list(actions)
    n = len(actions)
    run = np.ones(n, dtype=np.int64)
    for i in range(1, n):
        if actions[i] == actions[i - 1]:
            run[i] = run[i - 1] + 1
    triggers = [int(i) for i in np.flatnonzero(run == k)]

    commands = []
    busy_until = None  # step index at which the robot completes
    pending = None
    ti = 0
    while ti < len(triggers) or busy_until is not None:
        step = triggers[ti] if ti < len(triggers) else n
        if busy_until is not None and busy_until <= step:
            at = busy_until
            busy_until = None
            if pending is not None:
                commands.append((at, pending))
                busy_until = at + exec_steps
                pending = None
            continue
        if ti >= len(triggers):
            break
        ti += 1
        action = actions[step]
        if busy_until is None:
            commands.append((step, action))
            busy_until = step + exec_steps
        else:
            pending = action
    return commands


def drive_fsm(actions, k, exec_steps):
    """Run the production debouncer over a recognition stream.

    Mirrors the oracle's timing convention: each started trajectory
    occupies the robot for `exec_steps` steps, and a completion landing
    on step i is processed before that step's recognition.
    """
    from har_teleop.fsm import FsmConfig, FsmState, fsm_complete, fsm_step

    config = FsmConfig(k_consecutive=k)
    state = FsmState()
    commands = []
    busy_until = None
    for i, action in enumerate(actions):
        if busy_until is not None and busy_until <= i:
            at = busy_until
            state, started = fsm_complete(state)
            busy_until = at + exec_steps if started is not None else None
            if started is not None:
                commands.append((at, started))
        state, started = fsm_step(state, action, config)
        if started is not None:
            commands.append((i, started))
            busy_until = i + exec_steps
    while busy_until is not None and busy_until <= len(actions):
        at = busy_until
        state, started = fsm_complete(state)
        busy_until = at + exec_steps if started is not None else None
        if started is not None:
            commands.append((at, started))
    return commands
