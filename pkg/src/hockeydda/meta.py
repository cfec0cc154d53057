"""Per-player fast adaptation: cloning loss, inner/outer loops, meta-training.

The meta-objective is min over initial parameters of the summed validation
loss after a few inner gradient steps on each player's demo data.  The
second-order mode differentiates through the inner updates exactly, using
forward-over-reverse Hessian-vector products of the cloning loss; the
first-order mode treats the adapted parameters as constants.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, fields
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from . import nets
from .errors import (ConfigurationError, EmptyInputError, NumericStateError,
                     UnsupportedModeError)
from .nets import ParamVector

SECOND_ORDER = "second_order"
FIRST_ORDER = "first_order"

POLICY_DIMS = (8, 80, 80, 80, 2)


class Transition(NamedTuple):
    observation: np.ndarray  # (8,)
    action: np.ndarray       # (2,)


@dataclass(frozen=True)
class Trajectory:
    """Ordered (observation, action) transitions from one player."""
    observations: np.ndarray  # (n, 8)
    actions: np.ndarray       # (n, 2)
    source: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.observations.ndim != 2 or self.actions.ndim != 2:
            raise ConfigurationError("trajectory arrays must be 2-D")
        if self.observations.shape[0] != self.actions.shape[0]:
            raise ConfigurationError("observation/action counts differ")

    def __len__(self) -> int:
        return self.observations.shape[0]

    def transitions(self) -> Iterator[Transition]:
        for i in range(len(self)):
            yield Transition(self.observations[i], self.actions[i])

    def slice(self, start: int, stop: int) -> "Trajectory":
        return Trajectory(self.observations[start:stop], self.actions[start:stop],
                          self.source, self.seed)


@dataclass(frozen=True)
class DemoSplit:
    demo: Trajectory
    valid: Trajectory

    def __post_init__(self):
        if len(self.demo) == 0 or len(self.valid) == 0:
            raise EmptyInputError("both halves of a demo split must be non-empty")


@dataclass(frozen=True)
class MetaConfig:
    alpha: float = 0.01
    inner_steps: int = 1
    adapt_steps: int = 5
    meta_batch_size: int = 8
    grad_mode: str = SECOND_ORDER
    outer_optimizer: str = nets.ADAPTIVE_MOMENTS
    outer_lr: float = 1e-3
    iterations: int = 200
    policy_dims: tuple[int, ...] = POLICY_DIMS

    def __post_init__(self):
        if self.alpha < 0 or self.inner_steps < 0 or self.adapt_steps < 0:
            raise ConfigurationError("alpha and step counts must be non-negative")
        if self.meta_batch_size < 1:
            raise ConfigurationError("meta_batch_size must be at least 1")
        if self.grad_mode not in (SECOND_ORDER, FIRST_ORDER):
            raise ConfigurationError(f"unknown grad_mode {self.grad_mode!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "MetaConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown MetaConfig fields: {sorted(unknown)}")
        if "policy_dims" in d:
            d = dict(d, policy_dims=tuple(d["policy_dims"]))
        return cls(**d)


# ---------------------------------------------------------------------------
# Behavior-cloning loss and its derivatives
# ---------------------------------------------------------------------------

def bc_loss(params: ParamVector, data: Trajectory) -> float:
    """Mean squared error between policy output and demonstrated actions."""
    if len(data) == 0:
        raise EmptyInputError("empty trajectory")
    preds, _ = nets.mlp_forward(params, data.observations)
    diff = preds - data.actions
    return float(np.mean(diff * diff))


def bc_grad(params: ParamVector, data: Trajectory) -> tuple[np.ndarray, float]:
    """Gradient of bc_loss and the loss value, in one pass pair."""
    if len(data) == 0:
        raise EmptyInputError("empty trajectory")
    preds, cache = nets.mlp_forward(params, data.observations)
    diff = preds - data.actions
    upstream = (2.0 / diff.size) * diff
    grads, _ = nets.mlp_backward(params, cache, upstream)
    return grads, float(np.mean(diff * diff))


def bc_hvp(params: ParamVector, data: Trajectory, v: np.ndarray) -> np.ndarray:
    """Exact Hessian-vector product of bc_loss, forward-over-reverse.

    Tangents of the forward activations are propagated alongside the
    forward pass, then the backward pass is differentiated in the tangent
    direction.  FC layers with tanh/identity activations only.
    """
    layout = params.layout
    views = nets.fc_views(params.values, layout)
    tviews = nets.fc_views(np.asarray(v, dtype=np.float64), layout)

    X, Y = data.observations, data.actions
    a = X
    a_dot = np.zeros_like(X)
    acts = []      # (a_prev, a_prev_dot, out, out_dot, spec)
    for spec, (W, b), (Wd, bd) in zip(layout, views, tviews):
        z = a @ W.T + b
        z_dot = a @ Wd.T + a_dot @ W.T + bd
        if spec.activation == nets.TANH:
            out = np.tanh(z)
            out_dot = (1.0 - out * out) * z_dot
        else:
            out = z
            out_dot = z_dot
        acts.append((a, a_dot, out, out_dot, spec))
        a, a_dot = out, out_dot

    scale = 2.0 / (Y.size)
    d_a = scale * (a - Y)
    d_a_dot = scale * a_dot

    hvp = np.zeros_like(params.values)
    hviews = nets.fc_views(hvp, layout)
    for li in range(len(layout) - 1, -1, -1):
        a_prev, a_prev_dot, out, out_dot, spec = acts[li]
        if spec.activation == nets.TANH:
            s = 1.0 - out * out
            s_dot = -2.0 * out * out_dot
            dz = d_a * s
            dz_dot = d_a_dot * s + d_a * s_dot
        else:
            dz = d_a
            dz_dot = d_a_dot
        W, _ = views[li]
        Wd, _ = tviews[li]
        hW, hb = hviews[li]
        hW += dz_dot.T @ a_prev + dz.T @ a_prev_dot
        hb += dz_dot.sum(axis=0)
        d_a = dz @ W
        d_a_dot = dz_dot @ W + dz @ Wd
    return hvp


# ---------------------------------------------------------------------------
# Generic task form (flat-vector callables)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaskFns:
    """One adaptation task expressed as callables over flat parameter vectors.

    demo_hvp may be None when only first-order gradients are needed.
    """
    demo_loss: Callable[[np.ndarray], float]
    demo_grad: Callable[[np.ndarray], np.ndarray]
    valid_loss: Callable[[np.ndarray], float]
    valid_grad: Callable[[np.ndarray], np.ndarray]
    demo_hvp: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None


def clone_task(layout: Sequence[nets.LayerSpec], split: DemoSplit) -> TaskFns:
    layout = tuple(layout)

    def pv(theta):
        return ParamVector(np.asarray(theta, dtype=np.float64), layout)

    return TaskFns(
        demo_loss=lambda th: bc_loss(pv(th), split.demo),
        demo_grad=lambda th: bc_grad(pv(th), split.demo)[0],
        valid_loss=lambda th: bc_loss(pv(th), split.valid),
        valid_grad=lambda th: bc_grad(pv(th), split.valid)[0],
        demo_hvp=lambda th, v: bc_hvp(pv(th), split.demo, v))


def inner_adapt_fn(theta: np.ndarray, grad_fn, alpha: float, m: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if m == 0 or alpha == 0.0:
        return theta.copy()
    for _ in range(m):
        theta = theta - alpha * grad_fn(theta)
    return theta


def meta_objective_fn(theta: np.ndarray, tasks: Sequence[TaskFns],
                      alpha: float, m: int) -> float:
    if not tasks:
        raise EmptyInputError("empty task batch")
    total = 0.0
    for task in tasks:
        adapted = inner_adapt_fn(theta, task.demo_grad, alpha, m)
        total += task.valid_loss(adapted)
    return total


def meta_gradient_fn(theta: np.ndarray, tasks: Sequence[TaskFns], alpha: float,
                     m: int, mode: str = SECOND_ORDER
                     ) -> tuple[np.ndarray, float]:
    """Gradient of the meta-objective and the objective value.

    second_order back-propagates through every inner step:
    grad = prod_k (I - alpha * H_demo(theta_k))^T applied to the valid-set
    gradient at the adapted parameters.  Tasks accumulate in batch order.
    """
    if not tasks:
        raise EmptyInputError("empty task batch")
    theta = np.asarray(theta, dtype=np.float64)
    total_grad = np.zeros_like(theta)
    total_obj = 0.0
    for task in tasks:
        thetas = [theta]
        cur = theta
        for _ in range(m):
            if alpha != 0.0:
                cur = cur - alpha * task.demo_grad(cur)
            thetas.append(cur)
        total_obj += task.valid_loss(cur)
        g = task.valid_grad(cur)
        if mode == SECOND_ORDER and alpha != 0.0:
            if task.demo_hvp is None:
                raise UnsupportedModeError(
                    "second_order requires a Hessian-vector product for the task")
            for k in range(m - 1, -1, -1):
                g = g - alpha * task.demo_hvp(thetas[k], g)
        total_grad += g
    return total_grad, total_obj


# ---------------------------------------------------------------------------
# Spec-level operations over ParamVector / DemoSplit
# ---------------------------------------------------------------------------

def _check_fc_only(params: ParamVector) -> None:
    if any(spec.kind != nets.FC for spec in params.layout):
        raise UnsupportedModeError(
            "second-order adaptation is only supported for FC policies")


def inner_adapt(params: ParamVector, demo: Trajectory, alpha: float,
                m: int) -> ParamVector:
    """m full-batch cloning-loss gradient steps on the demo."""
    if m < 0:
        raise ConfigurationError("m must be non-negative")
    if m == 0 or alpha == 0.0:
        return params.copy()
    if len(demo) == 0:
        raise EmptyInputError("empty demo trajectory")
    theta = params.values
    for _ in range(m):
        g, _ = bc_grad(params.with_values(theta), demo)
        theta = theta - alpha * g
    return params.with_values(theta)


def meta_objective(params: ParamVector, batch: Sequence[DemoSplit],
                   cfg: MetaConfig) -> float:
    tasks = [clone_task(params.layout, split) for split in batch]
    return meta_objective_fn(params.values, tasks, cfg.alpha, cfg.inner_steps)


def meta_gradient(params: ParamVector, batch: Sequence[DemoSplit],
                  cfg: MetaConfig) -> np.ndarray:
    if cfg.grad_mode == SECOND_ORDER:
        _check_fc_only(params)
    tasks = [clone_task(params.layout, split) for split in batch]
    grad, _ = meta_gradient_fn(params.values, tasks, cfg.alpha,
                               cfg.inner_steps, cfg.grad_mode)
    return grad


def adapt_to_player(meta_params: ParamVector, demo: Trajectory,
                    cfg: MetaConfig) -> ParamVector:
    """Deployment-time adaptation: a few gradient steps on a fresh demo."""
    if len(demo) == 0:
        raise EmptyInputError("empty demo trajectory")
    return inner_adapt(meta_params, demo, cfg.alpha, cfg.adapt_steps)


def meta_train(cfg: MetaConfig, task_sampler: Callable[[int], Sequence[DemoSplit]],
               init_seed: int, log_path=None
               ) -> tuple[ParamVector, list[dict]]:
    """Outer training loop: sample batch, meta-gradient, optimizer step.

    `task_sampler(iteration)` must return the DemoSplit batch for that
    iteration (seeded by the caller for determinism).  Returns the final
    parameters and the per-iteration log; if log_path is given the log is
    also streamed there as JSON lines.
    """
    layout = nets.mlp_layout(cfg.policy_dims)
    params = nets.init_params(layout, init_seed)
    if cfg.grad_mode == SECOND_ORDER:
        _check_fc_only(params)
    opt = nets.make_optimizer(cfg.outer_optimizer, cfg.outer_lr)
    log: list[dict] = []
    sink = open(log_path, "w") if log_path is not None else None
    try:
        for it in range(cfg.iterations):
            t0 = time.perf_counter()
            batch = task_sampler(it)
            tasks = [clone_task(layout, split) for split in batch]
            grad, obj = meta_gradient_fn(params.values, tasks, cfg.alpha,
                                         cfg.inner_steps, cfg.grad_mode)
            if not np.isfinite(obj) or not np.all(np.isfinite(grad)):
                raise NumericStateError(
                    f"non-finite meta objective/gradient at iteration {it}: "
                    f"obj={obj}, |grad|={np.linalg.norm(grad)}")
            params, opt = nets.optimizer_step(opt, params, grad)
            rec = {"iter": it, "meta_objective": obj,
                   "grad_norm": float(np.linalg.norm(grad)),
                   "wall_ms": (time.perf_counter() - t0) * 1e3}
            log.append(rec)
            if sink is not None:
                sink.write(json.dumps(rec) + "\n")
    finally:
        if sink is not None:
            sink.close()
    return params, log
