"""From-scratch differentiable building blocks.

Tiny fully-connected and LSTM networks over flat 64-bit parameter vectors,
with exact reverse-mode gradients and a central finite-difference oracle
used by the test suite.  Everything here is pure: forward passes never
mutate parameters, optimizer steps return new vectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (ConfigurationError, EmptyInputError, NumericStateError,
                     ShapeError, AssetError)

FC = "fully_connected"
LSTM = "lstm"

TANH = "tanh"
IDENTITY = "identity"

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    input_dim: int
    output_dim: int
    activation: str = TANH  # fully_connected only

    def __post_init__(self):
        if self.kind not in (FC, LSTM):
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        if self.input_dim <= 0 or self.output_dim <= 0:
            raise ConfigurationError("layer dimensions must be positive")
        if self.kind == FC and self.activation not in (TANH, IDENTITY):
            raise ConfigurationError(f"unknown activation {self.activation!r}")

    @property
    def size(self) -> int:
        if self.kind == FC:
            return self.output_dim * self.input_dim + self.output_dim
        # LSTM gate order: input, forget, cell, output.  Per layer:
        # Wx (4H, in), Wh (4H, H), b (4H,)
        h = self.output_dim
        return 4 * h * (self.input_dim + h + 1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "input_dim": self.input_dim,
                "output_dim": self.output_dim, "activation": self.activation}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(d["kind"], d["input_dim"], d["output_dim"],
                   d.get("activation", TANH))


def layout_size(layout: Sequence[LayerSpec]) -> int:
    return sum(spec.size for spec in layout)


def mlp_layout(dims: Sequence[int], hidden_activation: str = TANH,
               output_activation: str = TANH) -> tuple[LayerSpec, ...]:
    """FC layer chain for consecutive widths (last layer gets output_activation)."""
    if len(dims) < 2:
        raise ConfigurationError("need at least input and output widths")
    specs = []
    for i in range(len(dims) - 1):
        act = output_activation if i == len(dims) - 2 else hidden_activation
        specs.append(LayerSpec(FC, dims[i], dims[i + 1], act))
    return tuple(specs)


def lstm_layout(input_dim: int, hidden: int, layers: int) -> tuple[LayerSpec, ...]:
    specs = []
    for i in range(layers):
        specs.append(LayerSpec(LSTM, input_dim if i == 0 else hidden, hidden))
    return tuple(specs)


@dataclass(frozen=True)
class ParamVector:
    values: np.ndarray
    layout: tuple[LayerSpec, ...]

    def __post_init__(self):
        expected = layout_size(self.layout)
        if self.values.shape != (expected,):
            raise ShapeError(
                f"parameter vector length {self.values.shape} does not match "
                f"layout size {expected}")

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(np.asarray(values, dtype=np.float64), self.layout)

    def copy(self) -> "ParamVector":
        return self.with_values(self.values.copy())


def fc_views(values: np.ndarray, layout: Sequence[LayerSpec]):
    """(W, b) views per FC layer; W is row-major (output_dim, input_dim)."""
    out = []
    off = 0
    for spec in layout:
        if spec.kind != FC:
            raise ShapeError("fc_views called on a non-FC layout")
        n_w = spec.output_dim * spec.input_dim
        W = values[off:off + n_w].reshape(spec.output_dim, spec.input_dim)
        b = values[off + n_w:off + n_w + spec.output_dim]
        out.append((W, b))
        off += spec.size
    return out


def lstm_views(values: np.ndarray, layout: Sequence[LayerSpec]):
    """(Wx, Wh, b) views per LSTM layer, gates stacked input/forget/cell/output."""
    out = []
    off = 0
    for spec in layout:
        if spec.kind != LSTM:
            raise ShapeError("lstm_views called on a non-LSTM layout")
        h, d = spec.output_dim, spec.input_dim
        Wx = values[off:off + 4 * h * d].reshape(4 * h, d)
        off += 4 * h * d
        Wh = values[off:off + 4 * h * h].reshape(4 * h, h)
        off += 4 * h * h
        b = values[off:off + 4 * h]
        off += 4 * h
        out.append((Wx, Wh, b))
    return out


def init_params(layout: Sequence[LayerSpec], seed: int) -> ParamVector:
    """Uniform fan-based weight init, zero biases, LSTM forget bias 1."""
    if not layout:
        raise ConfigurationError("empty layout")
    rng = np.random.default_rng(seed)
    values = np.zeros(layout_size(layout), dtype=np.float64)
    off = 0
    for spec in layout:
        if spec.kind == FC:
            n_w = spec.output_dim * spec.input_dim
            bound = np.sqrt(6.0 / (spec.input_dim + spec.output_dim))
            values[off:off + n_w] = rng.uniform(-bound, bound, n_w)
            off += spec.size  # biases stay zero
        else:
            h, d = spec.output_dim, spec.input_dim
            bound = np.sqrt(6.0 / (d + h + h))
            values[off:off + 4 * h * d] = rng.uniform(-bound, bound, 4 * h * d)
            off += 4 * h * d
            values[off:off + 4 * h * h] = rng.uniform(-bound, bound, 4 * h * h)
            off += 4 * h * h
            values[off + h:off + 2 * h] = 1.0  # forget-gate bias
            off += 4 * h
    return ParamVector(values, tuple(layout))


# ---------------------------------------------------------------------------
# MLP forward / backward
# ---------------------------------------------------------------------------

def _apply_activation(z: np.ndarray, activation: str) -> np.ndarray:
    return np.tanh(z) if activation == TANH else z


def mlp_forward(params: ParamVector, x) -> tuple[np.ndarray, list]:
    """Run the FC stack.  Accepts a single input (d,) or a batch (n, d).

    Returns (output, cache); the cache holds per-layer inputs and
    pre-activations for the backward pass.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.ndim != 2 or a.shape[1] != params.layout[0].input_dim:
        raise ShapeError(
            f"input width {a.shape[-1] if a.ndim else '?'} does not match "
            f"first layer input_dim {params.layout[0].input_dim}")
    cache = []
    for spec, (W, b) in zip(params.layout, fc_views(params.values, params.layout)):
        z = a @ W.T + b
        out = _apply_activation(z, spec.activation)
        cache.append((a, z, out))
        a = out
    return (a[0] if single else a), cache


def mlp_backward(params: ParamVector, cache: list, upstream
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Exact reverse-mode gradients.  Returns (flat grads, input grad)."""
    upstream = np.asarray(upstream, dtype=np.float64)
    single = upstream.ndim == 1
    d_out = upstream[None, :] if single else upstream
    if len(cache) != len(params.layout):
        raise ShapeError("cache does not match parameter layout")
    grads = np.zeros_like(params.values)
    views = fc_views(params.values, params.layout)
    gviews = fc_views(grads, params.layout)
    for li in range(len(params.layout) - 1, -1, -1):
        spec = params.layout[li]
        a_prev, z, out = cache[li]
        if d_out.shape != out.shape:
            raise ShapeError("upstream shape does not match forward output")
        if spec.activation == TANH:
            dz = d_out * (1.0 - out * out)
        else:
            dz = d_out
        W, _ = views[li]
        gW, gb = gviews[li]
        gW += dz.T @ a_prev
        gb += dz.sum(axis=0)
        d_out = dz @ W
    return grads, (d_out[0] if single else d_out)


# ---------------------------------------------------------------------------
# LSTM forward / backward (BPTT)
# ---------------------------------------------------------------------------

def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def lstm_forward(params: ParamVector, sequence) -> tuple[np.ndarray, list]:
    """Run the LSTM stack over a (T, d) sequence from zero initial state.

    Returns the top layer's final hidden state and the BPTT cache.
    """
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise EmptyInputError("lstm_forward needs a non-empty (T, d) sequence")
    if seq.shape[1] != params.layout[0].input_dim:
        raise ShapeError("sequence width does not match first LSTM input_dim")
    views = lstm_views(params.values, params.layout)
    cache = []
    layer_in = seq
    for spec, (Wx, Wh, b) in zip(params.layout, views):
        h_dim = spec.output_dim
        T = layer_in.shape[0]
        h = np.zeros(h_dim)
        c = np.zeros(h_dim)
        steps = []
        hs = np.empty((T, h_dim))
        for t in range(T):
            x_t = layer_in[t]
            pre = Wx @ x_t + Wh @ h + b
            i = _sigmoid(pre[0:h_dim])
            f = _sigmoid(pre[h_dim:2 * h_dim])
            g = np.tanh(pre[2 * h_dim:3 * h_dim])
            o = _sigmoid(pre[3 * h_dim:4 * h_dim])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            steps.append((x_t, h, c, i, f, g, o, c_new, tc))
            h, c = h_new, c_new
            hs[t] = h_new
        cache.append((spec, steps, hs))
        layer_in = hs
    return layer_in[-1].copy(), cache


def lstm_backward(params: ParamVector, cache: list, upstream
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Backpropagation through time for the gradient of the final hidden state.

    `upstream` is d(loss)/d(final top-layer hidden).  Returns (flat grads,
    gradient w.r.t. the input sequence).
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    if len(cache) != len(params.layout):
        raise ShapeError("cache does not match parameter layout")
    grads = np.zeros_like(params.values)
    gviews = lstm_views(grads, params.layout)
    views = lstm_views(params.values, params.layout)

    T = len(cache[0][1])
    # d(loss)/d(h_t) flowing into each layer from above; top layer only gets
    # a contribution at the final step
    d_hs = None
    for li in range(len(params.layout) - 1, -1, -1):
        spec, steps, _hs = cache[li]
        h_dim = spec.output_dim
        Wx, Wh, _b = views[li]
        gWx, gWh, gb = gviews[li]
        if d_hs is None:
            d_hs = np.zeros((T, h_dim))
            d_hs[-1] = upstream
        d_x = np.zeros((T, spec.input_dim))
        dh_next = np.zeros(h_dim)
        dc_next = np.zeros(h_dim)
        for t in range(T - 1, -1, -1):
            x_t, h_prev, c_prev, i, f, g, o, c_new, tc = steps[t]
            dh = d_hs[t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            dpre = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o)])
            gWx += np.outer(dpre, x_t)
            gWh += np.outer(dpre, h_prev)
            gb += dpre
            d_x[t] = Wx.T @ dpre
            dh_next = Wh.T @ dpre
        d_hs = d_x
    return grads, d_hs


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------

def finite_diff_grad(loss_fn: Callable, params, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar loss over a flat parameter vector.

    `params` may be a ParamVector (loss_fn receives ParamVectors) or a plain
    ndarray (loss_fn receives ndarrays).  Test oracle; O(n) loss evaluations.
    """
    if isinstance(params, ParamVector):
        theta = params.values

        def evaluate(v):
            return float(loss_fn(params.with_values(v)))
    else:
        theta = np.asarray(params, dtype=np.float64)

        def evaluate(v):
            return float(loss_fn(v))

    grad = np.zeros_like(theta)
    for idx in range(theta.size):
        bumped = theta.copy()
        bumped[idx] = theta[idx] + eps
        hi = evaluate(bumped)
        bumped[idx] = theta[idx] - eps
        lo = evaluate(bumped)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericStateError("non-finite loss during finite differencing")
        grad[idx] = (hi - lo) / (2.0 * eps)
    return grad


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

SGD = "sgd"
ADAPTIVE_MOMENTS = "adaptive_moments"


@dataclass(frozen=True)
class OptimizerState:
    kind: str
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0


def make_optimizer(kind: str, lr: float) -> OptimizerState:
    if kind not in (SGD, ADAPTIVE_MOMENTS):
        raise ConfigurationError(f"unknown optimizer kind {kind!r}")
    return OptimizerState(kind=kind, lr=lr)


def optimizer_step(state: OptimizerState, params: ParamVector,
                   grads: np.ndarray) -> tuple[ParamVector, OptimizerState]:
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.values.shape:
        raise ShapeError("gradient shape does not match parameters")
    if state.kind == SGD:
        return params.with_values(params.values - state.lr * grads), state
    m = state.m if state.m is not None else np.zeros_like(params.values)
    v = state.v if state.v is not None else np.zeros_like(params.values)
    t = state.t + 1
    m = state.beta1 * m + (1.0 - state.beta1) * grads
    v = state.beta2 * v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_vals = params.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params.with_values(new_vals), replace(state, m=m, v=v, t=t)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, params: ParamVector, meta: dict | None = None) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "layout": [spec.to_dict() for spec in params.layout],
        "values": params.values.tolist(),
        "meta": dict(meta or {}),
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[ParamVector, dict]:
    p = Path(path)
    if not p.exists():
        raise AssetError(f"checkpoint not found: {p}")
    doc = json.loads(p.read_text())
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ConfigurationError(
            f"unsupported checkpoint version {doc.get('format_version')}")
    layout = tuple(LayerSpec.from_dict(d) for d in doc["layout"])
    values = np.asarray(doc["values"], dtype=np.float64)
    if values.shape != (layout_size(layout),):
        raise ConfigurationError("checkpoint value count does not match its layout")
    return ParamVector(values, layout), doc.get("meta", {})
