"""From-scratch numpy LSTM stack for next-character prediction.

Two LSTM layers (defaults 128 and 64 units) feed a dense softmax over
the vocabulary.  Gates are ordered (input, forget, candidate, output);
all math runs in 64-bit floats.  Gradients come from exact
backpropagation through time, optimization is RMSProp, and checkpoints
are JSON files that round-trip bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from smilesgen.lexicon import Vocabulary

CHECKPOINT_VERSION = 1


class ParamCounts(NamedTuple):
    layer1: int
    layer2: int
    dense: int
    total: int


def param_count(vocab: int, units1: int, units2: int) -> ParamCounts:
    """Trainable element counts per layer and in total."""
    if vocab < 1 or units1 < 1 or units2 < 1:
        raise ValueError("all dimensions must be at least 1")

    def lstm(inputs: int, units: int) -> int:
        return 4 * ((inputs + units) * units + units)

    l1 = lstm(vocab, units1)
    l2 = lstm(units1, units2)
    dense = units2 * vocab + vocab
    return ParamCounts(l1, l2, dense, l1 + l2 + dense)


@dataclass
class LstmLayerParams:
    W: np.ndarray  # (input_dim, 4*units) input kernel
    U: np.ndarray  # (units, 4*units) recurrent kernel
    b: np.ndarray  # (4*units,)

    @property
    def input_dim(self) -> int:
        return self.W.shape[0]

    @property
    def units(self) -> int:
        return self.U.shape[0]

    def element_count(self) -> int:
        return self.W.size + self.U.size + self.b.size


@dataclass
class LstmParams:
    layer1: LstmLayerParams
    layer2: LstmLayerParams
    dense_w: np.ndarray  # (units2, vocab)
    dense_b: np.ndarray  # (vocab,)
    dropout_rate: float = 0.2

    @property
    def vocab_size(self) -> int:
        return self.dense_w.shape[1]

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [
            ("layer1.W", self.layer1.W),
            ("layer1.U", self.layer1.U),
            ("layer1.b", self.layer1.b),
            ("layer2.W", self.layer2.W),
            ("layer2.U", self.layer2.U),
            ("layer2.b", self.layer2.b),
            ("dense.W", self.dense_w),
            ("dense.b", self.dense_b),
        ]

    def element_count(self) -> int:
        return sum(arr.size for _, arr in self.named_arrays())


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def _init_layer(rng: np.random.Generator, input_dim: int, units: int) -> LstmLayerParams:
    W = _glorot(rng, input_dim, 4 * units)
    U = _glorot(rng, units, 4 * units)
    b = np.zeros(4 * units)
    b[units : 2 * units] = 1.0  # forget gate starts open
    return LstmLayerParams(W, U, b)


def init_params(
    vocab_size: int,
    units1: int = 128,
    units2: int = 64,
    dropout_rate: float = 0.2,
    rng: np.random.Generator | None = None,
) -> LstmParams:
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError("dropout_rate must lie in [0, 1)")
    if rng is None:
        rng = np.random.default_rng()
    layer1 = _init_layer(rng, vocab_size, units1)
    layer2 = _init_layer(rng, units1, units2)
    dense_w = _glorot(rng, units2, vocab_size)
    dense_b = np.zeros(vocab_size)
    return LstmParams(layer1, layer2, dense_w, dense_b, dropout_rate)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=axis, keepdims=True)


@dataclass
class LayerTrace:
    x: np.ndarray  # (B, T, input_dim)
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray  # all (B, T, units)


@dataclass
class ForwardTrace:
    layer1: LayerTrace
    layer2: LayerTrace
    dropout_mask: np.ndarray | None
    h_drop: np.ndarray  # (B, units2) final hidden state after dropout
    logits: np.ndarray  # (B, vocab)
    probs: np.ndarray  # (B, vocab)
    training: bool


def _layer_forward(layer: LstmLayerParams, x: np.ndarray) -> LayerTrace:
    batch, steps, _ = x.shape
    units = layer.units
    shape = (batch, steps, units)
    i_all = np.empty(shape)
    f_all = np.empty(shape)
    g_all = np.empty(shape)
    o_all = np.empty(shape)
    c_all = np.empty(shape)
    tc_all = np.empty(shape)
    h_all = np.empty(shape)
    h = np.zeros((batch, units))
    c = np.zeros((batch, units))
    xw = x @ layer.W
    for t in range(steps):
        z = xw[:, t] + h @ layer.U + layer.b
        i = sigmoid(z[:, :units])
        f = sigmoid(z[:, units : 2 * units])
        g = np.tanh(z[:, 2 * units : 3 * units])
        o = sigmoid(z[:, 3 * units :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        i_all[:, t] = i
        f_all[:, t] = f
        g_all[:, t] = g
        o_all[:, t] = o
        c_all[:, t] = c
        tc_all[:, t] = tc
        h_all[:, t] = h
    return LayerTrace(x, i_all, f_all, g_all, o_all, c_all, tc_all, h_all)


def lstm_forward(
    params: LstmParams,
    x: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> ForwardTrace:
    """Run the full stack over a one-hot batch (B, T, vocab) or a single
    sequence (T, vocab)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[np.newaxis]
    if x.ndim != 3 or x.shape[2] != params.vocab_size:
        raise ValueError(
            f"input shape {x.shape} does not match vocabulary size {params.vocab_size}"
        )
    trace1 = _layer_forward(params.layer1, x)
    trace2 = _layer_forward(params.layer2, trace1.h)
    h_last = trace2.h[:, -1]
    mask = None
    if training and params.dropout_rate > 0.0:
        if rng is None:
            raise ValueError("training forward pass with dropout needs an rng")
        keep = 1.0 - params.dropout_rate
        mask = (rng.random(h_last.shape) < keep).astype(np.float64) / keep
        h_drop = h_last * mask
    else:
        h_drop = h_last
    logits = h_drop @ params.dense_w + params.dense_b
    probs = softmax(logits, axis=1)
    return ForwardTrace(trace1, trace2, mask, h_drop, logits, probs, training)


def cross_entropy(probs: np.ndarray, target: int) -> float:
    """Negative log-likelihood of the target index, clamped at 1e-12."""
    probs = np.asarray(probs)
    if probs.ndim != 1:
        raise ValueError("cross_entropy expects a single distribution")
    if not 0 <= target < probs.shape[0]:
        raise ValueError(f"target {target} outside distribution of size {probs.shape[0]}")
    return float(-np.log(max(probs[target], 1e-12)))


def batch_cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean clamped negative log-likelihood over a batch."""
    targets = np.asarray(targets, dtype=np.int64)
    picked = probs[np.arange(probs.shape[0]), targets]
    return float(np.mean(-np.log(np.maximum(picked, 1e-12))))


def _layer_backward(
    layer: LstmLayerParams, lt: LayerTrace, dh_seq: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    batch, steps, units = lt.h.shape
    da_all = np.empty((batch, steps, 4 * units))
    dh_next = np.zeros((batch, units))
    dc = np.zeros((batch, units))
    ut = layer.U.T
    for t in range(steps - 1, -1, -1):
        dh = dh_seq[:, t] + dh_next
        i = lt.i[:, t]
        f = lt.f[:, t]
        g = lt.g[:, t]
        o = lt.o[:, t]
        tc = lt.tanh_c[:, t]
        c_prev = lt.c[:, t - 1] if t > 0 else np.zeros((batch, units))
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        da = da_all[:, t]
        da[:, :units] = di * i * (1.0 - i)
        da[:, units : 2 * units] = df * f * (1.0 - f)
        da[:, 2 * units : 3 * units] = dg * (1.0 - g * g)
        da[:, 3 * units :] = do * o * (1.0 - o)
        dh_next = da @ ut
        dc = dc * f
    h_prev = np.concatenate(
        [np.zeros((batch, 1, units)), lt.h[:, :-1]], axis=1
    )
    flat_da = da_all.reshape(batch * steps, 4 * units)
    dW = lt.x.reshape(batch * steps, -1).T @ flat_da
    dU = h_prev.reshape(batch * steps, units).T @ flat_da
    db = flat_da.sum(axis=0)
    dx = da_all @ layer.W.T
    return dx, dW, dU, db


def backward(
    params: LstmParams, trace: ForwardTrace, targets: np.ndarray | int
) -> dict[str, np.ndarray]:
    """Gradients of the mean cross-entropy w.r.t. every parameter array.

    Keys follow LstmParams.named_arrays().
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    batch = trace.probs.shape[0]
    if targets.shape[0] != batch:
        raise ValueError("target count does not match batch size")
    dlogits = trace.probs.copy()
    dlogits[np.arange(batch), targets] -= 1.0
    dlogits /= batch

    grads: dict[str, np.ndarray] = {}
    grads["dense.W"] = trace.h_drop.T @ dlogits
    grads["dense.b"] = dlogits.sum(axis=0)
    dh_drop = dlogits @ params.dense_w.T
    if trace.dropout_mask is not None:
        dh_last = dh_drop * trace.dropout_mask
    else:
        dh_last = dh_drop

    steps = trace.layer2.h.shape[1]
    dh2 = np.zeros_like(trace.layer2.h)
    dh2[:, steps - 1] = dh_last
    dx2, dw2, du2, db2 = _layer_backward(params.layer2, trace.layer2, dh2)
    _, dw1, du1, db1 = _layer_backward(params.layer1, trace.layer1, dx2)
    grads["layer2.W"] = dw2
    grads["layer2.U"] = du2
    grads["layer2.b"] = db2
    grads["layer1.W"] = dw1
    grads["layer1.U"] = du1
    grads["layer1.b"] = db1
    return grads


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global norm is ≤ max_norm.

    Returns the pre-clip norm.
    """
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class OptimizerState:
    v: dict[str, np.ndarray]
    rho: float
    eps: float
    learning_rate: float


def rmsprop_init(
    params: LstmParams, learning_rate: float, rho: float = 0.9, eps: float = 1e-7
) -> OptimizerState:
    v = {name: np.zeros_like(arr) for name, arr in params.named_arrays()}
    return OptimizerState(v, rho, eps, learning_rate)


def rmsprop_step(
    params: LstmParams, grads: dict[str, np.ndarray], state: OptimizerState
) -> tuple[LstmParams, OptimizerState]:
    """One in-place RMSProp update: v ← ρv + (1−ρ)g², p ← p − lr·g/(√v+ε)."""
    for name, arr in params.named_arrays():
        g = grads[name]
        if g.shape != arr.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient entries in {name}")
        v = state.v[name]
        v *= state.rho
        v += (1.0 - state.rho) * g * g
        arr -= state.learning_rate * g / (np.sqrt(v) + state.eps)
    return params, state


def lstm_cell_step(
    layer: LstmLayerParams, x: np.ndarray, h: np.ndarray, c: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Single-character step used during sampling; returns (h, c)."""
    units = layer.units
    z = x @ layer.W + h @ layer.U + layer.b
    i = sigmoid(z[:, :units])
    f = sigmoid(z[:, units : 2 * units])
    g = np.tanh(z[:, 2 * units : 3 * units])
    o = sigmoid(z[:, 3 * units :])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


# --- checkpoints -----------------------------------------------------------


def save_checkpoint(params: LstmParams, vocab: Vocabulary, path: str) -> None:
    if params.vocab_size != vocab.size:
        raise ValueError(
            f"dense output width {params.vocab_size} does not match vocabulary size {vocab.size}"
        )
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "vocabulary": list(vocab.symbols),
        "dropout_rate": params.dropout_rate,
        "layers": [
            {
                "name": name,
                "input_dim": layer.input_dim,
                "units": layer.units,
                "W": layer.W.ravel().tolist(),
                "U": layer.U.ravel().tolist(),
                "b": layer.b.tolist(),
            }
            for name, layer in (("lstm_1", params.layer1), ("lstm_2", params.layer2))
        ],
        "dense": {
            "W": params.dense_w.ravel().tolist(),
            "b": params.dense_b.tolist(),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def _layer_from_payload(entry: dict) -> LstmLayerParams:
    input_dim = int(entry["input_dim"])
    units = int(entry["units"])
    W = np.asarray(entry["W"], dtype=np.float64)
    U = np.asarray(entry["U"], dtype=np.float64)
    b = np.asarray(entry["b"], dtype=np.float64)
    if W.size != input_dim * 4 * units or U.size != units * 4 * units or b.size != 4 * units:
        raise ValueError(f"checkpoint layer {entry.get('name')!r} has inconsistent shapes")
    return LstmLayerParams(
        W.reshape(input_dim, 4 * units), U.reshape(units, 4 * units), b
    )


def load_checkpoint(path: str) -> tuple[LstmParams, Vocabulary]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"corrupt checkpoint file: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValueError("corrupt checkpoint file: top level is not an object")
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version!r}")
    try:
        vocab = Vocabulary(payload["vocabulary"])
        layers = payload["layers"]
        layer1 = _layer_from_payload(layers[0])
        layer2 = _layer_from_payload(layers[1])
        dense = payload["dense"]
        dense_w = np.asarray(dense["W"], dtype=np.float64)
        dense_b = np.asarray(dense["b"], dtype=np.float64)
        dropout_rate = float(payload["dropout_rate"])
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"corrupt checkpoint file: missing field {exc}") from exc
    units2 = layer2.units
    if dense_b.size != vocab.size or dense_w.size != units2 * vocab.size:
        raise ValueError(
            "checkpoint dense layer does not match its vocabulary "
            f"({dense_b.size} outputs vs {vocab.size} symbols)"
        )
    if layer2.input_dim != layer1.units or layer1.input_dim != vocab.size:
        raise ValueError("checkpoint layer dimensions are inconsistent")
    params = LstmParams(
        layer1, layer2, dense_w.reshape(units2, vocab.size), dense_b, dropout_rate
    )
    return params, vocab
