"""Small dense softmax classifier with hand-derived gradients.

Matrices are plain ``float64`` numpy arrays, row-major, one sample per row.
A model with ``layer_dims = [d, h1, ..., K]`` has ``len(layer_dims) - 1``
affine layers; every layer but the last is followed by the hidden
activation, the last one produces the logits.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "tanh")
CHECKPOINT_MAGIC = b"OODMLP1"


class ShapeError(ValueError):
    """Raised when array shapes do not line up with the model."""


@dataclass
class MlpModel:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.layer_dims) < 2:
            raise ValueError("need at least input and output dims")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ShapeError("one weight matrix and bias per layer required")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[l], self.layer_dims[l + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise ShapeError(f"layer {l}: weight {w.shape}, bias {b.shape}, expected {expected}")

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )

    def params(self) -> list[np.ndarray]:
        """Parameters in checkpoint order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]

    @property
    def logits(self) -> np.ndarray:
        return self.post[-1]


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass
class MomentumState:
    velocity: list[np.ndarray] = field(default_factory=list)


def init_mlp(layer_dims, seed=0, activation="relu") -> MlpModel:
    """He-style fan-in scaled uniform init from a seeded generator."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(list(layer_dims), weights, biases, activation)


def _act(x, kind):
    return np.maximum(x, 0.0) if kind == "relu" else np.tanh(x)


def _act_grad(pre, post, kind):
    return (pre > 0).astype(np.float64) if kind == "relu" else 1.0 - post**2


def _check_batch(model: MlpModel, batch) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 1:
        batch = batch[None, :]
    if batch.ndim != 2 or batch.shape[1] != model.input_dim:
        raise ShapeError(f"batch shape {batch.shape} does not match input dim {model.input_dim}")
    return batch


def forward(model: MlpModel, batch) -> ForwardTrace:
    x = _check_batch(model, batch)
    pre, post = [], []
    a = x
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        a = z if l == model.depth - 1 else _act(z, model.activation)
        pre.append(z)
        post.append(a)
    if not np.all(np.isfinite(a)):
        raise FloatingPointError("non-finite logits")
    return ForwardTrace(x, pre, post)


def logits(model: MlpModel, batch) -> np.ndarray:
    return forward(model, batch).logits


def log_softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def backward_from(model: MlpModel, trace: ForwardTrace, layer: int, grad_post) -> Gradients:
    """Backpropagate an upstream gradient given at the output of ``layer``.

    Parameter gradients of layers above ``layer`` are zero.
    """
    if not 0 <= layer < model.depth:
        raise ShapeError(f"layer {layer} out of range for depth {model.depth}")
    grad_post = np.asarray(grad_post, dtype=np.float64)
    if grad_post.shape != trace.post[layer].shape:
        raise ShapeError(f"upstream gradient {grad_post.shape} != activation {trace.post[layer].shape}")
    gw = [np.zeros_like(w) for w in model.weights]
    gb = [np.zeros_like(b) for b in model.biases]
    g = grad_post
    for l in range(layer, -1, -1):
        if l != model.depth - 1:
            g = g * _act_grad(trace.pre[l], trace.post[l], model.activation)
        below = trace.post[l - 1] if l > 0 else trace.inputs
        gw[l] = below.T @ g
        gb[l] = g.sum(axis=0)
        g = g @ model.weights[l].T
    return Gradients(gw, gb, g)


def backward(model: MlpModel, trace: ForwardTrace, grad_logits) -> Gradients:
    return backward_from(model, trace, model.depth - 1, grad_logits)


def sgd_momentum_step(model: MlpModel, grads: Gradients, lr: float, state: MomentumState, momentum=0.9) -> MlpModel:
    """Classical momentum: v <- mu*v + g; theta <- theta - lr*v. Updates in place."""
    params = model.params()
    gparams = grads.params()
    if len(gparams) != len(params) or any(p.shape != g.shape for p, g in zip(params, gparams)):
        raise ShapeError("gradient shapes do not match model")
    if not state.velocity:
        state.velocity = [np.zeros_like(p) for p in params]
    for p, g, v in zip(params, gparams, state.velocity):
        v *= momentum
        v += g
        p -= lr * v
    return model


def cosine_lr(epoch: int, total_epochs: int, lr_initial: float) -> float:
    if total_epochs <= 0 or not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    return lr_initial * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))


def predict(model: MlpModel, batch) -> np.ndarray:
    return np.argmax(logits(model, batch), axis=1)


# checkpoint format: magic, u32 n_dims, u32 dims..., u8 tag length, tag,
# then W0, b0, W1, b1, ... as little-endian float64, row-major.

def dumps_checkpoint(model: MlpModel) -> bytes:
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", len(model.layer_dims)))
    buf.write(struct.pack(f"<{len(model.layer_dims)}I", *model.layer_dims))
    tag = model.activation.encode("ascii")
    buf.write(struct.pack("<B", len(tag)))
    buf.write(tag)
    for p in model.params():
        buf.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return buf.getvalue()


def loads_checkpoint(data: bytes) -> MlpModel:
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError("not an OODMLP1 checkpoint")
    try:
        pos = len(CHECKPOINT_MAGIC)
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        dims = list(struct.unpack_from(f"<{n}I", data, pos))
        pos += 4 * n
        (tlen,) = struct.unpack_from("<B", data, pos)
        pos += 1
        activation = data[pos : pos + tlen].decode("ascii")
        pos += tlen
    except struct.error as exc:
        raise ValueError(f"truncated checkpoint header: {exc}") from None
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        for shape in ((fan_in, fan_out), (fan_out,)):
            size = int(np.prod(shape)) * 8
            if pos + size > len(data):
                raise ValueError("truncated checkpoint body")
            arr = np.frombuffer(data, dtype="<f8", count=size // 8, offset=pos).astype(np.float64).reshape(shape)
            pos += size
            (weights if len(shape) == 2 else biases).append(arr)
    if pos != len(data):
        raise ValueError("trailing bytes in checkpoint")
    return MlpModel(dims, weights, biases, activation)


def save_checkpoint(model: MlpModel, path) -> None:
    from .io_utils import atomic_write_bytes

    atomic_write_bytes(Path(path), dumps_checkpoint(model))


def load_checkpoint(path) -> MlpModel:
    return loads_checkpoint(Path(path).read_bytes())
