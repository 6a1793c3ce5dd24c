"""Dense numerics substrate: linear/MLP classifiers with manual backprop.

Matrices are plain ``float64`` numpy arrays. A model is a stack of affine
layers with ReLU between them and a softmax on top; all trainers in the
package build on :func:`forward_cache`, :func:`backward` and :func:`gd_step`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

Layer = tuple[np.ndarray, np.ndarray]


class ModelKind(str, enum.Enum):
    LINEAR = "linear"
    MLP = "mlp"


class DimensionError(ValueError):
    """Raised when array shapes do not line up with a model."""


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    input_dim: int
    num_classes: int = 2
    hidden_widths: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.kind is ModelKind.LINEAR and self.hidden_widths:
            raise ValueError("linear models take no hidden layers")
        if self.kind is ModelKind.MLP and not self.hidden_widths:
            raise ValueError("MLP needs at least one hidden layer")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be positive")

    @classmethod
    def linear(cls, input_dim: int, num_classes: int = 2) -> "ModelSpec":
        return cls(ModelKind.LINEAR, input_dim, num_classes)

    @classmethod
    def mlp(cls, input_dim: int, hidden_widths, num_classes: int = 2) -> "ModelSpec":
        return cls(ModelKind.MLP, input_dim, num_classes, tuple(hidden_widths))

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_widths, self.num_classes]
        return list(zip(dims[:-1], dims[1:]))


@dataclass
class Model:
    """Weights ``W`` are stored as (fan_in, fan_out); biases as (fan_out,)."""

    spec: ModelSpec
    layers: list[Layer] = field(default_factory=list)

    def __post_init__(self):
        if len(self.layers) != len(self.spec.layer_dims):
            raise DimensionError("layer count does not match spec")
        for (W, b), (fi, fo) in zip(self.layers, self.spec.layer_dims):
            if W.shape != (fi, fo) or b.shape != (fo,):
                raise DimensionError(f"layer shape {W.shape}/{b.shape} != ({fi}, {fo})")

    def copy(self) -> "Model":
        return Model(self.spec, [(W.copy(), b.copy()) for W, b in self.layers])

    def flat_params(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in self.layers])

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in self.layers)


def init_model(spec: ModelSpec, seed: int) -> Model:
    """Uniform(-s, s) init with ``s = 1/sqrt(fan_in)`` for weights and biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in spec.layer_dims:
        s = 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-s, s, size=(fan_in, fan_out))
        b = rng.uniform(-s, s, size=fan_out)
        layers.append((W, b))
    return Model(spec, layers)


def zero_model(spec: ModelSpec) -> Model:
    return Model(spec, [(np.zeros((fi, fo)), np.zeros(fo)) for fi, fo in spec.layer_dims])


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. probabilities back to the logits."""
    return probs * (dprobs - np.sum(probs * dprobs, axis=1, keepdims=True))


def _check_input(layers: list[Layer], X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != layers[0][0].shape[0]:
        raise DimensionError(f"input of shape {X.shape} does not match fan_in {layers[0][0].shape[0]}")
    return X


def forward_cache(layers: list[Layer], X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Return logits and the list of per-layer inputs (post-activation)."""
    X = _check_input(layers, X)
    acts = [X]
    h = X
    for i, (W, b) in enumerate(layers):
        z = h @ W + b
        if i < len(layers) - 1:
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            h = z
    return h, acts


def backward(layers: list[Layer], acts: list[np.ndarray], dlogits: np.ndarray):
    """Backprop ``dlogits`` through the stack.

    Returns ``(grads, dinput)`` where ``grads`` mirrors ``layers``.
    """
    grads: list[Layer] = [None] * len(layers)  # type: ignore[list-item]
    g = dlogits
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        a = acts[i]
        grads[i] = (a.T @ g, g.sum(axis=0))
        g = g @ W.T
        if i > 0:
            g = g * (a > 0)
    return grads, g


def logits(model: Model, X: np.ndarray) -> np.ndarray:
    return forward_cache(model.layers, X)[0]


def forward(model: Model, X: np.ndarray) -> np.ndarray:
    """Per-row class probabilities."""
    return softmax(logits(model, X))


def grad(model: Model, X: np.ndarray, upstream: np.ndarray, wrt: str = "probs") -> list[Layer]:
    """Parameter gradients given a per-sample upstream gradient.

    ``upstream`` has shape (n, q) and is the derivative of the scalar loss
    with respect to either the softmax outputs (``wrt="probs"``) or the
    logits (``wrt="logits"``).
    """
    z, acts = forward_cache(model.layers, X)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != z.shape:
        raise DimensionError(f"upstream shape {upstream.shape} != output shape {z.shape}")
    if wrt == "probs":
        dz = softmax_backward(softmax(z), upstream)
    elif wrt == "logits":
        dz = upstream
    else:
        raise ValueError(f"unknown wrt={wrt!r}")
    return backward(model.layers, acts, dz)[0]


def gd_step(model: Model, grads: list[Layer], learning_rate: float) -> Model:
    """Return a new model with ``params - learning_rate * grads``."""
    if not learning_rate > 0:
        raise ValueError("learning rate must be positive")
    if len(grads) != len(model.layers):
        raise DimensionError("gradient structure does not match model")
    new = [(W - learning_rate * gW, b - learning_rate * gb) for (W, b), (gW, gb) in zip(model.layers, grads)]
    return Model(model.spec, new)


def minibatches(n: int, batch_size: int | None, rng: np.random.Generator | None):
    """Yield index arrays for one epoch; ``batch_size=None`` means full batch."""
    if batch_size is None or batch_size >= n:
        yield np.arange(n)
        return
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def compose(trunk: list[Layer], head: Model) -> Model:
    """Fuse shared trunk layers and a head into one standalone model."""
    if not trunk:
        return head.copy()
    widths = tuple(W.shape[1] for W, _ in trunk) + head.spec.hidden_widths
    spec = ModelSpec.mlp(trunk[0][0].shape[0], widths, head.spec.num_classes)
    return Model(spec, [(W.copy(), b.copy()) for W, b in trunk] + [(W.copy(), b.copy()) for W, b in head.layers])
