"""Dense feedforward networks with hand-derived gradients.

Weights are (out, in+1) float64 matrices; the last column is the bias,
applied to a constant 1 appended to the layer input.  Hidden layers use
tanh, the final layer uses tanh or sigmoid.  All arithmetic is double
precision and fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TANH = "tanh"
SIGMOID = "sigmoid"
_ACTIVATIONS = (TANH, SIGMOID)


class DimensionError(ValueError):
    """Incompatible vector or matrix sizes."""


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Layer:
    weights: np.ndarray
    activation: str

    @property
    def input_size(self) -> int:
        return self.weights.shape[1] - 1

    @property
    def output_size(self) -> int:
        return self.weights.shape[0]


@dataclass
class DenseNetwork:
    layers: list[Layer]

    @property
    def input_size(self) -> int:
        return self.layers[0].input_size

    @property
    def output_size(self) -> int:
        return self.layers[-1].output_size

    def dims(self) -> list[int]:
        return [self.input_size] + [layer.output_size for layer in self.layers]

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            [Layer(layer.weights.copy(), layer.activation) for layer in self.layers]
        )


@dataclass
class ActivationTrace:
    """Per-layer extended inputs (with the trailing bias 1) and activations."""

    inputs: list[np.ndarray]
    activations: list[np.ndarray]

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]


def init_dense(dims, final_activation: str = TANH, seed: int = 0) -> DenseNetwork:
    """Fresh network with layer sizes `dims`, e.g. [24, 12, 12].

    Every entry of layer k, bias included, is drawn uniformly from
    [-2/sqrt(dims[k]+1), +2/sqrt(dims[k]+1)].  The scale keeps deep
    recursive compositions of these layers from contracting everything
    to a single point, which would leave nearly identical embeddings
    (and vanishing gradients) for structurally different inputs.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise DimensionError(f"need at least input and output sizes, got {dims}")
    if min(dims) < 1:
        raise DimensionError(f"all layer sizes must be positive, got {dims}")
    if final_activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {final_activation!r}")
    rng = np.random.default_rng(seed)
    layers = []
    last = len(dims) - 2
    for k in range(len(dims) - 1):
        bound = 2.0 / math.sqrt(dims[k] + 1)
        weights = rng.uniform(-bound, bound, size=(dims[k + 1], dims[k] + 1))
        layers.append(Layer(weights, final_activation if k == last else TANH))
    return DenseNetwork(layers)


def forward(net: DenseNetwork, x) -> ActivationTrace:
    """Run the network on a 1-D input, recording what backward needs."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_size,):
        raise DimensionError(
            f"input has shape {x.shape}, network expects ({net.input_size},)"
        )
    inputs, activations = [], []
    for layer in net.layers:
        ext = np.empty(x.shape[0] + 1)
        ext[:-1] = x
        ext[-1] = 1.0
        z = layer.weights @ ext
        x = np.tanh(z) if layer.activation == TANH else sigmoid(z)
        inputs.append(ext)
        activations.append(x)
    return ActivationTrace(inputs, activations)


def backward(net: DenseNetwork, trace: ActivationTrace, output_gradient):
    """Gradients of a scalar loss given d(loss)/d(output).

    Returns (input_gradient, per-layer weight gradients).  Derivatives
    are recovered from stored activations: tanh' = 1 - a^2 and
    sigmoid' = a(1 - a).
    """
    g = np.asarray(output_gradient, dtype=np.float64)
    if g.shape != (net.output_size,):
        raise DimensionError(
            f"output gradient has shape {g.shape}, network expects"
            f" ({net.output_size},)"
        )
    if len(trace.activations) != len(net.layers):
        raise DimensionError("trace does not match network depth")
    grads: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        a = trace.activations[k]
        if layer.activation == TANH:
            dact = 1.0 - a * a
        else:
            dact = a * (1.0 - a)
        delta = g * dact
        grads[k] = np.outer(delta, trace.inputs[k])
        g = (delta @ layer.weights)[:-1]
    return g, grads


def backward_from_delta(net: DenseNetwork, trace: ActivationTrace, final_delta):
    """Like backward, but takes the final layer's pre-activation delta
    d(loss)/dz directly instead of d(loss)/d(output).

    Cross-entropy through a sigmoid final layer reduces to the delta
    output - target with no activation-derivative factor; passing it
    here keeps that cancellation exact, so confidently wrong outputs
    keep a full-strength gradient.
    """
    g = np.asarray(final_delta, dtype=np.float64)
    if g.shape != (net.output_size,):
        raise DimensionError(
            f"final delta has shape {g.shape}, network expects"
            f" ({net.output_size},)"
        )
    if len(trace.activations) != len(net.layers):
        raise DimensionError("trace does not match network depth")
    grads: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    last = len(net.layers) - 1
    for k in range(last, -1, -1):
        layer = net.layers[k]
        if k == last:
            delta = g
        else:
            a = trace.activations[k]
            if layer.activation == TANH:
                delta = g * (1.0 - a * a)
            else:
                delta = g * (a * (1.0 - a))
        grads[k] = np.outer(delta, trace.inputs[k])
        g = (delta @ layer.weights)[:-1]
    return g, grads


def apply_update(
    net: DenseNetwork, grads, learning_rate: float, count: int = 1
) -> DenseNetwork:
    """One vanilla gradient step: w <- w - learning_rate * (grads / count).

    `grads` holds summed per-example gradients; pass the example count to
    step by the batch mean, which is what the trainer does, or leave count
    at 1 to apply the raw sum.  Updates in place and returns the same
    network.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    if len(grads) != len(net.layers):
        raise DimensionError("gradient list does not match network depth")
    for layer, g in zip(net.layers, grads):
        if g.shape != layer.weights.shape:
            raise DimensionError(
                f"gradient shape {g.shape} does not match weights"
                f" {layer.weights.shape}"
            )
        layer.weights -= learning_rate * (g / count)
    return net
