"""A small fully-connected kernel generator with hand-rolled reverse mode.

The net maps a fixed noise vector through ReLU hidden layers to a softmax
over the kernel taps, so every emitted kernel sits strictly inside the
probability simplex. Parameters are immutable values; an update builds a new
parameter set. Only this fixed topology needs gradients, so the backward pass
is written out explicitly instead of pulling in an autodiff framework.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

_MAGIC = b"KNP1"
INPUT_NOISE_STD = 0.5  # variance 0.25
# The output layer is damped relative to He so a fresh net emits a
# near-uniform kernel instead of a randomly spiky one.
OUTPUT_GAIN = 0.25


@dataclass(frozen=True)
class KernelNetParams:
    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    input_noise: np.ndarray
    seed: int

    @property
    def side(self) -> int:
        return int(math.isqrt(self.layer_dims[-1]))


@dataclass(frozen=True)
class KernelNetGradient:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]


def init_params(seed: int, layer_dims) -> KernelNetParams:
    """He-initialized weights (damped output layer), zero biases, seeded noise."""
    layer_dims = tuple(int(d) for d in layer_dims)
    if len(layer_dims) < 2:
        raise ValueError("need at least input and output dims")
    side = math.isqrt(layer_dims[-1])
    if side * side != layer_dims[-1] or side % 2 == 0:
        raise ValueError(f"output dim {layer_dims[-1]} is not an odd side squared")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for i, (fan_in, fan_out) in enumerate(zip(layer_dims[:-1], layer_dims[1:])):
        std = math.sqrt(2.0 / fan_in)
        if i == len(layer_dims) - 2:
            std *= OUTPUT_GAIN
        weights.append(rng.normal(0.0, std, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    noise = rng.normal(0.0, INPUT_NOISE_STD, size=layer_dims[0])
    return KernelNetParams(layer_dims, tuple(weights), tuple(biases), noise, seed)


def num_params(params: KernelNetParams) -> int:
    return sum(w.size + b.size for w, b in zip(params.weights, params.biases))


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def _forward_trace(params: KernelNetParams):
    """Forward pass keeping pre-activations and hidden outputs for backprop."""
    h = params.input_noise
    hidden = [h]
    preacts = []
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = w @ h + b
        preacts.append(a)
        h = np.maximum(a, 0.0)
        hidden.append(h)
    logits = params.weights[-1] @ h + params.biases[-1]
    probs = _softmax(logits)
    return hidden, preacts, probs


def forward(params: KernelNetParams) -> np.ndarray:
    """Deterministic kernel emitted by the net, shaped (side, side)."""
    _, _, probs = _forward_trace(params)
    side = params.side
    return probs.reshape(side, side)


def backward(params: KernelNetParams, upstream: np.ndarray) -> KernelNetGradient:
    """Gradient of <upstream, forward(params)> w.r.t. all weights and biases."""
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.size != params.layer_dims[-1]:
        raise ValueError(
            f"upstream has {upstream.size} entries, net emits {params.layer_dims[-1]}"
        )
    hidden, preacts, probs = _forward_trace(params)

    u = upstream.ravel()
    # softmax Jacobian applied to u: p * (u - <u, p>)
    g = probs * (u - float(u @ probs))

    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        grad_w[i] = np.outer(g, hidden[i])
        grad_b[i] = g
        if i > 0:
            g = (params.weights[i].T @ g) * (preacts[i - 1] > 0)
    return KernelNetGradient(tuple(grad_w), tuple(grad_b))


def save_params(path, params: KernelNetParams) -> None:
    """Flat binary blob: magic, seed, dims, then noise and per-layer W, b."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<qI", params.seed, len(params.layer_dims)))
        f.write(struct.pack(f"<{len(params.layer_dims)}I", *params.layer_dims))
        f.write(params.input_noise.astype("<f8").tobytes())
        for w, b in zip(params.weights, params.biases):
            f.write(w.astype("<f8").tobytes())
            f.write(b.astype("<f8").tobytes())


def load_params(path) -> KernelNetParams:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a kernel-net parameter blob")
        seed, ndims = struct.unpack("<qI", f.read(12))
        dims = struct.unpack(f"<{ndims}I", f.read(4 * ndims))

        def block(n):
            return np.frombuffer(f.read(8 * n), dtype="<f8").astype(np.float64)

        noise = block(dims[0])
        weights = []
        biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights.append(block(fan_in * fan_out).reshape(fan_out, fan_in))
            biases.append(block(fan_out))
    return KernelNetParams(tuple(dims), tuple(weights), tuple(biases), noise, seed)
