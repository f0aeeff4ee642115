"""Small dense networks with exact reverse-mode gradients.

Everything is float64 numpy. A network is a stack of affine layers, each
followed by an activation; the last layer is always linear and produces
logits. Per-sample training signals are expressed through a coefficient
matrix ``C`` (batch x classes): the scalar loss of sample ``i`` is
``C[i] @ loss_vector(logits[i])``. One-hot rows give ordinary cross-entropy,
rows of an inverted transition matrix give the backward-corrected loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("softsign", "leaky_relu", "identity")
LEAKY_SLOPE = 0.01


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "softsign":
        return z / (1.0 + np.abs(z))
    if kind == "leaky_relu":
        return np.where(z > 0, z, LEAKY_SLOPE * z)
    if kind == "identity":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def _activate_grad(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "softsign":
        d = 1.0 + np.abs(z)
        return 1.0 / (d * d)
    if kind == "leaky_relu":
        return np.where(z > 0, 1.0, LEAKY_SLOPE)
    if kind == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class GradientSet:
    """Per-parameter gradients laid out like the network they belong to."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def scaled(self, factor: float) -> "GradientSet":
        return GradientSet([factor * w for w in self.weights], [factor * b for b in self.biases])

    def __add__(self, other: "GradientSet") -> "GradientSet":
        return GradientSet(
            [a + b for a, b in zip(self.weights, other.weights)],
            [a + b for a, b in zip(self.biases, other.biases)],
        )


@dataclass
class Network:
    weights: list[np.ndarray]  # each (out, in)
    biases: list[np.ndarray]  # each (out,)
    activations: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.weights:
            raise ValueError("network needs at least one layer")
        if len(self.weights) != len(self.biases) or len(self.weights) != len(self.activations):
            raise ValueError("weights, biases and activations must have equal length")
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if act not in ACTIVATIONS:
                raise ValueError(f"layer {i}: unknown activation {act!r}")
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(
                    f"layer {i} expects {w.shape[1]} inputs, previous layer gives {self.weights[i - 1].shape[0]}"
                )
        if self.activations[-1] != "identity":
            raise ValueError("final layer must be linear (identity activation)")

    @property
    def input_size(self) -> int:
        return self.weights[0].shape[1]

    @property
    def class_count(self) -> int:
        return self.weights[-1].shape[0]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def copy(self) -> "Network":
        return Network([w.copy() for w in self.weights], [b.copy() for b in self.biases], list(self.activations))

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "Network":
        """New network with the same activations and the given [W0, b0, W1, b1, ...]."""
        return Network(list(arrays[0::2]), list(arrays[1::2]), list(self.activations))

    def zeros_like_grad(self) -> GradientSet:
        return GradientSet([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])


def init_network(
    sizes: Sequence[int],
    activation: str = "softsign",
    rng: np.random.Generator | int | None = None,
) -> Network:
    """Build a dense net with layer widths ``sizes`` (input first, classes last).

    Weights and biases are drawn uniformly from +-1/sqrt(fan_in).
    """
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    rng = np.random.default_rng(rng)
    weights, biases, acts = [], [], []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(rng.uniform(-bound, bound, size=n_out))
        acts.append("identity" if i == len(sizes) - 2 else activation)
    return Network(weights, biases, acts)


def _as_batch(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != net.input_size:
        raise ValueError(f"input of shape {x.shape} does not match network input size {net.input_size}")
    return np.atleast_2d(x)


def forward_cache(net: Network, X) -> list[tuple[np.ndarray, np.ndarray]]:
    """Forward pass that keeps (layer input, pre-activation) for every layer."""
    a = _as_batch(net, X)
    cache = []
    for w, b, act in zip(net.weights, net.biases, net.activations):
        z = a @ w.T + b
        cache.append((a, z))
        a = _activate(act, z)
    return cache


def forward(net: Network, x) -> np.ndarray:
    """Logits for a single feature vector (1-D in, 1-D out) or a batch of rows."""
    x = np.asarray(x)
    z = forward_cache(net, x)[-1][1]
    return z[0] if x.ndim == 1 else z


def loss_vector(logits) -> np.ndarray:
    """Per-class negative log-softmax, max-shifted. Works on a vector or on rows."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite logits")
    shifted = z - z.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return lse - shifted


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def one_hot(y, k: int) -> np.ndarray:
    y = np.asarray(y)
    if y.size and (y.min() < 0 or y.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    out = np.zeros((y.size, k))
    out[np.arange(y.size), y] = 1.0
    return out


def loss_coefficients(y, k: int, T_inv: np.ndarray | None = None) -> np.ndarray:
    """Row i weights the per-class losses of sample i; one-hot unless a correction is given."""
    if T_inv is None:
        return one_hot(y, k)
    T_inv = np.asarray(T_inv, dtype=np.float64)
    if T_inv.shape != (k, k):
        raise ValueError(f"correction matrix {T_inv.shape} does not match {k} classes")
    one_hot(y, k)  # range check
    return T_inv[np.asarray(y)]


def coefficient_losses(logits: np.ndarray, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scalar losses ``sum_j C_ij l_ij`` and their gradients w.r.t. the logits.

    d l_ij / d z_i = p_i - e_j, hence d/dz of the combination is ``(sum_j C_ij) p_i - C_i``.
    """
    losses = (coeffs * loss_vector(logits)).sum(axis=1)
    dz = coeffs.sum(axis=1, keepdims=True) * softmax(logits) - coeffs
    return losses, dz


def backward(net: Network, cache, dlogits: np.ndarray) -> GradientSet:
    """Reverse pass: gradient of ``sum_i dlogits_i . z_i`` w.r.t. every parameter."""
    n = len(net.weights)
    gw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    delta = dlogits
    for i in reversed(range(n)):
        a_in, z = cache[i]
        delta = delta * _activate_grad(net.activations[i], z)
        gw[i] = delta.T @ a_in
        gb[i] = delta.sum(axis=0)
        if i:
            delta = delta @ net.weights[i]
    return GradientSet(gw, gb)


def weighted_gradient(net: Network, X, coeffs: np.ndarray, weights) -> tuple[GradientSet, np.ndarray]:
    """``(1/B) sum_i weight_i grad loss_i`` plus the per-sample losses at the current parameters."""
    cache = forward_cache(net, X)
    weights = np.asarray(weights, dtype=np.float64)
    if len(weights) == 0:
        raise ValueError("empty batch")
    if len(weights) != len(cache[0][0]) or len(coeffs) != len(weights):
        raise ValueError("batch, labels and weights differ in length")
    losses, dz = coefficient_losses(cache[-1][1], coeffs)
    scale = weights / len(weights)
    return backward(net, cache, dz * scale[:, None]), losses


def sample_loss(net: Network, x, y: int) -> float:
    logits = forward(net, x)
    if not 0 <= y < len(logits):
        raise ValueError(f"label {y} out of range for {len(logits)} classes")
    return float(loss_vector(logits)[y])


def backprop_weighted(net: Network, X, y, weights) -> GradientSet:
    """Batch-averaged, per-sample weighted cross-entropy gradient (divisor = batch size)."""
    return weighted_gradient(net, X, loss_coefficients(y, net.class_count), weights)[0]


def backprop_weighted_corrected(net: Network, X, y, weights, T_inv) -> GradientSet:
    """Same as :func:`backprop_weighted` with the backward-corrected per-sample loss."""
    return weighted_gradient(net, X, loss_coefficients(y, net.class_count, T_inv), weights)[0]


def finite_diff_gradient(net: Network, loss_fn: Callable[[Network], float], step: float = 1e-5) -> GradientSet:
    """Central differences of ``loss_fn`` w.r.t. every parameter. Test oracle, O(#params) evaluations."""
    arrays = [a.copy() for a in net.arrays()]
    grads = [np.zeros_like(a) for a in arrays]
    for a, g in zip(arrays, grads):
        flat, gflat = a.reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            plus = loss_fn(net.with_arrays(arrays))
            flat[j] = orig - step
            minus = loss_fn(net.with_arrays(arrays))
            flat[j] = orig
            gflat[j] = (plus - minus) / (2 * step)
    return GradientSet(grads[0::2], grads[1::2])


def predict(net: Network, X) -> np.ndarray:
    """Class indices by argmax of logits; ties go to the smallest index."""
    return np.argmax(forward_cache(net, X)[-1][1], axis=1)
