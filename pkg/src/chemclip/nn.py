"""Dense feed-forward layers with hand-written gradients, AdamW and clipping.

Everything is float64 numpy; a "matrix" is a 2-D ``np.ndarray``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch
from .rng import SplitMix64

NORM_EPS = 1e-12


@dataclass
class Mlp:
    """Affine layers; rectifier + inverted dropout on every hidden layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout: float = 0.0

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def named_parameters(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        out = []
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"{prefix}{k}.weight", w))
            out.append((f"{prefix}{k}.bias", b))
        return out


@dataclass
class MlpCache:
    inputs: list[np.ndarray] = field(default_factory=list)  # input to each affine layer
    pre: list[np.ndarray] = field(default_factory=list)     # hidden pre-activations
    masks: list[np.ndarray | None] = field(default_factory=list)


def init_mlp(dims, seed: int, dropout: float = 0.0) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    rng = SplitMix64(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases, dropout)


def mlp_forward(mlp: Mlp, x: np.ndarray, training: bool = False, rng: SplitMix64 | None = None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != mlp.weights[0].shape[0]:
        raise DimensionMismatch(f"input shape {x.shape} does not match first layer "
                                f"({mlp.weights[0].shape[0]} inputs)")
    cache = MlpCache()
    h = x
    last = len(mlp.weights) - 1
    for k, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        cache.inputs.append(h)
        z = h @ w + b
        if k == last:
            return z, cache
        cache.pre.append(z)
        h = np.maximum(z, 0.0)
        mask = None
        if training and mlp.dropout > 0.0:
            if rng is None:
                raise ValueError("training-mode dropout needs an rng")
            keep = 1.0 - mlp.dropout
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
        cache.masks.append(mask)
    raise AssertionError("unreachable")


def mlp_backward(mlp: Mlp, cache: MlpCache, grad_out: np.ndarray):
    """Reverse-mode pass.

    Returns:
        ``(grads, grad_input)`` where ``grads`` is ordered like
        :meth:`Mlp.parameters` (weight, bias per layer).
    """
    grad_out = np.asarray(grad_out, dtype=np.float64)
    expected = (cache.inputs[0].shape[0], mlp.weights[-1].shape[1])
    if grad_out.shape != expected:
        raise DimensionMismatch(f"upstream gradient {grad_out.shape}, expected {expected}")
    grads: list[np.ndarray] = [None] * (2 * len(mlp.weights))
    g = grad_out
    for k in range(len(mlp.weights) - 1, -1, -1):
        grads[2 * k] = cache.inputs[k].T @ g
        grads[2 * k + 1] = g.sum(axis=0)
        g = g @ mlp.weights[k].T
        if k > 0:
            mask = cache.masks[k - 1]
            if mask is not None:
                g = g * mask
            g = g * (cache.pre[k - 1] > 0.0)
    return grads, g


def l2_normalize_rows(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows scaled to unit length; returns ``(normalized, norms)``.

    Rows with norm <= 1e-12 are divided by 1e-12 (so zero rows stay zero).
    """
    norms = np.linalg.norm(m, axis=1)
    return m / np.maximum(norms, NORM_EPS)[:, None], norms


def l2_normalize_rows_backward(y: np.ndarray, norms: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Gradient through :func:`l2_normalize_rows`; degenerate rows get zero gradient."""
    safe = np.maximum(norms, NORM_EPS)[:, None]
    g = (grad - y * np.sum(y * grad, axis=1, keepdims=True)) / safe
    g[norms <= NORM_EPS] = 0.0
    return g


class AdamW:
    """Adam with decoupled weight decay, updating parameter arrays in place."""

    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.01):
        self.params = list(params)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads) -> None:
        if len(grads) != len(self.params):
            raise DimensionMismatch("one gradient per parameter expected")
        self.step_count += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1**self.step_count
        c2 = 1.0 - b2**self.step_count
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.shape:
                raise DimensionMismatch(f"gradient {g.shape} vs parameter {p.shape}")
            p *= 1.0 - self.lr * self.weight_decay
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def global_grad_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_grad_norm(grads, max_norm: float = 1.0):
    """Scale all gradients by ``max_norm / norm`` when the global L2 norm exceeds ``max_norm``."""
    norm = global_grad_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads]
    return list(grads)
