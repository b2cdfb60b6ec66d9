"""Small softmax classifier with explicit backprop, Adam, and a gradient checker.

Everything runs in float64. Dense matrices are plain 2-D numpy arrays in
row-major order; a batch of samples is one row per sample.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

PROB_FLOOR = 1e-12
LEAKY_SLOPE = 0.1

_STREAMS = {"noise": 0, "shuffle": 1, "init": 2, "augment": 3, "split": 4, "probe": 5}


def make_rng(seed: int, stream: str | int) -> np.random.Generator:
    """Return an independent PCG64 generator for ``(seed, stream)``.

    Streams are separated through ``SeedSequence`` spawn keys, so the draws for
    e.g. label noise never depend on how many shuffles happened before.
    """
    key = _STREAMS[stream] if isinstance(stream, str) else int(stream)
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(key,))
    return np.random.Generator(np.random.PCG64(ss))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction. Accepts a vector or a matrix."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax: logits contain non-finite values")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def clamp_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_FLOOR, 1.0)


@dataclass
class ModelParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ("relu", "leaky_relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for a, b in zip(self.weights[:-1], self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError(f"incompatible layer shapes {a.shape} -> {b.shape}")
        for w, b in zip(self.weights, self.biases):
            if b.shape != (w.shape[1],):
                raise ValueError(f"bias shape {b.shape} does not match weight {w.shape}")

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    def arrays(self) -> list[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...]; the arrays are shared, not copied."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.weights],
                           [b.copy() for b in self.biases], self.activation)

    def zeros_like(self) -> "ModelParams":
        return ModelParams([np.zeros_like(w) for w in self.weights],
                           [np.zeros_like(b) for b in self.biases], self.activation)


def init_params(n_features: int, n_classes: int, hidden: Sequence[int] = (),
                activation: str = "relu", rng: np.random.Generator | None = None,
                zero: bool = False) -> ModelParams:
    """He-normal initialisation; biases start at zero."""
    if len(hidden) > 2:
        raise ValueError("at most two hidden layers are supported")
    dims = [n_features, *hidden, n_classes]
    rng = rng if rng is not None else make_rng(0, "init")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        if zero:
            w = np.zeros((fan_in, fan_out))
        else:
            w = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return ModelParams(weights, biases, activation)


def _act(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.where(z > 0, z, LEAKY_SLOPE * z)


def _act_grad(z, activation):
    if activation == "relu":
        return (z > 0).astype(np.float64)
    return np.where(z > 0, 1.0, LEAKY_SLOPE)


def forward(params: ModelParams, features: np.ndarray):
    """Return ``(probs, cache)`` for a batch of feature rows."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.n_features:
        raise ValueError(f"feature matrix {x.shape} does not match input width {params.n_features}")
    inputs, pre = [x], []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        if i < last:
            pre.append(z)
            h = _act(z, params.activation)
            inputs.append(h)
        else:
            logits = z
    probs = softmax(logits)
    return probs, {"inputs": inputs, "pre": pre, "probs": probs}


def backward(params: ModelParams, cache: dict, dL_dprob: np.ndarray) -> ModelParams:
    """Chain ``dL/dprob`` back through softmax and the layers.

    The returned gradient is the sum over the batch rows; any averaging must
    already be folded into ``dL_dprob`` by the loss.
    """
    p = cache["probs"]
    g = np.asarray(dL_dprob, dtype=np.float64)
    if g.shape != p.shape:
        raise ValueError(f"gradient shape {g.shape} does not match probabilities {p.shape}")
    # softmax Jacobian-vector product: p * (g - <g, p>)
    delta = p * (g - np.sum(g * p, axis=1, keepdims=True))
    gw = [None] * len(params.weights)
    gb = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = cache["inputs"][i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * _act_grad(cache["pre"][i - 1], params.activation)
    return ModelParams(gw, gb, params.activation)


def predict(params: ModelParams, features: np.ndarray) -> np.ndarray:
    return forward(params, features)[0]


@dataclass
class LrSchedule:
    """Constant rate, then linear decay to exactly 0 at the last epoch.

    ``beta1`` switches to ``beta1_after_decay`` once decay starts.
    ``decay_start=None`` means ``floor(0.4 * total_epochs)`` (80 of 200).
    """
    total_epochs: int
    base_lr: float = 1e-3
    decay_start: int | None = None
    beta1: float = 0.9
    beta1_after_decay: float = 0.1

    def __post_init__(self):
        if self.decay_start is None:
            self.decay_start = int(0.4 * self.total_epochs)
        if not 0 <= self.decay_start < self.total_epochs:
            raise ValueError(f"decay_start={self.decay_start} must be < total_epochs={self.total_epochs}")

    def lr(self, epoch: int) -> float:
        if epoch <= self.decay_start:
            return self.base_lr
        frac = (self.total_epochs - epoch) / (self.total_epochs - self.decay_start)
        return self.base_lr * max(frac, 0.0)

    def beta1_at(self, epoch: int) -> float:
        return self.beta1 if epoch <= self.decay_start else self.beta1_after_decay


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: ModelParams, **kw) -> "AdamState":
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **kw)


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState,
              epoch: int, schedule: LrSchedule) -> None:
    """In-place Adam update with bias correction; lr and beta1 follow ``schedule``."""
    garrs = grads.arrays()
    for g in garrs:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient at Adam step {state.step_count + 1} (epoch {epoch})")
    lr = schedule.lr(epoch)
    b1 = schedule.beta1_at(epoch)
    b2 = state.beta2
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params.arrays(), garrs, state.first_moment, state.second_moment):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)


def grad_check(loss_and_grad: Callable[[list[np.ndarray]], tuple[float, list[np.ndarray]]],
               arrays: list[np.ndarray], probe_count: int = 100, step: float = 1e-5,
               rng: np.random.Generator | None = None, floor: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_and_grad(arrays)`` must return ``(value, grads)`` with ``grads``
    shaped like ``arrays``. Probed coordinates are drawn uniformly over all
    entries. The arrays are perturbed in place and restored.

    Relative error is ``|a - n| / max(|a|, |n|, floor)``; the floor keeps
    coordinates with vanishing gradient from dividing round-off by zero.
    """
    rng = rng if rng is not None else make_rng(0, "probe")
    _, analytic = loss_and_grad(arrays)
    analytic = [np.array(g, dtype=np.float64, copy=True) for g in analytic]
    sizes = np.array([a.size for a in arrays])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for flat in rng.integers(0, offsets[-1], size=probe_count):
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = int(flat - offsets[k])
        a = arrays[k].reshape(-1)
        old = a[idx]
        a[idx] = old + step
        fp = loss_and_grad(arrays)[0]
        a[idx] = old - step
        fm = loss_and_grad(arrays)[0]
        a[idx] = old
        num = (fp - fm) / (2 * step)
        ana = analytic[k].reshape(-1)[idx]
        err = abs(ana - num) / max(abs(ana), abs(num), floor)
        worst = max(worst, err)
    return worst
