"""Loss functions on predicted class probabilities.

Every loss returns ``(value, grad)`` where ``grad`` is the derivative with
respect to the (unclamped) probability entries. Single-sample losses accept a
length-``c`` vector; passing a ``(B, c)`` matrix gives per-row values and a
gradient of the same shape. Probabilities are clamped to ``[1e-12, 1]``
before any log.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric import clamp_probs

SUBSTITUTE_TERMS = ("resistance", "kd", "label_smooth")


@dataclass
class PredictionMemory:
    """Per-sample probabilities from the previous epoch's forward passes."""
    probs: np.ndarray
    epoch_tag: int = 0

    @classmethod
    def uniform(cls, n: int, c: int) -> "PredictionMemory":
        return cls(np.full((n, c), 1.0 / c), 0)

    def record(self, idx: np.ndarray, probs: np.ndarray) -> None:
        self.probs[idx] = probs

    def label_losses(self, labels: np.ndarray) -> np.ndarray:
        """``-log p_i[label_i]`` for every stored row."""
        rows = np.arange(len(labels))
        return -np.log(clamp_probs(self.probs[rows, labels]))


def _onehot(labels, c):
    labels = np.asarray(labels)
    out = np.zeros(labels.shape + (c,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def cross_entropy(probs, label):
    p = np.asarray(probs, dtype=np.float64)
    c = p.shape[-1]
    label = np.asarray(label)
    if np.any(label < 0) or np.any(label >= c):
        raise ValueError(f"label out of range for {c} classes")
    onehot = _onehot(label, c)
    q = clamp_probs(p)
    value = -np.sum(onehot * np.log(q), axis=-1)
    return value, -onehot / q


def resistance_loss(probs, prev_probs):
    """Weighted cross-entropy against last epoch's prediction, summed over classes.

    Each class entry is treated independently, so the gradient is
    ``-prev[j] / p[j]`` with no simplex projection.
    """
    q = clamp_probs(np.asarray(probs, dtype=np.float64))
    prev = np.asarray(prev_probs, dtype=np.float64)
    return -np.sum(prev * np.log(q), axis=-1), -prev / q


def kd_loss(probs, prev_probs):
    """KL(prev || p) at temperature 1."""
    q = clamp_probs(np.asarray(probs, dtype=np.float64))
    prev = np.asarray(prev_probs, dtype=np.float64)
    ratio = np.log(clamp_probs(prev)) - np.log(q)
    value = np.sum(np.where(prev > 0, prev * ratio, 0.0), axis=-1)
    return value, -prev / q


def label_smooth_loss(probs):
    """KL(u || p) against the uniform distribution u."""
    q = clamp_probs(np.asarray(probs, dtype=np.float64))
    c = q.shape[-1]
    u = 1.0 / c
    return np.sum(u * (np.log(u) - np.log(q)), axis=-1), -u / q


def bootstrap_hard_loss(probs, noisy_label, beta: float = 0.8):
    """beta * CE(noisy label) + (1 - beta) * CE(model's own argmax).

    The argmax target is held fixed when differentiating.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    p = np.asarray(probs, dtype=np.float64)
    v1, g1 = cross_entropy(p, noisy_label)
    v2, g2 = cross_entropy(p, np.argmax(p, axis=-1))
    return beta * v1 + (1 - beta) * v2, beta * g1 + (1 - beta) * g2


def _term(name, probs, prev):
    if name == "resistance":
        return resistance_loss(probs, prev)
    if name == "kd":
        return kd_loss(probs, prev)
    if name == "label_smooth":
        return label_smooth_loss(probs)
    raise ValueError(f"unknown regulariser {name!r}; expected one of {SUBSTITUTE_TERMS}")


def curriculum_batch_loss(batch_probs, batch_prev, noisy_labels, v_batch, gamma_t: float,
                          term: str = "resistance"):
    """Selected-sample CE plus a gamma-weighted regulariser over the full batch.

    ``(1/sum v) * sum_{v_i=1} CE_i + (gamma_t/|B|) * sum_{i in B} term_i``.
    A batch with no selected samples contributes 0 for the CE part.
    Returns ``(value, grad, per_sample)`` where ``per_sample`` holds each
    row's contribution to ``value``.
    """
    if gamma_t < 0:
        raise ValueError(f"gamma_t must be >= 0, got {gamma_t}")
    p = np.asarray(batch_probs, dtype=np.float64)
    v = np.asarray(v_batch).astype(bool)
    B = p.shape[0]
    if v.shape != (B,) or len(noisy_labels) != B:
        raise ValueError("batch shapes are inconsistent")
    ce, ce_grad = cross_entropy(p, noisy_labels)
    n_sel = int(v.sum())
    per_sample = np.zeros(B)
    grad = np.zeros_like(p)
    if n_sel:
        per_sample[v] = ce[v] / n_sel
        grad[v] = ce_grad[v] / n_sel
    if gamma_t > 0:
        r, r_grad = _term(term, p, batch_prev)
        per_sample += gamma_t * r / B
        grad += gamma_t * r_grad / B
    return float(per_sample.sum()), grad, per_sample


def sprl_batch_loss(batch_probs, batch_prev, noisy_labels, v_batch, gamma_t: float):
    """Combined self-paced resistance loss for one mini-batch; see ``curriculum_batch_loss``."""
    value, grad, _ = curriculum_batch_loss(batch_probs, batch_prev, noisy_labels, v_batch,
                                           gamma_t, "resistance")
    return value, grad


def prop1_step(prev, cur, eta: float, j: int = 0, k: int = 1):
    """One unnormalised gradient-descent step on free probability entries.

    Applies ``next = cur + eta * prev / cur`` and classifies the pair
    ``(j, k)`` (``cur[j] > cur[k]`` required) by comparing the previous ratio
    ``r_prev = prev[j]/prev[k]`` with the current ratio ``r = cur[j]/cur[k]``:

    * ``"i"``   -- ``r_prev < r``
    * ``"ii"``  -- ``r_prev > r**2``
    * ``"iii"`` -- ``r <= r_prev <= r**2``

    With ``c == 1`` (scalar inputs) there is no pair and the case is ``None``.
    """
    prev = np.atleast_1d(np.asarray(prev, dtype=np.float64))
    cur = np.atleast_1d(np.asarray(cur, dtype=np.float64))
    if eta <= 0:
        raise ValueError("eta must be positive")
    nxt = cur + eta * prev / cur
    if cur.size == 1:
        return nxt, None
    if not cur[j] > cur[k]:
        raise ValueError(f"precondition cur[{j}] > cur[{k}] violated: {cur[j]} <= {cur[k]}")
    r_prev = prev[j] / prev[k]
    r = cur[j] / cur[k]
    if r_prev < r:
        case = "i"
    elif r_prev > r * r:
        case = "ii"
    else:
        case = "iii"
    return nxt, case
