"""Label transition matrices and label corruption."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .numeric import forward, make_rng

log = logging.getLogger(__name__)

NOISE_KINDS = ("none", "symmetric", "pair", "model_generated")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    rate: float = 0.0
    seed: int = 0

    def validate(self, c: int) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "symmetric" and not 0 <= self.rate < (c - 1) / c:
            raise ValueError(f"symmetric noise needs 0 <= rate < (c-1)/c = {(c - 1) / c:.4g}")
        if self.kind == "pair" and not 0 <= self.rate < 0.5:
            raise ValueError("pair noise needs 0 <= rate < 0.5")


def symmetric_matrix(c: int, epsilon: float) -> np.ndarray:
    """``1 - eps`` on the diagonal, ``eps / (c - 1)`` everywhere else."""
    if c < 2:
        raise ValueError("need at least two classes")
    if not 0 <= epsilon < (c - 1) / c:
        raise ValueError(f"epsilon={epsilon} outside [0, (c-1)/c) for c={c}")
    q = np.full((c, c), epsilon / (c - 1))
    np.fill_diagonal(q, 1.0 - epsilon)
    return q


def pair_matrix(c: int, epsilon: float) -> np.ndarray:
    """Class ``i`` keeps its label with ``1 - eps`` and flips to ``(i + 1) % c`` otherwise."""
    if c < 2:
        raise ValueError("need at least two classes")
    if not 0 <= epsilon < 0.5:
        raise ValueError(f"epsilon={epsilon} outside [0, 0.5)")
    q = np.eye(c) * (1.0 - epsilon)
    idx = np.arange(c)
    q[idx, (idx + 1) % c] += epsilon
    return q


def apply_noise(labels, Q: np.ndarray, seed: int) -> np.ndarray:
    """Resample each label from its row of ``Q`` (inverse CDF on one uniform per label)."""
    labels = np.asarray(labels, dtype=np.int64)
    c = Q.shape[0]
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError("labels out of range for the transition matrix")
    u = make_rng(seed, "noise").random(labels.size)
    cdf = np.cumsum(Q, axis=1)
    cdf[:, -1] = 1.0
    noisy = (u[:, None] >= cdf[labels]).sum(axis=1)
    return noisy.astype(np.int64)


def model_generated_noise(dataset: Dataset, labeled_fraction: float, train_config, seed: int):
    """Relabel the training set with a weak model trained on a labelled subset.

    The subset is drawn uniformly with the ``noise`` stream of ``seed`` and the
    weak model is trained with plain cross-entropy under ``train_config``.
    Returns ``(noisy_labels, weak_test_accuracy)``.
    """
    from .trainer import evaluate, train

    if not 0 < labeled_fraction <= 1:
        raise ValueError("labeled_fraction must lie in (0, 1]")
    n_lab = max(1, int(round(labeled_fraction * dataset.n)))
    idx = np.sort(make_rng(seed, "noise").permutation(dataset.n)[:n_lab])
    y = dataset.train_true_labels[idx]
    missing = sorted(set(range(dataset.c)) - set(np.unique(y).tolist()))
    if missing:
        warnings.warn(f"labelled subset has no samples of classes {missing}", RuntimeWarning)
    subset = replace(dataset, train_features=dataset.train_features[idx], train_true_labels=y,
                     train_noisy_labels=y.copy())
    cfg = replace(train_config, method="standard", seed=seed,
                  batch_size=min(train_config.batch_size, n_lab))
    _, params = train(cfg, subset)
    noisy = np.argmax(forward(params, dataset.train_features)[0], axis=1).astype(np.int64)
    weak_acc = evaluate(params, dataset.test_features, dataset.test_labels)
    return noisy, weak_acc


def corrupt(dataset: Dataset, spec: NoiseSpec) -> Dataset:
    """Apply ``spec`` (symmetric / pair / none) to the training labels once."""
    spec.validate(dataset.c)
    if spec.kind == "none":
        return dataset.with_noisy_labels(dataset.train_true_labels.copy())
    if spec.kind == "symmetric":
        Q = symmetric_matrix(dataset.c, spec.rate)
    elif spec.kind == "pair":
        Q = pair_matrix(dataset.c, spec.rate)
    else:
        raise ValueError("model_generated noise needs model_generated_noise()")
    noisy = apply_noise(dataset.train_true_labels, Q, spec.seed)
    log.info("%s noise rate %.3f requested, %.4f realised", spec.kind, spec.rate,
             np.mean(noisy != dataset.train_true_labels))
    return dataset.with_noisy_labels(noisy)
