"""Training loops: self-paced resistance learning and the baseline methods.

One call to :func:`train` owns all mutable state (parameters, Adam moments,
prediction memory, generators). Runs are deterministic given the seed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import curriculum as cur
from .curriculum import ConfigError, PaceConfig
from .data import Dataset
from .losses import PredictionMemory, bootstrap_hard_loss, curriculum_batch_loss
from .numeric import (AdamState, LrSchedule, ModelParams, adam_step, backward, forward,
                      init_params, make_rng)

log = logging.getLogger(__name__)

METHODS = ("sprl", "standard", "bootstrap", "kd", "label_smooth", "spl")
_TERM = {"sprl": "resistance", "kd": "kd", "label_smooth": "label_smooth"}


@dataclass
class TrainConfig:
    epochs: int = 200
    t1: int = 20
    k: int = 10
    gamma_d: float = 300.0
    m: int | None = None
    epsilon_known: float | None = None
    batch_size: int = 128
    lr: float = 1e-3
    decay_start: int | None = None
    seed: int = 0
    method: str = "sprl"
    augment_sigma: float = 0.0
    hidden: tuple[int, ...] = (256, 256)
    activation: str = "relu"
    bootstrap_beta: float = 0.8
    spl_lambda: float = math.log(2.0)

    def pace(self, n: int) -> PaceConfig:
        return PaceConfig(n=n, T1=self.t1, T=self.epochs, K=self.k, m=self.m, gamma_d=self.gamma_d)

    def validate(self, n: int) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not 0 < self.batch_size <= n:
            raise ConfigError(f"batch_size={self.batch_size} must be in [1, n={n}]")
        if self.lr < 0 or self.augment_sigma < 0:
            raise ConfigError("lr and augment_sigma must be non-negative")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        LrSchedule(self.epochs, self.lr, self.decay_start)
        if self.method == "bootstrap" and not 0 <= self.bootstrap_beta <= 1:
            raise ConfigError("bootstrap_beta must lie in [0, 1]")
        if self.method == "standard" or self.method == "bootstrap":
            return
        self.pace(n).validate()
        if self.epsilon_known is not None and not 0 <= self.epsilon_known < 1:
            raise ConfigError("epsilon_known must lie in [0, 1)")
        if self.m is None and self.epochs > self.t1:
            # the pace step depends on m; check the extreme admissible values now
            for m in (math.ceil(0.1 * n), math.floor(0.5 * n)):
                replace(self.pace(n), m=m).validate()


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    test_accuracy: float
    selected_count: int
    selection_precision: float
    gamma_t: float
    delta_t: int
    lr_t: float
    val_accuracy: float | None = None
    confident_count: int = 0

    CSV_COLUMNS = ("epoch", "train_loss", "test_acc", "selected_count", "selection_precision",
                   "gamma_t", "delta_t", "lr_t")

    def csv_row(self) -> list:
        return [self.epoch, float(self.train_loss), float(self.test_accuracy), self.selected_count,
                float(self.selection_precision), float(self.gamma_t), self.delta_t, float(self.lr_t)]


@dataclass
class TrainerState:
    params: ModelParams
    adam: AdamState
    schedule: LrSchedule
    memory: PredictionMemory
    shuffle_rng: np.random.Generator
    augment_rng: np.random.Generator
    pace: PaceConfig | None = None
    confident_history: list[int] = field(default_factory=list)

    @classmethod
    def create(cls, config: TrainConfig, dataset: Dataset) -> "TrainerState":
        params = init_params(dataset.d, dataset.c, config.hidden, config.activation,
                             rng=make_rng(config.seed, "init"))
        return cls(params=params,
                   adam=AdamState.for_params(params),
                   schedule=LrSchedule(config.epochs, config.lr, config.decay_start),
                   memory=PredictionMemory.uniform(dataset.n, dataset.c),
                   shuffle_rng=make_rng(config.seed, "shuffle"),
                   augment_rng=make_rng(config.seed, "augment"))


def evaluate(params: ModelParams, features, labels) -> float:
    """Argmax accuracy; ties go to the lowest class index."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        return float("nan")
    probs = forward(params, features)[0]
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def run_epoch(state: TrainerState, dataset: Dataset, config: TrainConfig, t: int, batch_loss):
    """Shuffle, then forward / loss / backward / Adam / record per mini-batch.

    ``batch_loss(idx, probs) -> (value, dL/dprobs)``. Returns the mean batch loss.
    """
    n = dataset.n
    order = state.shuffle_rng.permutation(n)
    losses = []
    for start in range(0, n, config.batch_size):
        idx = order[start:start + config.batch_size]
        x = dataset.train_features[idx]
        if config.augment_sigma > 0:
            x = x + config.augment_sigma * state.augment_rng.standard_normal(x.shape)
        probs, cache = forward(state.params, x)
        value, grad = batch_loss(idx, probs)
        grads = backward(state.params, cache, grad)
        adam_step(state.params, grads, state.adam, t, state.schedule)
        state.memory.record(idx, probs)
        losses.append(value)
    state.memory.epoch_tag = t
    return float(np.mean(losses))


def _precision(dataset: Dataset, v) -> float:
    sel = np.asarray(v).astype(bool)
    if not sel.any():
        return 0.0
    return float(np.mean(dataset.train_noisy_labels[sel] == dataset.train_true_labels[sel]))


def _confident_count(memory: PredictionMemory, labels) -> int:
    return int(np.sum(memory.probs[np.arange(len(labels)), labels] >= 0.5))


def _finish(state, dataset, config, t, loss, v, gamma_t, delta_t, val):
    m = EpochMetrics(
        epoch=t, train_loss=loss,
        test_accuracy=evaluate(state.params, dataset.test_features, dataset.test_labels),
        selected_count=int(np.sum(v)), selection_precision=_precision(dataset, v),
        gamma_t=gamma_t, delta_t=delta_t, lr_t=state.schedule.lr(t),
        confident_count=_confident_count(state.memory, dataset.train_noisy_labels))
    if val is not None:
        m.val_accuracy = evaluate(state.params, *val)
    return m


def warmup_epoch(state: TrainerState, dataset: Dataset, config: TrainConfig, t: int,
                 val=None) -> EpochMetrics:
    """Cross-entropy on every sample; also used for all epochs of ``standard``."""
    labels = dataset.train_noisy_labels
    ones = np.ones(config.batch_size, dtype=np.int8)

    if config.method == "bootstrap":
        def batch_loss(idx, probs):
            value, grad = bootstrap_hard_loss(probs, labels[idx], config.bootstrap_beta)
            return float(np.mean(value)), grad / len(idx)
    else:
        def batch_loss(idx, probs):
            value, grad, _ = curriculum_batch_loss(probs, probs, labels[idx], ones[:len(idx)], 0.0)
            return value, grad

    loss = run_epoch(state, dataset, config, t, batch_loss)
    v = np.ones(dataset.n, dtype=np.int8)
    metrics = _finish(state, dataset, config, t, loss, v, 0.0, dataset.n, val)
    state.confident_history.append(metrics.confident_count)
    return metrics


def _begin_curriculum(state: TrainerState, dataset: Dataset, config: TrainConfig) -> None:
    m = config.m
    if m is None:
        m = cur.choose_m(state.confident_history, dataset.n, config.epsilon_known)
    state.pace = replace(config.pace(dataset.n), m=m)
    state.pace.validate()
    log.info("curriculum starts with m=%d of n=%d", m, dataset.n)


def sprl_epoch(state: TrainerState, dataset: Dataset, config: TrainConfig, t: int,
               val=None) -> EpochMetrics:
    """One curriculum epoch (``t > T1``): select by last epoch's losses, then
    train on every sample with selected-sample CE plus the weighted regulariser.

    The regulariser is the resistance term for ``sprl`` and its substitute for
    ``kd`` / ``label_smooth``; ``spl`` uses a fixed loss threshold and no
    regulariser.
    """
    if state.pace is None:
        _begin_curriculum(state, dataset, config)
    pace = state.pace
    if state.memory.epoch_tag != t - 1:
        raise RuntimeError(f"prediction memory tagged {state.memory.epoch_tag}, expected {t - 1}")
    labels = dataset.train_noisy_labels
    prev_losses = state.memory.label_losses(labels)
    if config.method == "spl":
        v = cur.spl_select(prev_losses, config.spl_lambda)
        gamma_t, term = 0.0, "resistance"
    else:
        v, _ = cur.select_confident(prev_losses, cur.delta(t - 1, pace))
        gamma_t, term = cur.gamma(t, pace), _TERM[config.method]
    # snapshot: memory rows are overwritten batch by batch during the epoch
    prev = state.memory.probs.copy()

    def batch_loss(idx, probs):
        value, grad, _ = curriculum_batch_loss(probs, prev[idx], labels[idx], v[idx], gamma_t, term)
        return value, grad

    loss = run_epoch(state, dataset, config, t, batch_loss)
    return _finish(state, dataset, config, t, loss, v, gamma_t, cur.delta(t, pace), val)


def train(config: TrainConfig, dataset: Dataset, val=None):
    """Run all epochs of ``config.method``; returns ``(history, params)``.

    ``val`` is an optional ``(features, labels)`` pair evaluated each epoch.
    """
    history, state = fit(config, dataset, val)
    return history, state.params


def fit(config: TrainConfig, dataset: Dataset, val=None):
    """Like :func:`train` but returns the whole :class:`TrainerState`."""
    config.validate(dataset.n)
    state = TrainerState.create(config, dataset)
    history = []
    curriculum = config.method not in ("standard", "bootstrap")
    for t in range(1, config.epochs + 1):
        if curriculum and t > config.t1:
            metrics = sprl_epoch(state, dataset, config, t, val)
        else:
            metrics = warmup_epoch(state, dataset, config, t, val)
        history.append(metrics)
    return history, state


def train_baseline(method: str, config: TrainConfig, dataset: Dataset, val=None):
    if method == "sprl":
        raise ValueError("train_baseline is for the comparison methods; use train() for sprl")
    return train(replace(config, method=method), dataset, val)


def last10(history) -> float:
    accs = [m.test_accuracy for m in history[-10:]]
    # fsum then clamp, so rounding cannot lift the mean above the largest entry
    return min(math.fsum(accs) / len(accs), max(accs))


def best_accuracy(history) -> float:
    return float(max(m.test_accuracy for m in history))
