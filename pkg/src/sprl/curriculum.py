"""Pace schedule, resistance-weight ramp and confident-sample selection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PaceConfig:
    """Curriculum sizes and epoch counts.

    ``m`` is the initial curriculum size after warmup. It may be left as
    ``None`` while warmup is still running and filled in afterwards.
    """
    n: int
    T1: int
    T: int
    K: int = 10
    m: int | None = None
    gamma_d: float = 1.0

    def validate(self) -> None:
        if not 0 < self.T1 <= self.T:
            raise ConfigError(f"need 0 < T1 <= T, got T1={self.T1}, T={self.T}")
        if not 2 <= self.K <= self.n:
            raise ConfigError(f"need 2 <= K <= n, got K={self.K}, n={self.n}")
        if self.gamma_d < 0:
            raise ConfigError("gamma_d must be >= 0")
        if self.m is not None:
            if not 0.1 * self.n <= self.m <= 0.5 * self.n:
                raise ConfigError(f"m={self.m} outside [0.1n, 0.5n] for n={self.n}")
            if self.T > self.T1:
                _step(self)


def _step(cfg: PaceConfig) -> int:
    # K - mK/n + 1 in exact arithmetic; only the outer division is floored
    q = cfg.K - Fraction(cfg.m * cfg.K, cfg.n) + 1
    step = math.floor(Fraction(cfg.T - cfg.T1) / q)
    if step == 0:
        raise ConfigError(
            f"pace step is zero: T-T1={cfg.T - cfg.T1} is smaller than "
            f"K - mK/n + 1 = {float(q):.4g} (K={cfg.K}); lower K or train longer")
    return step


def delta(t: int, cfg: PaceConfig) -> int:
    """Curriculum size at epoch ``t`` (1-based)."""
    if t <= cfg.T1:
        return cfg.n
    if cfg.m is None:
        raise ConfigError("m must be set before the curriculum phase")
    step = _step(cfg)
    return min(cfg.m + ((t - cfg.T1) // step) * (cfg.n // cfg.K), cfg.n)


def gamma_max(gamma_d: float, m: int, n: int) -> float:
    value = gamma_d * (10 - math.ceil(Fraction(m) / (Fraction(n) / 10)))
    if value < 0:
        raise ConfigError(f"gamma_max={value} < 0 for m={m}, n={n}")
    return float(value)


def gamma(t: int, cfg: PaceConfig) -> float:
    """Exponential ramp-up weight on the regulariser: 0 through warmup, gamma_max at T."""
    if t <= cfg.T1:
        return 0.0
    mu = (t - cfg.T1) / (cfg.T - cfg.T1)
    return gamma_max(cfg.gamma_d, cfg.m, cfg.n) * math.exp(-5.0 * (1.0 - mu) ** 2)


def select_confident(prev_losses, count: int):
    """Mark the ``count`` smallest losses (ties to the lower index).

    Returns ``(v, lam)`` where ``lam`` is the largest selected loss, or
    ``inf`` when every sample is selected.
    """
    losses = np.asarray(prev_losses, dtype=np.float64)
    n = losses.size
    if not 0 <= count <= n:
        raise ValueError(f"count={count} outside [0, {n}]")
    if not np.all(np.isfinite(losses)):
        raise ValueError("losses must be finite")
    v = np.zeros(n, dtype=np.int8)
    if count == n:
        v[:] = 1
        return v, math.inf
    order = np.argsort(losses, kind="stable")
    chosen = order[:count]
    v[chosen] = 1
    lam = float(losses[order[count - 1]]) if count else -math.inf
    return v, lam


def spl_select(losses, lam: float) -> np.ndarray:
    """Plain self-paced rule: keep samples whose loss is below ``lam``."""
    if not math.isfinite(lam):
        raise ValueError("lambda must be finite")
    return (np.asarray(losses) < lam).astype(np.int8)


def choose_m(warmup_history, n: int, epsilon_known: float | None = None) -> int:
    """Initial curriculum size from warmup confident counts or a known noise rate."""
    if epsilon_known is None:
        if len(warmup_history) == 0:
            raise ValueError("warmup history is empty")
        m = max(warmup_history)
    else:
        m = 0.65 * (1.0 - epsilon_known) * n
    lo, hi = math.ceil(0.1 * n), math.floor(0.5 * n)
    return int(min(max(round(m), lo), hi))
