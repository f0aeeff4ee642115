"""Keep-rate schedule, small-loss selection and label precision."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KeepSchedule:
    tau: float
    warmup_epochs: int = 10

    def __post_init__(self):
        if not 0 <= self.tau < 1:
            raise ValueError(f"tau must lie in [0, 1), got {self.tau}")
        if self.warmup_epochs < 1:
            raise ValueError("warmup_epochs must be >= 1")

    def __call__(self, t: int) -> float:
        return keep_rate(t, self)


def keep_rate(t: int, schedule: KeepSchedule) -> float:
    """Fraction of a mini-batch kept at (1-indexed) epoch t: ``1 - min(tau t / T_k, tau)``."""
    if t < 1:
        raise ValueError("epochs are 1-indexed")
    return 1.0 - min(t / schedule.warmup_epochs * schedule.tau, schedule.tau)


def keep_count(rate: float, batch_size: int) -> int:
    # tolerate representation error so that e.g. 0.8 * 10 gives 8, not 9
    return min(batch_size, math.ceil(rate * batch_size - 1e-9))


def select_small_loss(losses, rate: float) -> np.ndarray:
    """Sorted indices of the ceil(rate * B) smallest losses; ties go to the lower index."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.size == 0:
        raise ValueError("need a non-empty 1-D vector of losses")
    if not 0 < rate <= 1:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    n = keep_count(rate, losses.size)
    return np.sort(np.argsort(losses, kind="stable")[:n])


def label_precision(selected, clean_mask) -> float:
    """Share of selected samples whose observed label is the clean one."""
    selected = np.asarray(selected, dtype=np.int64)
    if selected.size == 0:
        raise ValueError("empty selection")
    return float(np.asarray(clean_mask, dtype=bool)[selected].mean())
