"""Pumpout training loops.

Every trainer is the same mini-batch loop: samples that satisfy a fitting
rule get weight +1 (descent), the others get weight -gamma (scaled
ascent), the weighted gradient is averaged over the full batch size and
handed to the optimizer. The six algorithms differ only in the fitting rule,
the per-sample loss (plain or backward-corrected) and gamma.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import nn
from .data import DataSplits, NoisyDataset
from .noise import TransitionMatrix, invert
from .optim import OptimizerState, apply_update, init_state
from .schedule import KeepSchedule, keep_rate, select_small_loss

log = logging.getLogger(__name__)

ALGORITHMS = ("standard", "mentornet_lite", "pumpout_sl", "bc", "nnbc", "pumpout_bc")
CORRECTED = ("bc", "nnbc", "pumpout_bc")

FittingRule = Callable[[np.ndarray, int], np.ndarray]


@dataclass
class TrainConfig:
    algorithm: str = "pumpout_sl"
    gamma: float = 0.05
    batch_size: int = 128
    learning_rate: float = 1e-3
    max_epochs: int = 200
    tau: float = 0.0
    warmup_epochs: int = 10
    optimizer: str = "adam"
    seed: int = 0
    eval_interval: int = 1
    hidden: tuple[int, ...] = (64, 64)
    activation: str = "softsign"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.eval_interval < 1:
            raise ValueError("batch_size, max_epochs and eval_interval must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        self.hidden = tuple(int(h) for h in self.hidden)


@dataclass
class FitDecision:
    """Outcome of the fitting rule on one mini-batch."""

    indices: np.ndarray  # dataset rows in this batch
    fitting: np.ndarray  # bool per sample
    weights: np.ndarray  # +1 where fitting, -gamma elsewhere
    losses: np.ndarray  # per-sample loss before the update (raw, may be negative when corrected)


@dataclass
class EpochMetrics:
    epoch: int
    test_accuracy: Optional[float]
    label_precision: Optional[float]
    mean_train_loss: float
    validation_accuracy: Optional[float] = None


@dataclass
class TrainResult:
    config: TrainConfig
    net: nn.Network
    metrics: list[EpochMetrics] = field(default_factory=list)

    @property
    def final(self) -> EpochMetrics:
        return self.metrics[-1]


# fitting rules: (per-sample losses, 1-indexed epoch) -> bool mask


def always_fitting(losses: np.ndarray, epoch: int) -> np.ndarray:
    return np.ones(len(losses), dtype=bool)


def non_negative(losses: np.ndarray, epoch: int) -> np.ndarray:
    return losses >= 0


@dataclass(frozen=True)
class SmallLoss:
    schedule: KeepSchedule

    def __call__(self, losses: np.ndarray, epoch: int) -> np.ndarray:
        mask = np.zeros(len(losses), dtype=bool)
        mask[select_small_loss(losses, keep_rate(epoch, self.schedule))] = True
        return mask


def pumpout_epoch(
    net: nn.Network,
    state: OptimizerState,
    X: np.ndarray,
    y: np.ndarray,
    order: np.ndarray,
    fitting: FittingRule,
    gamma: float,
    batch_size: int,
    epoch: int = 1,
    T_inv: np.ndarray | None = None,
) -> tuple[nn.Network, OptimizerState, list[FitDecision]]:
    """One pass over ``X[order]`` in mini-batches, one optimizer update per batch.

    The trailing partial batch is kept and averaged over its own size.
    """
    k = net.class_count
    decisions = []
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        coeffs = nn.loss_coefficients(y[idx], k, T_inv)
        cache = nn.forward_cache(net, X[idx])
        losses, dz = nn.coefficient_losses(cache[-1][1], coeffs)
        try:
            fit = np.asarray(fitting(losses, epoch), dtype=bool)
        except Exception as exc:
            raise RuntimeError(f"fitting rule failed at epoch {epoch}, batch starting at {start}: {exc}") from exc
        if fit.shape != losses.shape:
            raise RuntimeError(f"fitting rule returned shape {fit.shape} for a batch of {len(losses)} at epoch {epoch}")
        weights = np.where(fit, 1.0, -gamma)
        grad = nn.backward(net, cache, dz * (weights / len(idx))[:, None])
        net, state = apply_update(net, grad, state)
        decisions.append(FitDecision(idx, fit, weights, losses))
    return net, state, decisions


def accuracy(net: nn.Network, ds: NoisyDataset, use_noisy: bool = False) -> float:
    """Argmax classification rate; ties in the logits go to the smallest class index."""
    ds.require_nonempty()
    target = ds.noisy_labels if use_noisy else ds.clean_labels
    return float(np.mean(nn.predict(net, ds.features) == target))


def test_accuracy(net: nn.Network, test: NoisyDataset) -> float:
    return accuracy(net, test)


test_accuracy.__test__ = False  # not a pytest test


def _rule_for(config: TrainConfig) -> FittingRule:
    if config.algorithm in ("pumpout_sl", "mentornet_lite"):
        return SmallLoss(KeepSchedule(config.tau, config.warmup_epochs))
    if config.algorithm in ("nnbc", "pumpout_bc"):
        return non_negative
    return always_fitting


def _effective_gamma(config: TrainConfig) -> float:
    if config.algorithm in ("mentornet_lite", "nnbc"):
        return 0.0
    if config.algorithm in ("standard", "bc"):
        return 0.0  # nothing is ever non-fitting
    return config.gamma


def _reported(config: TrainConfig, losses: np.ndarray) -> np.ndarray:
    if config.algorithm in ("nnbc", "pumpout_bc"):
        return np.maximum(losses, 0.0)
    return losses


def train(
    config: TrainConfig,
    data: DataSplits,
    T: TransitionMatrix | np.ndarray | None = None,
    on_epoch: Callable[[EpochMetrics], None] | None = None,
    fitting: FittingRule | None = None,
    on_batch: Callable[[int, FitDecision, np.ndarray], None] | None = None,
) -> TrainResult:
    """Run ``config.algorithm`` for ``config.max_epochs`` epochs on the noisy training split.

    ``fitting`` overrides the algorithm's own rule (used to test the generic loop).
    ``on_batch(epoch, decision, reported_losses)`` sees every mini-batch; the
    reported losses are clipped at zero for the non-negative corrections.
    """
    train_ds = data.train.require_nonempty()
    T_inv = None
    if config.algorithm in CORRECTED:
        if T is None:
            raise ValueError(f"{config.algorithm} needs a transition matrix")
        T_inv = T.inverse if isinstance(T, TransitionMatrix) else invert(T)
    rule = fitting or _rule_for(config)
    gamma = config.gamma if fitting is not None else _effective_gamma(config)

    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    sizes = (data.dim, *config.hidden, data.k)
    net = nn.init_network(sizes, config.activation, np.random.default_rng(init_seq))
    state = init_state(net, config.optimizer, config.learning_rate)
    shuffle_rng = np.random.default_rng(shuffle_seq)

    X, y, clean = train_ds.features, train_ds.noisy_labels, train_ds.clean_mask
    result = TrainResult(config, net)
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_ds))
        net, state, decisions = pumpout_epoch(
            net, state, X, y, order, rule, gamma, config.batch_size, epoch, T_inv
        )
        reported = [_reported(config, d.losses) for d in decisions]
        if on_batch is not None:
            for d, r in zip(decisions, reported):
                on_batch(epoch, d, r)
        losses = np.concatenate(reported)
        precision = None
        if config.algorithm not in CORRECTED:
            precision = float(np.mean([clean[d.indices][d.fitting].mean() for d in decisions]))
        evaluate = epoch % config.eval_interval == 0 or epoch == config.max_epochs
        row = EpochMetrics(
            epoch=epoch,
            test_accuracy=accuracy(net, data.test) if evaluate else None,
            label_precision=precision,
            mean_train_loss=float(losses.mean()),
            validation_accuracy=(
                accuracy(net, data.validation, use_noisy=True) if evaluate and len(data.validation) else None
            ),
        )
        result.metrics.append(row)
        log.debug("%s epoch %d: %s", config.algorithm, epoch, row)
        if on_epoch is not None:
            on_epoch(row)
    result.net = net
    return result


def _with(config: TrainConfig, **changes) -> TrainConfig:
    return TrainConfig(**{**config.__dict__, **changes})


def train_standard(config: TrainConfig, data: DataSplits, **kw) -> TrainResult:
    return train(_with(config, algorithm="standard"), data, **kw)


def train_pumpout_sl(config: TrainConfig, data: DataSplits, **kw) -> TrainResult:
    return train(_with(config, algorithm="pumpout_sl"), data, **kw)


def train_mentornet_lite(config: TrainConfig, data: DataSplits, **kw) -> TrainResult:
    """Small-loss selection without the ascent branch (Pumpout_SL at gamma = 0)."""
    return train(_with(config, algorithm="mentornet_lite"), data, **kw)


def train_bc(config: TrainConfig, data: DataSplits, T, **kw) -> TrainResult:
    return train(_with(config, algorithm="bc"), data, T, **kw)


def train_nnbc(config: TrainConfig, data: DataSplits, T, **kw) -> TrainResult:
    return train(_with(config, algorithm="nnbc"), data, T, **kw)


def train_pumpout_bc(config: TrainConfig, data: DataSplits, T, **kw) -> TrainResult:
    return train(_with(config, algorithm="pumpout_bc"), data, T, **kw)
