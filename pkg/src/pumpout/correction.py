"""Backward-corrected losses and the non-negative variant.

A corrected loss indexes the observed label's row of ``T^-1`` against the
per-class loss vector, so its expectation over noisy labels equals the
clean-label loss. It can be negative; clipping at zero gives the
non-negative correction, and its sign is the fitting test used by the
corrected Pumpout trainer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noise import invert


@dataclass(frozen=True)
class CorrectedLoss:
    raw: float

    @property
    def clipped(self) -> float:
        return max(0.0, self.raw)

    @property
    def fitting(self) -> bool:
        return self.raw >= 0


def _check(loss_vec, y, T_inv):
    loss_vec = np.asarray(loss_vec, dtype=np.float64)
    T_inv = np.asarray(T_inv, dtype=np.float64)
    k = loss_vec.shape[-1]
    if T_inv.shape != (k, k):
        raise ValueError(f"inverse matrix {T_inv.shape} does not match loss vector of length {k}")
    if not 0 <= y < k:
        raise ValueError(f"label {y} out of range for {k} classes")
    return loss_vec, T_inv


def backward_loss(loss_vec, y: int, T_inv) -> float:
    loss_vec, T_inv = _check(loss_vec, y, T_inv)
    return float(T_inv[y] @ loss_vec)


def nn_backward_loss(loss_vec, y: int, T_inv) -> float:
    return max(0.0, backward_loss(loss_vec, y, T_inv))


def corrected(loss_vec, y: int, T_inv) -> CorrectedLoss:
    return CorrectedLoss(backward_loss(loss_vec, y, T_inv))


def batch_backward_losses(loss_matrix, y, T_inv) -> np.ndarray:
    """Row-wise :func:`backward_loss` for a (B, k) loss matrix."""
    return (np.asarray(T_inv)[np.asarray(y)] * np.asarray(loss_matrix)).sum(axis=1)


def unbiasedness_residual(loss_vec, T) -> np.ndarray:
    """``sum_j T_ij * backward_loss(l, j) - l_i`` for each clean class i (zero up to rounding)."""
    T = np.asarray(T, dtype=np.float64)
    loss_vec = np.asarray(loss_vec, dtype=np.float64)
    T_inv = invert(T)
    per_noisy = np.array([backward_loss(loss_vec, j, T_inv) for j in range(len(loss_vec))])
    return T @ per_noisy - loss_vec
