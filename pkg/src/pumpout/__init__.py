"""Pumpout training laboratory for learning with noisy labels."""

from .correction import backward_loss, nn_backward_loss, unbiasedness_residual
from .data import DataSplits, NoisyDataset, inject_noise, load_idx_mnist, synth_blobs
from .noise import TransitionMatrix, corrupt, invert, pair_flip, symmetry_flip
from .schedule import KeepSchedule, keep_rate, label_precision, select_small_loss
from .trainers import ALGORITHMS, EpochMetrics, TrainConfig, TrainResult, pumpout_epoch, train

__version__ = "0.1.0"
