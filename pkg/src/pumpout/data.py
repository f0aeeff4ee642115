"""Datasets: synthetic Gaussian blobs, MNIST IDX files, and noise injection."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .noise import corrupt

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class FormatError(ValueError):
    pass


@dataclass
class NoisyDataset:
    features: np.ndarray  # (n, d) float64
    clean_labels: np.ndarray  # (n,) int64
    noisy_labels: np.ndarray  # (n,) int64, equal to clean until corrupted
    split: str
    k: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.features)
        if len(self.clean_labels) != n or len(self.noisy_labels) != n:
            raise ValueError(f"{self.split}: {n} feature rows but {len(self.clean_labels)} labels")
        if self.split not in ("train", "validation", "test"):
            raise ValueError(f"unknown split {self.split!r}")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def clean_mask(self) -> np.ndarray:
        return self.noisy_labels == self.clean_labels

    def require_nonempty(self) -> "NoisyDataset":
        if len(self) == 0:
            raise ValueError(f"{self.split} split is empty")
        return self


@dataclass
class DataSplits:
    train: NoisyDataset
    validation: NoisyDataset
    test: NoisyDataset

    @property
    def k(self) -> int:
        return self.train.k

    @property
    def dim(self) -> int:
        return self.train.features.shape[1]


def _subset(features, labels, idx, split, k, provenance) -> NoisyDataset:
    y = labels[idx].astype(np.int64)
    return NoisyDataset(features[idx], y, y.copy(), split, k, dict(provenance, split=split))


def _centre_directions(k: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vectors as far apart as the dimension allows, randomly rotated."""
    if dim == 1:
        return (np.arange(k) - (k - 1) / 2)[:, None] / ((k - 1) / 2)
    if dim >= k:
        q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
        return q.T
    angles = 2 * np.pi * np.arange(k) / k + rng.uniform(0, 2 * np.pi)
    out = np.zeros((k, dim))
    out[:, 0], out[:, 1] = np.cos(angles), np.sin(angles)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return out @ q.T


def synth_blobs(
    k: int = 5,
    per_class: int = 1000,
    dim: int = 2,
    spread: float = 1.0,
    seed: int = 0,
    separation: float = 4.0,
    val_fraction: float = 0.1,
    test_fraction: float = 0.2,
) -> DataSplits:
    """k isotropic Gaussian clusters, split per class (default 70/10/20).

    Centres are ``separation`` times mutually orthogonal unit vectors when
    ``dim >= k`` (evenly spaced on a randomly oriented circle otherwise);
    ``spread`` is the per-coordinate standard deviation around them.
    """
    if k < 2 or per_class < 1 or dim < 1:
        raise ValueError("need k >= 2, per_class >= 1, dim >= 1")
    rng = np.random.default_rng(seed)
    centres = separation * _centre_directions(k, dim, rng)
    labels = np.repeat(np.arange(k), per_class)
    features = centres[labels] + spread * rng.standard_normal((k * per_class, dim))

    n_val = round(val_fraction * per_class)
    n_test = round(test_fraction * per_class)
    n_train = per_class - n_val - n_test
    if n_train < 1:
        raise ValueError("split fractions leave no training data")
    parts = {"train": [], "validation": [], "test": []}
    for c in range(k):
        idx = c * per_class + rng.permutation(per_class)
        parts["train"].append(idx[:n_train])
        parts["validation"].append(idx[n_train : n_train + n_val])
        parts["test"].append(idx[n_train + n_val :])
    prov = {"source": "blobs", "seed": seed, "k": k, "dim": dim, "spread": spread}
    out = {}
    for name, chunks in parts.items():
        idx = np.concatenate(chunks)
        out[name] = _subset(features, labels, idx[rng.permutation(len(idx))], name, k, prov)
    return DataSplits(out["train"], out["validation"], out["test"])


def _read_idx(path: Path, magic: int, ndim: int, limit: int | None) -> tuple[np.ndarray, int]:
    """First ``limit`` records and the record count promised by the header."""
    raw = Path(path).read_bytes()
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated header at offset {len(raw)} (need {header} bytes)")
    (found,) = struct.unpack_from(">I", raw, 0)
    if found != magic:
        raise FormatError(f"{path}: bad magic 0x{found:08X} at offset 0, expected 0x{magic:08X}")
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    count = dims[0]
    item = int(np.prod(dims[1:], dtype=np.int64))
    n = count if limit is None else min(limit, count)
    need = header + count * item
    if len(raw) < need:
        raise FormatError(f"{path}: truncated data at offset {len(raw)}, header promises {need} bytes")
    data = np.frombuffer(raw, dtype=np.uint8, count=n * item, offset=header)
    return data.reshape((n, *dims[1:])), count


def load_idx_mnist(images_path, labels_path, limit: int | None = None, split: str = "train") -> NoisyDataset:
    """Uncorrupted dataset from an IDX image/label pair; pixels scaled to [0, 1], flattened."""
    images, n_images = _read_idx(Path(images_path), IDX_IMAGES_MAGIC, 3, limit)
    labels, n_labels = _read_idx(Path(labels_path), IDX_LABELS_MAGIC, 1, limit)
    if n_images != n_labels:
        raise FormatError(f"{images_path}: {n_images} images but {labels_path} has {n_labels} labels")
    features = images.reshape(len(images), int(np.prod(images.shape[1:]))).astype(np.float64) / 255.0
    y = labels.astype(np.int64)
    prov = {"source": "mnist", "images": str(images_path), "limit": limit}
    return NoisyDataset(features, y, y.copy(), split, 10, prov)


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as an IDX file (used to build fixtures)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = IDX_IMAGES_MAGIC if array.ndim == 3 else IDX_LABELS_MAGIC
    head = struct.pack(f">I{array.ndim}I", magic, *array.shape)
    Path(path).write_bytes(head + array.tobytes())


def split_validation(train: NoisyDataset, fraction: float, seed: int) -> tuple[NoisyDataset, NoisyDataset]:
    """Carve a seeded validation subset off a training set."""
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(train))
    n_val = round(fraction * len(train))
    keep, val = np.sort(idx[n_val:]), np.sort(idx[:n_val])

    def take(ix, name):
        return NoisyDataset(
            train.features[ix], train.clean_labels[ix], train.noisy_labels[ix], name, train.k,
            dict(train.provenance, split=name),
        )

    return take(keep, "train"), take(val, "validation")


def inject_noise(splits: DataSplits, T, seed) -> DataSplits:
    """Corrupt the training and validation labels with ``T``; the test split is left clean."""
    rng_train, rng_val = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    noise = {"kind": getattr(T, "kind", "custom"), "tau": getattr(T, "tau", None), "noise_seed": seed}

    def apply(ds: NoisyDataset, rng) -> NoisyDataset:
        return replace(ds, noisy_labels=corrupt(ds.clean_labels, T, rng), provenance=dict(ds.provenance, **noise))

    return DataSplits(apply(splits.train, rng_train), apply(splits.validation, rng_val), splits.test)
