"""Label transition matrices: construction, inversion, and label corruption.

``T[i, j] = Pr(noisy = j | clean = i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROW_TOL = 1e-12
DET_TOL = 1e-9


def invert(T) -> np.ndarray:
    """Inverse of a transition matrix; raises ``LinAlgError`` when |det| <= 1e-9."""
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"transition matrix must be square, got {T.shape}")
    if abs(np.linalg.det(T)) <= DET_TOL:
        raise np.linalg.LinAlgError("transition matrix is singular or ill-conditioned (|det| <= 1e-9)")
    # LAPACK getrf/getri: LU with partial pivoting
    return np.linalg.inv(T)


@dataclass(frozen=True)
class TransitionMatrix:
    entries: np.ndarray
    kind: str = "custom"
    tau: float = 0.0
    inverse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        T = np.array(self.entries, dtype=np.float64)
        if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] < 2:
            raise ValueError(f"transition matrix must be k x k with k >= 2, got {T.shape}")
        if not np.all(np.isfinite(T)) or np.any(T < 0):
            raise ValueError("transition matrix entries must be finite and non-negative")
        bad = np.abs(T.sum(axis=1) - 1.0) > ROW_TOL
        if np.any(bad):
            raise ValueError(f"rows {np.flatnonzero(bad).tolist()} do not sum to 1")
        T.setflags(write=False)
        inv = invert(T)
        inv.setflags(write=False)
        object.__setattr__(self, "entries", T)
        object.__setattr__(self, "inverse", inv)

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def identity(k: int) -> TransitionMatrix:
    return TransitionMatrix(np.eye(k), kind="none", tau=0.0)


def pair_flip(k: int, tau: float, allow_majority_noise: bool = False) -> TransitionMatrix:
    """Each class keeps 1-tau and sends tau to the next class, last class wrapping to the first."""
    if k < 2:
        raise ValueError("need at least 2 classes")
    if tau < 0 or tau >= 1:
        raise ValueError(f"noise rate must lie in [0, 1), got {tau}")
    if tau >= 0.5 and not allow_majority_noise:
        raise ValueError(f"pair flipping with tau={tau} >= 0.5 makes the wrong label the majority")
    T = (1.0 - tau) * np.eye(k)
    T[np.arange(k), (np.arange(k) + 1) % k] += tau
    return TransitionMatrix(T, kind="pair", tau=tau)


def symmetry_flip(k: int, tau: float) -> TransitionMatrix:
    """Each class keeps 1-tau and spreads tau evenly over the other k-1 classes."""
    if k < 2:
        raise ValueError("need at least 2 classes")
    if tau < 0 or tau >= 1:
        raise ValueError(f"noise rate must lie in [0, 1), got {tau}")
    if tau >= (k - 1) / k - 1e-12:
        raise ValueError(f"symmetry flipping needs tau < (k-1)/k = {(k - 1) / k}; it is singular there")
    T = np.full((k, k), tau / (k - 1))
    np.fill_diagonal(T, 1.0 - tau)
    return TransitionMatrix(T, kind="symmetry", tau=tau)


def load_matrix(path) -> TransitionMatrix:
    """Plain text: first line k, then k rows of k decimals."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        k = int(lines[0][0])
        rows = [[float(v) for v in ln] for ln in lines[1 : k + 1]]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: malformed transition matrix file ({exc})") from None
    if len(rows) != k or any(len(r) != k for r in rows) or len(lines) != k + 1:
        raise ValueError(f"{path}: expected {k} rows of {k} values")
    T = TransitionMatrix(np.array(rows))
    diag = np.diag(T.entries)
    return TransitionMatrix(T.entries, kind="custom", tau=float(1.0 - diag.min()))


def save_matrix(T, path) -> None:
    T = np.asarray(T)
    body = "\n".join(" ".join(repr(float(v)) for v in row) for row in T)
    Path(path).write_text(f"{T.shape[0]}\n{body}\n")


def corrupt(labels, T, seed) -> np.ndarray:
    """Resample every label i from row i of ``T`` (inverse CDF on one uniform per label)."""
    T = np.asarray(T, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    k = T.shape[0]
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = rng.random(labels.size)
    cdf = np.cumsum(T, axis=1)
    cdf[:, -1] = 1.0
    noisy = (u[:, None] >= cdf[labels]).sum(axis=1)
    return np.minimum(noisy, k - 1)
