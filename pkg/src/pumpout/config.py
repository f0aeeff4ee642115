"""Flat ``section.key = value`` experiment configs.

Example::

    # blobs, symmetric 50% noise
    data.source = blobs
    data.seed = 3
    noise.type = symmetry
    noise.rate = 0.5
    train.algorithm = pumpout_sl
    train.gamma = 0.05

Unknown keys are rejected so that typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .trainers import ALGORITHMS, CORRECTED, TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class DataSection:
    source: str = "blobs"
    seed: int = 0
    # blobs
    classes: int = 5
    per_class: int = 1000
    dim: int = 50
    spread: float = 1.0
    separation: float = 6.0
    val_fraction: float = 0.1
    test_fraction: float = 0.2
    # mnist (IDX files)
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    test_limit: Optional[int] = 2000
    # caps the training split for either source
    limit: Optional[int] = None


@dataclass
class NoiseSection:
    type: str = "none"
    rate: float = 0.0
    matrix: str = ""
    seed: Optional[int] = None  # defaults to data.seed + 1
    allow_majority: bool = False


@dataclass
class TrainSection:
    algorithm: str = "standard"
    gamma: float = 0.05
    batch_size: int = 128
    epochs: Optional[int] = None  # 100 for blobs, 200 for mnist
    lr: float = 0.001
    optimizer: str = "adam"
    seed: Optional[int] = None  # defaults to data.seed
    tau: Optional[float] = None  # defaults to noise.rate
    warmup: int = 10
    hidden: str = "64,64"
    activation: str = "softsign"
    eval_interval: int = 1


@dataclass
class ExperimentConfig:
    name: str = "run"
    data: DataSection = field(default_factory=DataSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    train: TrainSection = field(default_factory=TrainSection)

    @property
    def noise_seed(self) -> int:
        return self.data.seed + 1 if self.noise.seed is None else self.noise.seed

    def train_config(self) -> TrainConfig:
        t = self.train
        epochs = t.epochs if t.epochs is not None else (200 if self.data.source == "mnist" else 100)
        hidden = tuple(int(h) for h in t.hidden.split(",") if h.strip())
        try:
            return TrainConfig(
                algorithm=t.algorithm,
                gamma=t.gamma,
                batch_size=t.batch_size,
                learning_rate=t.lr,
                max_epochs=epochs,
                tau=self.noise.rate if t.tau is None else t.tau,
                warmup_epochs=t.warmup,
                optimizer=t.optimizer,
                seed=self.data.seed if t.seed is None else t.seed,
                eval_interval=t.eval_interval,
                hidden=hidden,
                activation=t.activation,
            )
        except ValueError as exc:
            raise ConfigError(f"train: {exc}") from None

    def flat(self) -> dict[str, object]:
        out: dict[str, object] = {"name": self.name}
        for section in ("data", "noise", "train"):
            for f in dataclasses.fields(getattr(self, section)):
                out[f"{section}.{f.name}"] = getattr(getattr(self, section), f.name)
        return out

    def dumps(self) -> str:
        return "".join(f"{k} = {'' if v is None else v}\n" for k, v in self.flat().items())


def _convert(key: str, raw: str, typ):
    raw = raw.strip()
    optional = typ.startswith("Optional[")
    base = typ[len("Optional[") : -1] if optional else typ
    if optional and raw.lower() in ("", "none"):
        return None
    try:
        if base == "int":
            return int(raw)
        if base == "float":
            return float(raw)
        if base == "bool":
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {base}") from None


def set_key(config: ExperimentConfig, key: str, raw: str) -> None:
    if key == "name":
        config.name = raw.strip()
        return
    section, _, name = key.partition(".")
    target = getattr(config, section, None) if section in ("data", "noise", "train") else None
    if target is None or not name:
        raise ConfigError(f"{key}: unknown key")
    types = {f.name: f.type for f in dataclasses.fields(target)}
    if name not in types:
        raise ConfigError(f"{key}: unknown key")
    setattr(target, name, _convert(key, raw, str(types[name])))


def parse_config(text: str, base: Path | None = None) -> ExperimentConfig:
    config = ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        set_key(config, key.strip(), raw)
    if base is not None:
        _resolve_paths(config, base)
    validate(config)
    return config


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    config = parse_config(path.read_text(), base=path.parent)
    if config.name == "run":
        config.name = path.stem
    return config


def _resolve_paths(config: ExperimentConfig, base: Path) -> None:
    for section, key in [("data", "train_images"), ("data", "train_labels"), ("data", "test_images"),
                         ("data", "test_labels"), ("noise", "matrix")]:
        value = getattr(getattr(config, section), key)
        if value and not Path(value).is_absolute():
            setattr(getattr(config, section), key, str(base / value))


def validate(config: ExperimentConfig) -> None:
    d, n, t = config.data, config.noise, config.train
    if d.source not in ("blobs", "mnist"):
        raise ConfigError(f"data.source: expected blobs or mnist, got {d.source!r}")
    if d.source == "mnist":
        for key in ("train_images", "train_labels", "test_images", "test_labels"):
            if not getattr(d, key):
                raise ConfigError(f"data.{key}: required when data.source = mnist")
    if n.type not in ("none", "pair", "symmetry", "custom"):
        raise ConfigError(f"noise.type: expected none, pair, symmetry or custom, got {n.type!r}")
    if n.type == "custom" and not n.matrix:
        raise ConfigError("noise.matrix: required when noise.type = custom")
    if n.type in ("pair", "symmetry") and not 0 <= n.rate < 1:
        raise ConfigError(f"noise.rate: must lie in [0, 1), got {n.rate}")
    if t.algorithm not in ALGORITHMS:
        raise ConfigError(f"train.algorithm: expected one of {', '.join(ALGORITHMS)}, got {t.algorithm!r}")
    if t.algorithm in CORRECTED and n.type == "none":
        raise ConfigError(f"noise.type: {t.algorithm} needs a transition matrix (set noise.type and noise.rate)")
    config.train_config()  # raises ConfigError on bad training values
