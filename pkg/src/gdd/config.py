"""Run configuration: a flat key = value text format with strict validation.

Every hyperparameter of the pipeline surfaces as a named field. Defaults
follow the reference recipe: tau = 2 everywhere; lambda_skd = 0.001 for
MNIST and 0.01 for FashionMNIST/CIFAR-10; batch size follows IPC
(1 -> 32, 10 -> 64, 50 -> 128). Unknown keys are rejected with their line
number so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

DATA_DIR_ENV = "GDD_DATA_DIR"

DATASET_NAMES = {"mnist": "MNIST", "fashionmnist": "FashionMNIST", "cifar10": "CIFAR10"}
DATASET_SHAPES = {"MNIST": (1, 28, 28), "FashionMNIST": (1, 28, 28), "CIFAR10": (3, 32, 32)}
LAMBDA_SKD_DEFAULTS = {"MNIST": 0.001, "FashionMNIST": 0.01, "CIFAR10": 0.01}

_ARCH_CHOICES = ("ConvNet3", "ResNet10", "ResNet18", "AlexNet", "VGG11")


def default_batch_size(ipc: int) -> int:
    """Reference batch sizes keyed by IPC: 1 -> 32, 10 -> 64, 50 -> 128."""
    if ipc < 10:
        return 32
    if ipc < 50:
        return 64
    return 128


@dataclass
class RunConfig:
    dataset: str = "MNIST"
    data_dir: str = ""
    out_dir: str = "gdd-run"
    seed: int = 0
    ipc: int = 10
    batch_size: int | None = None
    tau: float = 2.0
    lambda_skd: float | None = None
    disable_standardization: bool = False
    gan_steps: int = 2000
    distill_steps: int = 2000
    lr_generator: float = 2e-4
    lr_discriminator: float = 2e-4
    noise_dim: int = 100
    width_multiplier: float = 1.0
    pool_archs: tuple[str, ...] = ("ConvNet3", "ResNet10", "ResNet18")
    pool_width_multiplier: float = 1.0
    refresh_interval: int = 100
    subset_per_class: int = 0
    eval_arch: str = "ConvNet3"
    eval_epochs: int = 300
    eval_width_multiplier: float = 1.0
    trials: int = 5
    jobs: int = 1


_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_value(name: str, text: str, line: int | None):
    kind = RunConfig.__annotations__[name]
    try:
        if name == "dataset":
            key = text.strip().lower().replace("-", "").replace("_", "")
            if key not in DATASET_NAMES:
                raise ValueError(f"expected one of {sorted(DATASET_NAMES)}")
            return DATASET_NAMES[key]
        if name == "pool_archs":
            archs = tuple(a.strip() for a in text.split(",") if a.strip())
            for a in archs:
                if a not in _ARCH_CHOICES:
                    raise ValueError(f"unknown architecture '{a}'")
            if not archs:
                raise ValueError("needs at least one architecture")
            return archs
        if kind == "bool":
            word = text.strip().lower()
            if word not in _BOOL_WORDS:
                raise ValueError("expected true/false")
            return _BOOL_WORDS[word]
        if kind == "int" or kind == "int | None":
            return int(text)
        if kind == "float" or kind == "float | None":
            return float(text)
        return text.strip()
    except ValueError as e:
        raise ConfigError(f"cannot parse '{text}': {e}", field=name, line=line) from e


def parse_config(path) -> RunConfig:
    """Parse a key = value file into a RunConfig, then validate it."""
    raw: dict[str, tuple[str, int]] = {}
    known = {f.name for f in fields(RunConfig)}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigError(f"unknown key '{key}'", field=key, line=lineno)
        if key in raw:
            raise ConfigError(f"duplicate key '{key}'", field=key, line=lineno)
        raw[key] = (value.strip(), lineno)

    config = RunConfig()
    for key, (value, lineno) in raw.items():
        setattr(config, key, _parse_value(key, value, lineno))
    return validate(config)


def apply_overrides(config: RunConfig, **overrides) -> RunConfig:
    """Apply command-line overrides (ignoring None values) and re-validate."""
    for key, value in overrides.items():
        if value is None:
            continue
        if not hasattr(config, key):
            raise ConfigError(f"unknown override '{key}'", field=key)
        setattr(config, key, value)
    return validate(config)


def validate(config: RunConfig) -> RunConfig:
    """Fill derived defaults and check every field; raises ConfigError."""

    def check(cond: bool, field: str, message: str):
        if not cond:
            raise ConfigError(message, field=field)

    check(config.dataset in DATASET_SHAPES, "dataset", f"unknown dataset '{config.dataset}'")
    if not config.data_dir:
        config.data_dir = os.environ.get(DATA_DIR_ENV, ".")
    check(config.seed >= 0, "seed", "seed must be >= 0")
    check(config.ipc >= 1, "ipc", "ipc must be >= 1")
    if config.batch_size is None:
        config.batch_size = default_batch_size(config.ipc)
    check(config.batch_size >= 1, "batch_size", "batch_size must be >= 1")
    check(config.tau > 0, "tau", f"tau must be > 0, got {config.tau}")
    if config.lambda_skd is None:
        config.lambda_skd = LAMBDA_SKD_DEFAULTS[config.dataset]
    check(config.lambda_skd >= 0, "lambda_skd", "lambda_skd must be >= 0")
    check(config.gan_steps >= 0, "gan_steps", "gan_steps must be >= 0")
    check(config.distill_steps >= 0, "distill_steps", "distill_steps must be >= 0")
    check(config.lr_generator > 0, "lr_generator", "lr_generator must be > 0")
    check(config.lr_discriminator > 0, "lr_discriminator", "lr_discriminator must be > 0")
    check(config.noise_dim >= 1, "noise_dim", "noise_dim must be >= 1")
    check(config.width_multiplier > 0, "width_multiplier", "width_multiplier must be > 0")
    check(
        config.pool_width_multiplier > 0,
        "pool_width_multiplier",
        "pool_width_multiplier must be > 0",
    )
    check(config.refresh_interval >= 1, "refresh_interval", "refresh_interval must be >= 1")
    check(config.subset_per_class >= 0, "subset_per_class", "subset_per_class must be >= 0")
    check(config.eval_arch in _ARCH_CHOICES, "eval_arch", f"unknown architecture '{config.eval_arch}'")
    check(config.eval_epochs >= 1, "eval_epochs", "eval_epochs must be >= 1")
    check(
        config.eval_width_multiplier > 0,
        "eval_width_multiplier",
        "eval_width_multiplier must be > 0",
    )
    check(config.trials >= 1, "trials", "trials must be >= 1")
    check(config.jobs >= 1, "jobs", "jobs must be >= 1")
    return config


def write_resolved(path, config: RunConfig) -> None:
    """Write the fully resolved config: every field explicit, reproducible."""
    lines = ["# resolved run configuration (all defaults made explicit)"]
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = ",".join(value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = f"{value:.17g}"
        lines.append(f"{f.name} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")


def image_shape_for(config: RunConfig) -> tuple[int, int, int]:
    return DATASET_SHAPES[config.dataset]
