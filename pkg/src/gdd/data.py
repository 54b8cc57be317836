"""Dataset ingestion and the synthetic dataset container.

Readers accept the canonical binary formats of the three benchmark
datasets (IDX for MNIST/FashionMNIST, the 3073-byte-record CIFAR-10
batches) and normalize pixels linearly from [0, 255] to [-1, 1], matching
the generator's tanh output range. Synthetic datasets round-trip through
the "GDDS" container bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .checkpoint import CheckpointBundle, checkpoint_digest, load_checkpoint
from .errors import (
    BadMagic,
    CountMismatch,
    EmptyDataset,
    InsufficientSamples,
    LabelOutOfRange,
    TruncatedFile,
)
from .seeding import derive_seed, make_generator

NUM_CLASSES = 10

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

SYNTH_MAGIC = b"GDDS"
SYNTH_VERSION = 1

# Canonical file names per dataset; MNIST and FashionMNIST share the IDX layout.
IDX_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILES = ("test_batch.bin",)
_CIFAR_RECORD = 3073  # 1 label byte + 3 * 1024 pixel bytes


@dataclass
class LabeledImageDataset:
    """Images as N x C x H x W float32 in [-1, 1] with integer class labels."""

    images: torch.Tensor
    labels: torch.Tensor
    name: str
    split: str

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ValueError(f"images must be N x C x H x W, got {tuple(self.images.shape)}")
        if len(self.images) != len(self.labels):
            raise CountMismatch(f"{len(self.images)} images vs {len(self.labels)} labels")
        self.images = self.images.float()
        self.labels = self.labels.long()

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])


@dataclass
class SyntheticExport:
    """A class-balanced synthetic dataset: exactly ipc images per class."""

    ipc: int
    images: torch.Tensor
    labels: torch.Tensor
    provenance: tuple[str, int] = ("", -1)

    def __post_init__(self):
        counts = torch.bincount(self.labels.long(), minlength=NUM_CLASSES)
        if not bool((counts == self.ipc).all()):
            raise CountMismatch(
                f"expected exactly {self.ipc} images per class, got counts {counts.tolist()}"
            )


def _bytes_to_pixels(raw: np.ndarray) -> np.ndarray:
    # Affine map [0, 255] -> [-1, 1]; byte 0 lands exactly on -1.0, byte 255 on 1.0.
    return raw.astype(np.float32) / 255.0 * 2.0 - 1.0


def _read_be_u32s(raw: bytes, path, count: int) -> tuple[int, ...]:
    if len(raw) < 4 * count:
        raise TruncatedFile(f"{path}: header needs {4 * count} bytes, file has {len(raw)}")
    return struct.unpack(f">{count}I", raw[: 4 * count])


def load_idx_dataset(image_path, label_path, name: str = "MNIST", split: str = "train") -> LabeledImageDataset:
    """Read an IDX image/label file pair (the MNIST family's native format)."""
    img_raw = Path(image_path).read_bytes()
    magic, n, rows, cols = _read_be_u32s(img_raw, image_path, 4)
    if magic != IDX_IMAGE_MAGIC:
        raise BadMagic(f"{image_path}: expected magic {IDX_IMAGE_MAGIC:#010x}, got {magic:#010x}")
    if len(img_raw) < 16 + n * rows * cols:
        raise TruncatedFile(
            f"{image_path}: header promises {n} images of {rows}x{cols}, "
            f"payload has only {len(img_raw) - 16} bytes"
        )
    pixels = np.frombuffer(img_raw, dtype=np.uint8, count=n * rows * cols, offset=16)

    lab_raw = Path(label_path).read_bytes()
    lab_magic, lab_n = _read_be_u32s(lab_raw, label_path, 2)
    if lab_magic != IDX_LABEL_MAGIC:
        raise BadMagic(f"{label_path}: expected magic {IDX_LABEL_MAGIC:#010x}, got {lab_magic:#010x}")
    if len(lab_raw) < 8 + lab_n:
        raise TruncatedFile(f"{label_path}: header promises {lab_n} labels")
    if lab_n != n:
        raise CountMismatch(f"{n} images but {lab_n} labels")
    labels = np.frombuffer(lab_raw, dtype=np.uint8, count=lab_n, offset=8)
    if labels.size and labels.max() >= NUM_CLASSES:
        raise LabelOutOfRange(f"{label_path}: label {int(labels.max())} >= {NUM_CLASSES}")

    images = _bytes_to_pixels(pixels).reshape(n, 1, rows, cols)
    return LabeledImageDataset(
        torch.from_numpy(images), torch.from_numpy(labels.astype(np.int64)), name, split
    )


def load_cifar10_binary(directory, split: str = "train") -> LabeledImageDataset:
    """Read CIFAR-10 binary batches: records of 1 label byte + 3072 RGB-plane bytes."""
    directory = Path(directory)
    files = CIFAR_TRAIN_FILES if split == "train" else CIFAR_TEST_FILES
    images, labels = [], []
    for fname in files:
        raw = (directory / fname).read_bytes()
        if len(raw) == 0 or len(raw) % _CIFAR_RECORD != 0:
            raise TruncatedFile(
                f"{directory / fname}: size {len(raw)} is not a multiple of {_CIFAR_RECORD}"
            )
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, _CIFAR_RECORD)
        batch_labels = records[:, 0]
        if batch_labels.max() >= NUM_CLASSES:
            raise LabelOutOfRange(
                f"{directory / fname}: label {int(batch_labels.max())} >= {NUM_CLASSES}"
            )
        labels.append(batch_labels)
        images.append(records[:, 1:].reshape(-1, 3, 32, 32))
    pixels = _bytes_to_pixels(np.concatenate(images))
    return LabeledImageDataset(
        torch.from_numpy(pixels),
        torch.from_numpy(np.concatenate(labels).astype(np.int64)),
        "CIFAR10",
        split,
    )


def subset(dataset: LabeledImageDataset, per_class: int, seed: int) -> LabeledImageDataset:
    """Class-balanced sample without replacement; deterministic in the seed."""
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    rng = make_generator(derive_seed(seed, "subset"))
    picks = []
    for cls in torch.unique(dataset.labels, sorted=True):
        idx = (dataset.labels == cls).nonzero().flatten()
        if len(idx) < per_class:
            raise InsufficientSamples(
                f"class {int(cls)} has {len(idx)} samples, need {per_class}"
            )
        order = torch.randperm(len(idx), generator=rng)[:per_class]
        picks.append(idx[order])
    chosen = torch.cat(picks)
    return LabeledImageDataset(
        dataset.images[chosen].clone(),
        dataset.labels[chosen].clone(),
        dataset.name,
        dataset.split,
    )


def export_synthetic(checkpoint, ipc: int, seed: int) -> SyntheticExport:
    """Generate exactly ipc images per class from a generator checkpoint.

    ``checkpoint`` is a path to a GDD1 file or an in-memory CheckpointBundle.
    The noise stream is seeded, classes are generated in order 0..K-1, so
    the same checkpoint and seed always yield identical images.
    """
    if ipc < 1:
        raise ValueError(f"ipc must be >= 1, got {ipc}")
    if isinstance(checkpoint, CheckpointBundle):
        bundle = checkpoint
        source = "in-memory"
    else:
        bundle = load_checkpoint(checkpoint)
        source = checkpoint_digest(checkpoint)
    generator = bundle.build()
    generator.eval()
    rng = make_generator(derive_seed(seed, "export"))
    labels = torch.arange(NUM_CLASSES).repeat_interleave(ipc)
    noise = torch.randn(len(labels), bundle.spec.noise_dim, generator=rng)
    with torch.no_grad():
        images = generator(noise, labels)
    return SyntheticExport(ipc, images, labels, provenance=(source, int(seed)))


def write_synthetic(path, export: SyntheticExport) -> None:
    """Write the GDDS container: 16-byte header, N label bytes, N*C*H*W f32 LE."""
    n, c, h, w = export.images.shape
    if max(c, h, w) > 255:
        raise ValueError(f"dimensions must fit in one byte each, got {(c, h, w)}")
    packed = (c << 16) | (h << 8) | w
    with open(path, "wb") as f:
        f.write(SYNTH_MAGIC)
        f.write(struct.pack("<III", SYNTH_VERSION, n, packed))
        f.write(export.labels.numpy().astype(np.uint8).tobytes())
        f.write(export.images.numpy().astype("<f4").tobytes())


def read_synthetic(path) -> SyntheticExport:
    raw = Path(path).read_bytes()
    if raw[:4] != SYNTH_MAGIC:
        raise BadMagic(f"{path}: expected magic {SYNTH_MAGIC!r}, got {raw[:4]!r}")
    if len(raw) < 16:
        raise TruncatedFile(f"{path}: header needs 16 bytes, file has {len(raw)}")
    version, n, packed = struct.unpack("<III", raw[4:16])
    if version != SYNTH_VERSION:
        raise TruncatedFile(f"{path}: unsupported container version {version}")
    if n == 0:
        raise EmptyDataset(f"{path}: container holds no samples")
    c, h, w = (packed >> 16) & 0xFF, (packed >> 8) & 0xFF, packed & 0xFF
    expected = 16 + n + n * c * h * w * 4
    if len(raw) < expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, file has {len(raw)}")
    labels = np.frombuffer(raw, dtype=np.uint8, count=n, offset=16).astype(np.int64)
    images = np.frombuffer(raw, dtype="<f4", count=n * c * h * w, offset=16 + n)
    if n % NUM_CLASSES != 0:
        raise CountMismatch(f"{path}: {n} samples cannot split evenly over {NUM_CLASSES} classes")
    return SyntheticExport(
        n // NUM_CLASSES,
        torch.from_numpy(images.copy()).reshape(n, c, h, w),
        torch.from_numpy(labels),
        provenance=(f"file:{path}", -1),
    )


def load_benchmark(name: str, data_dir, split: str = "train") -> LabeledImageDataset:
    """Load one of the three benchmark datasets from its canonical files."""
    data_dir = Path(data_dir)
    if name in ("MNIST", "FashionMNIST"):
        image_file, label_file = IDX_FILES[split]
        return load_idx_dataset(
            data_dir / image_file, data_dir / label_file, name=name, split=split
        )
    if name == "CIFAR10":
        return load_cifar10_binary(data_dir, split=split)
    raise ValueError(f"unknown dataset '{name}'; expected MNIST, FashionMNIST, or CIFAR10")
