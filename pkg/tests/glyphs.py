"""Procedural ten-class digit-glyph dataset in MNIST's IDX format.

The acceptance and end-to-end tests need a small labeled image dataset
with MNIST-like structure (dark background, one bright glyph per image,
ten classes). Real MNIST is not bundled; this module renders hand-drawn
8x8 digit bitmaps with random placement, intensity, blur, and pixel noise,
and writes genuine IDX files so the production loaders are exercised
unchanged. When a directory with real MNIST files is supplied via
GDD_DATA_DIR, the fixtures below prefer it automatically.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

GLYPHS = {
    0: ["..###...",
        ".#...#..",
        ".#..##..",
        ".#.#.#..",
        ".##..#..",
        ".#...#..",
        "..###...",
        "........"],
    1: ["...#....",
        "..##....",
        "...#....",
        "...#....",
        "...#....",
        "...#....",
        "..###...",
        "........"],
    2: ["..###...",
        ".#...#..",
        ".....#..",
        "....#...",
        "...#....",
        "..#.....",
        ".#####..",
        "........"],
    3: ["..###...",
        ".#...#..",
        ".....#..",
        "...##...",
        ".....#..",
        ".#...#..",
        "..###...",
        "........"],
    4: ["....#...",
        "...##...",
        "..#.#...",
        ".#..#...",
        ".#####..",
        "....#...",
        "....#...",
        "........"],
    5: [".#####..",
        ".#......",
        ".####...",
        ".....#..",
        ".....#..",
        ".#...#..",
        "..###...",
        "........"],
    6: ["..###...",
        ".#......",
        ".####...",
        ".#...#..",
        ".#...#..",
        ".#...#..",
        "..###...",
        "........"],
    7: [".#####..",
        ".....#..",
        "....#...",
        "...#....",
        "..#.....",
        "..#.....",
        "..#.....",
        "........"],
    8: ["..###...",
        ".#...#..",
        ".#...#..",
        "..###...",
        ".#...#..",
        ".#...#..",
        "..###...",
        "........"],
    9: ["..###...",
        ".#...#..",
        ".#...#..",
        "..####..",
        ".....#..",
        ".....#..",
        "..###...",
        "........"],
}


def _bitmap(digit: int) -> np.ndarray:
    rows = GLYPHS[digit]
    return np.array([[1.0 if ch == "#" else 0.0 for ch in row] for row in rows], dtype=np.float32)


def _box_blur(img: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1)
    out = np.zeros_like(img)
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            out += padded[dy : dy + img.shape[0], dx : dx + img.shape[1]]
    return out / 9.0


def make_glyph_dataset(per_class: int, seed: int, size: int = 28):
    """Render per_class images for each of the ten digits; returns (u8 images, labels)."""
    rng = np.random.default_rng(seed)
    scale = 3
    canvas_pad = size - 8 * scale  # free room for random placement
    images = np.zeros((10 * per_class, size, size), dtype=np.uint8)
    labels = np.zeros(10 * per_class, dtype=np.uint8)
    i = 0
    for digit in range(10):
        glyph = np.kron(_bitmap(digit), np.ones((scale, scale), dtype=np.float32))
        for _ in range(per_class):
            img = np.zeros((size, size), dtype=np.float32)
            oy, ox = rng.integers(0, canvas_pad + 1, size=2)
            img[oy : oy + 8 * scale, ox : ox + 8 * scale] = glyph
            img = _box_blur(img) * rng.uniform(0.65, 1.0)
            img += rng.normal(0.0, 0.06, img.shape).astype(np.float32)
            images[i] = (np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
            labels[i] = digit
            i += 1
    order = rng.permutation(len(labels))
    return images[order], labels[order]


def write_idx_pair(directory, images: np.ndarray, labels: np.ndarray, split: str) -> None:
    """Write a (images, labels) pair as canonical big-endian IDX files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    prefix = "train" if split == "train" else "t10k"
    n, rows, cols = images.shape
    with open(directory / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.tobytes())
    with open(directory / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.tobytes())


def ensure_glyph_data_dir(root, train_per_class: int = 600, test_per_class: int = 200) -> Path:
    """Create (once) a data directory with glyph train/test IDX files.

    Returns the real-MNIST directory instead when GDD_DATA_DIR points at
    one, so the same tests run on the genuine dataset where available.
    """
    env_dir = os.environ.get("GDD_DATA_DIR", "")
    if env_dir and (Path(env_dir) / "train-images-idx3-ubyte").exists():
        return Path(env_dir)
    root = Path(root)
    marker = root / "t10k-labels-idx1-ubyte"
    if not marker.exists():
        train_images, train_labels = make_glyph_dataset(train_per_class, seed=1234)
        test_images, test_labels = make_glyph_dataset(test_per_class, seed=4321)
        write_idx_pair(root, train_images, train_labels, "train")
        write_idx_pair(root, test_images, test_labels, "test")
    return root
