"""Deterministic seed derivation so every pipeline stage gets its own stream."""

from __future__ import annotations

import hashlib

import torch


def derive_seed(base_seed: int, *tags: str | int) -> int:
    """Map a master seed plus purpose tags to an independent 63-bit seed.

    Hash-based so inserting a new stream never shifts existing ones.
    """
    h = hashlib.sha256(str(int(base_seed)).encode("ascii"))
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def make_generator(seed: int) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(int(seed))
    return g
