"""Versioned binary checkpoint container.

Layout: 4-byte magic "GDD1" | u32 version | u32 header length | JSON header
| raw little-endian tensor data, arrays in the order declared in the header.
The header records the module kind, its construction spec, every state
tensor's name/shape/dtype, the training step counter, and the RNG state.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import BadCheckpoint, BadMagic
from .networks import (
    ClassifierSpec,
    ConditionalDiscriminator,
    ConditionalGenerator,
    DiscriminatorSpec,
    GeneratorSpec,
    build_classifier,
)

MAGIC = b"GDD1"
VERSION = 1

_DTYPES = {"f4": np.dtype("<f4"), "i8": np.dtype("<i8")}

_SPEC_TYPES = {
    "generator": GeneratorSpec,
    "discriminator": DiscriminatorSpec,
    "classifier": ClassifierSpec,
}


def _spec_kind(spec) -> str:
    for kind, cls in _SPEC_TYPES.items():
        if isinstance(spec, cls):
            return kind
    raise BadCheckpoint(f"unsupported spec type {type(spec).__name__}")


@dataclass
class CheckpointBundle:
    """In-memory checkpoint: enough to rebuild the module bit-for-bit."""

    kind: str
    spec: GeneratorSpec | DiscriminatorSpec | ClassifierSpec
    state: dict[str, torch.Tensor]
    step: int = 0
    rng_state: bytes = b""

    def build(self) -> nn.Module:
        if self.kind == "generator":
            module = ConditionalGenerator(self.spec)
        elif self.kind == "discriminator":
            module = ConditionalDiscriminator(self.spec)
        elif self.kind == "classifier":
            module = build_classifier(self.spec)
        else:
            raise BadCheckpoint(f"unknown checkpoint kind '{self.kind}'")
        module.load_state_dict(self.state, strict=True)
        return module

    def save(self, path) -> None:
        save_checkpoint(path, self)


def bundle_module(module: nn.Module, step: int = 0, rng_state: bytes = b"") -> CheckpointBundle:
    spec = module.spec
    state = {k: v.detach().cpu().clone() for k, v in module.state_dict().items()}
    return CheckpointBundle(_spec_kind(spec), spec, state, step=step, rng_state=rng_state)


def save_checkpoint(path, bundle: CheckpointBundle) -> None:
    entries = []
    blobs = []
    for name, tensor in bundle.state.items():
        if tensor.dtype.is_floating_point:
            arr = tensor.numpy().astype("<f4")
            dtype = "f4"
        else:
            arr = tensor.numpy().astype("<i8")
            dtype = "i8"
        entries.append({"name": name, "shape": list(tensor.shape), "dtype": dtype})
        blobs.append(arr.tobytes())
    header = {
        "kind": bundle.kind,
        "spec": asdict(bundle.spec),
        "params": entries,
        "step": int(bundle.step),
        "rng_state": bundle.rng_state.hex(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path) -> CheckpointBundle:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise BadMagic(f"{path}: expected magic {MAGIC!r}, got {raw[:4]!r}")
    if len(raw) < 12:
        raise BadCheckpoint(f"{path}: header truncated")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != VERSION:
        raise BadCheckpoint(f"{path}: unsupported checkpoint version {version}")
    try:
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise BadCheckpoint(f"{path}: unreadable header ({e})") from e

    kind = header["kind"]
    spec_cls = _SPEC_TYPES.get(kind)
    if spec_cls is None:
        raise BadCheckpoint(f"{path}: unknown checkpoint kind '{kind}'")
    spec_fields = dict(header["spec"])
    if "image_shape" in spec_fields:
        spec_fields["image_shape"] = tuple(spec_fields["image_shape"])
    spec = spec_cls(**spec_fields)

    state: dict[str, torch.Tensor] = {}
    offset = 12 + header_len
    for entry in header["params"]:
        dtype = _DTYPES[entry["dtype"]]
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(raw):
            raise BadCheckpoint(f"{path}: parameter data truncated at '{entry['name']}'")
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
        state[entry["name"]] = torch.from_numpy(arr.copy()).reshape(entry["shape"])
        offset += nbytes
    return CheckpointBundle(
        kind,
        spec,
        state,
        step=int(header.get("step", 0)),
        rng_state=bytes.fromhex(header.get("rng_state", "")),
    )


def checkpoint_digest(path) -> str:
    """Short content hash used as the provenance id of exports."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
