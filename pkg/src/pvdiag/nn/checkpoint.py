"""Weight checkpoints and training history files.

Checkpoint layout, all little-endian: 4 magic bytes, u16 format
version, length-prefixed architecture tag, u32 tensor count, then per
tensor a length-prefixed name, u8 rank and u32 dims; raw f32 payloads
follow in the same order.
"""

from __future__ import annotations

import csv
import struct

import numpy as np

from ..errors import ShapeMismatch
from .network import Network

MAGIC = b"PVWT"
VERSION = 1


def _tensor_entries(net: Network):
    for idx, (layer, wn, _) in enumerate(net.parameters()):
        yield f"{idx:03d}.{type(layer).__name__}.{wn}", getattr(layer, wn)


def save_weights(path, net: Network) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        tag = net.name.encode()
        fh.write(struct.pack("<H", len(tag)))
        fh.write(tag)
        entries = list(_tensor_entries(net))
        fh.write(struct.pack("<I", len(entries)))
        for name, tensor in entries:
            nb = name.encode()
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", tensor.ndim))
            fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        for _, tensor in entries:
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_weights(path, net: Network) -> None:
    """Restore weights into a network of the matching architecture.

    Raises:
        ShapeMismatch: wrong magic/version, architecture tag, tensor
            count or any tensor shape.
    """
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ShapeMismatch(f"{path}: not a weight checkpoint")
        (version,) = struct.unpack("<H", fh.read(2))
        if version != VERSION:
            raise ShapeMismatch(f"{path}: unsupported checkpoint version {version}")
        (tag_len,) = struct.unpack("<H", fh.read(2))
        tag = fh.read(tag_len).decode()
        if tag != net.name:
            raise ShapeMismatch(
                f"{path}: checkpoint holds {tag!r}, network is {net.name!r}")
        (n_tensors,) = struct.unpack("<I", fh.read(4))
        targets = list(_tensor_entries(net))
        if n_tensors != len(targets):
            raise ShapeMismatch(
                f"{path}: {n_tensors} tensors for {len(targets)} parameters")
        shapes = []
        for name, tensor in targets:
            (name_len,) = struct.unpack("<H", fh.read(2))
            stored_name = fh.read(name_len).decode()
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            if shape != tensor.shape:
                raise ShapeMismatch(
                    f"{path}: tensor {stored_name} has shape {shape}, "
                    f"expected {tensor.shape}")
            shapes.append(shape)
        for (name, tensor), shape in zip(targets, shapes):
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = fh.read(4 * count)
            if len(raw) != 4 * count:
                raise ShapeMismatch(f"{path}: file ended inside tensor {name}")
            data = np.frombuffer(raw, dtype="<f4").reshape(shape)
            np.copyto(tensor, data.astype(tensor.dtype))


HISTORY_FIELDS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


def write_history_csv(path, history: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in HISTORY_FIELDS})
