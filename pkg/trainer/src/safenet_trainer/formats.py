"""Binary formats shared with the inference side.

These byte layouts are a cross-runtime contract: SFDS datasets come from
the planner toolkit's `dataset gen`, SFNW weight files go back to its
`net` loader. The implementations are deliberately independent of that
package; only the bytes are shared.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

WEIGHTS_MAGIC = b"SFNW"
DATASET_MAGIC = b"SFDS"
FORMAT_VERSION = 1
WINDOW = 32

# (name, shape) in serialization order, matching the fixed architecture
ARCHITECTURE: tuple[tuple[str, tuple[int, ...]], ...] = (
    ("enc1.conv1.weight", (8, 1, 3, 3)), ("enc1.conv1.bias", (8,)),
    ("enc1.conv2.weight", (8, 8, 3, 3)), ("enc1.conv2.bias", (8,)),
    ("enc2.conv1.weight", (16, 8, 3, 3)), ("enc2.conv1.bias", (16,)),
    ("enc2.conv2.weight", (16, 16, 3, 3)), ("enc2.conv2.bias", (16,)),
    ("bott.conv1.weight", (32, 16, 3, 3)), ("bott.conv1.bias", (32,)),
    ("bott.conv2.weight", (32, 32, 3, 3)), ("bott.conv2.bias", (32,)),
    ("dec2.conv1.weight", (16, 48, 3, 3)), ("dec2.conv1.bias", (16,)),
    ("dec2.conv2.weight", (16, 16, 3, 3)), ("dec2.conv2.bias", (16,)),
    ("dec1.conv1.weight", (8, 24, 3, 3)), ("dec1.conv1.bias", (8,)),
    ("dec1.conv2.weight", (8, 8, 3, 3)), ("dec1.conv2.bias", (8,)),
    ("head.weight", (1, 8, 1, 1)), ("head.bias", (1,)),
)


class FormatError(ValueError):
    pass


def load_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an SFDS file; returns (heights (N,32,32) float32, labels (N,32,32) uint8)."""
    data = Path(path).read_bytes()
    if data[:4] != DATASET_MAGIC:
        raise FormatError(f"{path}: bad magic, not an SFDS file")
    if len(data) < 16:
        raise FormatError(f"{path}: truncated header")
    version, count, w = struct.unpack_from("<III", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if w != WINDOW:
        raise FormatError(f"{path}: window size {w}, expected {WINDOW}")
    record = w * w * 5
    if len(data) - 16 < count * record:
        raise FormatError(f"{path}: truncated records")
    heights = np.empty((count, w, w), dtype=np.float32)
    labels = np.empty((count, w, w), dtype=np.uint8)
    pos = 16
    for k in range(count):
        heights[k] = np.frombuffer(data, "<f4", w * w, pos).reshape(w, w)
        pos += w * w * 4
        labels[k] = np.frombuffer(data, np.uint8, w * w, pos).reshape(w, w)
        pos += w * w
    if labels.max(initial=0) > 1:
        raise FormatError(f"{path}: label byte outside 0/1")
    return heights, labels


def save_dataset(heights: np.ndarray, labels: np.ndarray, path) -> None:
    chunks = [DATASET_MAGIC, struct.pack("<III", FORMAT_VERSION, len(heights), WINDOW)]
    for h, lab in zip(heights, labels):
        chunks.append(np.ascontiguousarray(h, "<f4").tobytes())
        chunks.append(np.ascontiguousarray(lab, np.uint8).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def save_weights(tensors: dict[str, np.ndarray], path) -> None:
    """Write SFNW: magic, version, count, then per tensor name/dims/values."""
    expected = dict(ARCHITECTURE)
    if list(tensors) != [name for name, _ in ARCHITECTURE]:
        raise FormatError("tensor names or order do not match the architecture")
    chunks = [WEIGHTS_MAGIC, struct.pack("<II", FORMAT_VERSION, len(ARCHITECTURE))]
    for name, _ in ARCHITECTURE:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        if arr.shape != expected[name]:
            raise FormatError(f"tensor {name} has shape {arr.shape}, expected {expected[name]}")
        if not np.isfinite(arr).all():
            raise FormatError(f"tensor {name} contains non-finite values")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_weights(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != WEIGHTS_MAGIC:
        raise FormatError(f"{path}: bad magic, not an SFNW file")
    version, count = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if count != len(ARCHITECTURE):
        raise FormatError(f"{path}: tensor count {count}")
    pos = 12
    out = {}
    for expected_name, expected_shape in ARCHITECTURE:
        (name_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<I", data, pos)
        pos += 4
        dims = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        n_values = int(np.prod(dims))
        values = np.frombuffer(data, "<f4", n_values, pos).reshape(dims)
        pos += 4 * n_values
        if name != expected_name or tuple(dims) != expected_shape:
            raise FormatError(f"{path}: tensor {name} does not match the manifest")
        out[name] = values.copy()
    return out
