"""Fixed small U-Net surrogate for the exact safety criteria.

Inference only: weights come from the shared binary format (SFNW) written
by the training side, the forward pass is plain direct convolution in
numpy, and the output logits threshold at 0 into a SafetyMask. The
architecture is a frozen contract so weight files and cross-runtime
parity fixtures stay bit-compatible.

Architecture (all conv zero-padded, ReLU after every 3x3 conv):
  input 1x32x32
  enc1: conv3(1->8), conv3(8->8)            -> skip1
  maxpool2                                   -> 16x16
  enc2: conv3(8->16), conv3(16->16)          -> skip2
  maxpool2                                   -> 8x8
  bott: conv3(16->32), conv3(32->32)
  upsample nearest x2, concat [up, skip2]    -> 48x16x16
  dec2: conv3(48->16), conv3(16->16)
  upsample nearest x2, concat [up, skip1]    -> 24x32x32
  dec1: conv3(24->8), conv3(8->8)
  head: conv1(8->1) logits
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import criteria as crit
from . import locomotion as loco
from .terrain import (WINDOW_SIZE, GridSpec, HeightmapWindow, extract_window,
                      generate_rough, generate_stairs)

WEIGHTS_MAGIC = b"SFNW"
DATASET_MAGIC = b"SFDS"
FORMAT_VERSION = 1

INPUT_SCALE = 0.1  # m; windows are mean-centered then divided by this

# (name, shape) in serialization order; 29617 parameters total
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

PARAMETER_COUNT = sum(int(np.prod(shape)) for _, shape in ARCHITECTURE)


class WeightFormatError(ValueError):
    """Weight file violates the SFNW contract."""


class DatasetFormatError(ValueError):
    """Dataset file violates the SFDS contract."""


@dataclass(frozen=True)
class NetWeights:
    """Named float32 tensors matching ARCHITECTURE exactly."""

    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        expected = dict(ARCHITECTURE)
        if list(self.tensors) != [name for name, _ in ARCHITECTURE]:
            raise WeightFormatError("tensor names or order do not match the architecture")
        fixed = {}
        for name, arr in self.tensors.items():
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            if arr.shape != expected[name]:
                raise WeightFormatError(
                    f"tensor {name} has shape {arr.shape}, expected {expected[name]}")
            if not np.isfinite(arr).all():
                raise WeightFormatError(f"tensor {name} contains non-finite values")
            arr.setflags(write=False)
            fixed[name] = arr
        object.__setattr__(self, "tensors", fixed)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


def zero_weights() -> NetWeights:
    return NetWeights({name: np.zeros(shape, dtype=np.float32)
                       for name, shape in ARCHITECTURE})


def random_weights(seed: int, scale: float = 0.1) -> NetWeights:
    rng = np.random.default_rng(seed)
    return NetWeights({
        name: (rng.standard_normal(shape) * scale).astype(np.float32)
        for name, shape in ARCHITECTURE
    })


def save_weights(weights: NetWeights, path) -> None:
    """Write the SFNW binary: magic, version, count, then per-tensor
    name/dims/row-major float32 little-endian values."""
    chunks = [WEIGHTS_MAGIC, struct.pack("<II", FORMAT_VERSION, len(ARCHITECTURE))]
    for name, _ in ARCHITECTURE:
        arr = weights[name]
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_weights(path) -> NetWeights:
    """Read and validate an SFNW file; every rejection reason is distinct."""
    data = Path(path).read_bytes()
    if data[:4] != WEIGHTS_MAGIC:
        raise WeightFormatError(f"{path}: bad magic, not an SFNW file")
    if len(data) < 12:
        raise WeightFormatError(f"{path}: truncated header")
    version, count = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise WeightFormatError(f"{path}: unsupported version {version}")
    if count != len(ARCHITECTURE):
        raise WeightFormatError(
            f"{path}: {count} tensors, architecture has {len(ARCHITECTURE)}")
    pos = 12
    tensors = {}
    for expected_name, expected_shape in ARCHITECTURE:
        try:
            (name_len,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<I", data, pos)
            pos += 4
            dims = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            n_values = int(np.prod(dims)) if ndim else 1
            values = np.frombuffer(data, dtype="<f4", count=n_values, offset=pos)
            pos += 4 * n_values
        except (struct.error, ValueError) as exc:
            raise WeightFormatError(f"{path}: truncated at tensor {expected_name}") from exc
        if name != expected_name:
            raise WeightFormatError(f"{path}: tensor {name!r} where {expected_name!r} expected")
        if tuple(dims) != expected_shape:
            raise WeightFormatError(
                f"{path}: tensor {name} has shape {tuple(dims)}, expected {expected_shape}")
        if not np.isfinite(values).all():
            raise WeightFormatError(f"{path}: tensor {name} contains non-finite values")
        tensors[name] = values.reshape(expected_shape)
    return NetWeights(tensors)


# ---------------------------------------------------------------------------
# forward pass


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Direct zero-padded convolution; float64 accumulation, fixed order."""
    kh, kw = w.shape[2], w.shape[3]
    if kh == 1 and kw == 1:
        return np.tensordot(w[:, :, 0, 0], x, axes=([1], [0])) + b[:, None, None]
    h, wdt = x.shape[1], x.shape[2]
    xp = np.zeros((x.shape[0], h + 2, wdt + 2))
    xp[:, 1:-1, 1:-1] = x
    out = np.zeros((w.shape[0], h, wdt))
    for u in range(kh):
        for v in range(kw):
            out += np.tensordot(w[:, :, u, v], xp[:, u:u + h, v:v + wdt], axes=([1], [0]))
    return out + b[:, None, None]


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _maxpool2(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def _upsample2(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def forward(weights: NetWeights, window: HeightmapWindow) -> np.ndarray:
    """Run the network on a window; returns 32x32 logits.

    The window is normalized internally (subtract its own mean, divide by
    INPUT_SCALE) so exact and surrogate paths consume identical windows.
    """
    h = np.asarray(window.heights, dtype=np.float64)
    x = (h - h.mean()) / INPUT_SCALE
    t = weights.tensors
    w64 = {name: arr.astype(np.float64) for name, arr in t.items()}

    def block(x, prefix):
        x = _relu(_conv2d(x, w64[f"{prefix}.conv1.weight"], w64[f"{prefix}.conv1.bias"]))
        return _relu(_conv2d(x, w64[f"{prefix}.conv2.weight"], w64[f"{prefix}.conv2.bias"]))

    e1 = block(x[np.newaxis], "enc1")
    e2 = block(_maxpool2(e1), "enc2")
    bott = block(_maxpool2(e2), "bott")
    d2 = block(np.concatenate([_upsample2(bott), e2], axis=0), "dec2")
    d1 = block(np.concatenate([_upsample2(d2), e1], axis=0), "dec1")
    logits = _conv2d(d1, w64["head.weight"], w64["head.bias"])
    return logits[0]


def predict_mask(weights: NetWeights, window: HeightmapWindow) -> crit.SafetyMask:
    """Threshold logits at 0 (sigmoid 0.5). The surrogate has no
    per-criterion breakdown, so all layers equal the safe mask."""
    t0 = time.perf_counter()
    safe = forward(weights, window) > 0.0
    elapsed_us = (time.perf_counter() - t0) * 1e6
    return crit.SafetyMask(
        safe=safe, kinematic=safe, roughness=safe, frontal=safe, leg=safe,
        center_xy=window.center_xy, resolution=window.resolution,
        eval_time_us=elapsed_us,
    )


# ---------------------------------------------------------------------------
# canonical query, dataset generation, benchmarking


def canonical_query(window: HeightmapWindow, geom: crit.RobotGeometry,
                    hip_height: float = 0.60, liftoff_back: float = 0.18,
                    stance_travel: float = 0.09) -> crit.FootQuery:
    """Deterministic query derived from the window alone.

    Labels must be a function of the heights for the surrogate to be
    learnable, so the hip sits a fixed height above the center cell and
    the liftoff sits a fixed distance behind it on the terrain.
    """
    cx, cy = window.center_xy
    half = WINDOW_SIZE // 2
    center_h = float(window.heights[half, half])
    back_j = half - int(round(liftoff_back / window.resolution))
    back_h = float(window.heights[half, max(0, back_j)])
    hip = np.array([cx, cy, center_h + hip_height])
    liftoff = np.array([cx - liftoff_back, cy, back_h])
    return crit.FootQuery(
        leg_id=0, hip_touchdown=hip, foot_liftoff=liftoff,
        stance_base_heights=np.full(geom.n_phase_samples, hip[2]),
        hip_travel_xy=np.array([stance_travel, 0.0]),
    )


def generate_dataset(count: int, seed: int, geom: crit.RobotGeometry | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
    """(heights, labels) samples from randomized stairs and rough terrains."""
    geom = geom or crit.default_geometry()
    rng = np.random.default_rng(seed)
    spec = GridSpec(n_rows=96, n_cols=96, resolution=0.02, origin_xy=(0.0, 0.0))
    samples = []
    while len(samples) < count:
        kind = rng.integers(0, 3)
        if kind == 0:
            terrain = generate_rough(
                amplitude=float(rng.uniform(0.02, 0.12)),
                correlation_len=float(rng.uniform(0.08, 0.4)),
                seed=int(rng.integers(0, 2**31)), spec=spec)
        elif kind == 1:
            terrain = generate_stairs(
                step_rise=float(rng.uniform(0.05, 0.14)),
                step_run=float(rng.uniform(0.15, 0.4)),
                n_steps=int(rng.integers(1, 5)), spec=spec)
        else:
            terrain = generate_rough(
                amplitude=float(rng.uniform(0.0, 0.03)),
                correlation_len=0.2,
                seed=int(rng.integers(0, 2**31)), spec=spec)
        margin = (WINDOW_SIZE // 2 + 1) * spec.resolution
        x_min, x_max, y_min, y_max = terrain.extent()
        cx = float(rng.uniform(x_min + margin, x_max - margin))
        cy = float(rng.uniform(y_min + margin, y_max - margin))
        window = extract_window(terrain, (cx, cy))
        mask = crit.evaluate(window, canonical_query(window, geom), geom)
        samples.append((np.asarray(window.heights, dtype=np.float32),
                        mask.safe.astype(np.uint8)))
    return samples


def save_dataset(samples, path) -> None:
    """SFDS binary: magic, version, count, W, then per record W*W float32
    heights followed by W*W label bytes."""
    chunks = [DATASET_MAGIC,
              struct.pack("<III", FORMAT_VERSION, len(samples), WINDOW_SIZE)]
    for heights, labels in samples:
        h = np.ascontiguousarray(heights, dtype="<f4")
        lab = np.ascontiguousarray(labels, dtype=np.uint8)
        if h.shape != (WINDOW_SIZE, WINDOW_SIZE) or lab.shape != (WINDOW_SIZE, WINDOW_SIZE):
            raise DatasetFormatError("sample shape mismatch")
        chunks.append(h.tobytes())
        chunks.append(lab.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_dataset(path) -> list[tuple[np.ndarray, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:4] != DATASET_MAGIC:
        raise DatasetFormatError(f"{path}: bad magic, not an SFDS file")
    if len(data) < 16:
        raise DatasetFormatError(f"{path}: truncated header")
    version, count, w = struct.unpack_from("<III", data, 4)
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    if w != WINDOW_SIZE:
        raise DatasetFormatError(f"{path}: window size {w}, expected {WINDOW_SIZE}")
    record = w * w * 4 + w * w
    if len(data) - 16 < count * record:
        raise DatasetFormatError(f"{path}: truncated records")
    samples = []
    pos = 16
    for _ in range(count):
        heights = np.frombuffer(data, dtype="<f4", count=w * w, offset=pos).reshape(w, w)
        pos += w * w * 4
        labels = np.frombuffer(data, dtype=np.uint8, count=w * w, offset=pos).reshape(w, w)
        pos += w * w
        if labels.max(initial=0) > 1:
            raise DatasetFormatError(f"{path}: label byte outside 0/1")
        samples.append((heights.astype(np.float32), labels))
    return samples


def benchmark(weights: NetWeights, windows: list[HeightmapWindow],
              geom: crit.RobotGeometry) -> dict:
    """Timing and agreement of the surrogate against the exact criteria."""
    if len(windows) < 100:
        raise ValueError("benchmark needs at least 100 windows")
    exact_times = []
    net_times = []
    inter = union = correct = total = 0
    for window in windows:
        query = canonical_query(window, geom)
        t0 = time.perf_counter()
        mask = crit.evaluate(window, query, geom)
        exact_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        pred = predict_mask(weights, window)
        net_times.append(time.perf_counter() - t0)
        inter += int((mask.safe & pred.safe).sum())
        union += int((mask.safe | pred.safe).sum())
        correct += int((mask.safe == pred.safe).sum())
        total += mask.safe.size
    exact_ms = np.asarray(exact_times) * 1e3
    net_ms = np.asarray(net_times) * 1e3
    return {
        "n_windows": len(windows),
        "criteria_ms": {"median": float(np.median(exact_ms)),
                        "p95": float(np.percentile(exact_ms, 95))},
        "network_ms": {"median": float(np.median(net_ms)),
                       "p95": float(np.percentile(net_ms, 95))},
        "pixel_accuracy": correct / total,
        "iou": inter / union if union else 0.0,
    }
