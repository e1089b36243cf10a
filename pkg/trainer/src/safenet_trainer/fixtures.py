"""Cross-runtime parity fixtures: weights, input windows, and this side's logits.

The inference side replays the forward pass on the fixture windows and
must match the recorded logits within 1e-4; that is the contract test
between the two implementations.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from . import formats
from .model import SegmentationUNet


def random_tensors(seed: int, scale: float = 0.1) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {name: (rng.standard_normal(shape) * scale).astype(np.float32)
            for name, shape in formats.ARCHITECTURE}


def synthetic_windows(seed: int, count: int = 5) -> np.ndarray:
    """Terrain-like test inputs: smoothed noise plus an occasional step."""
    rng = np.random.default_rng(seed)
    windows = np.empty((count, 32, 32), dtype=np.float32)
    for k in range(count):
        noise = rng.normal(0, 1.0, (32, 32))
        kernel = np.ones(5) / 5
        for axis in (0, 1):
            noise = np.apply_along_axis(
                lambda m: np.convolve(m, kernel, mode="same"), axis, noise)
        field = noise * rng.uniform(0.02, 0.10)
        if k % 2 == 1:
            field[:, rng.integers(8, 24):] += rng.uniform(0.05, 0.15)
        windows[k] = field.astype(np.float32)
    return windows


def export_parity_fixture(out_dir, seed: int = 0,
                          tensors: dict[str, np.ndarray] | None = None,
                          count: int = 5) -> dict:
    """Write weights.sfnw plus fixture.json (windows and expected logits)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if tensors is None:
        tensors = random_tensors(seed)
    weights_path = out_dir / "weights.sfnw"
    formats.save_weights(tensors, weights_path)

    model = SegmentationUNet()
    model.load_tensors(tensors)
    model.eval()
    windows = synthetic_windows(seed + 1, count)
    with torch.no_grad():
        logits = model(torch.from_numpy(windows).unsqueeze(1)).numpy()[:, 0]

    payload = {
        "weights": weights_path.name,
        "seed": seed,
        "windows": [
            {"center_xy": [0.0, 0.0], "resolution": 0.02,
             "heights": w.ravel().tolist()}
            for w in windows
        ],
        "logits": [l.ravel().tolist() for l in logits],
    }
    fixture_path = out_dir / "fixture.json"
    fixture_path.write_text(json.dumps(payload))
    return {"weights": str(weights_path), "fixture": str(fixture_path),
            "windows": count}
