"""Minimal binary PGM (P5) reading and writing for terrain grids and masks."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class PgmError(ValueError):
    """Malformed PGM file."""


def write_pgm(path, pixels: np.ndarray, maxval: int) -> None:
    """Write a 2D uint array as binary PGM. maxval 255 -> 1 byte, 65535 -> 2 bytes big-endian."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise PgmError("PGM pixels must be 2D")
    if maxval not in (255, 65535):
        raise PgmError("maxval must be 255 or 65535")
    if pixels.min() < 0 or pixels.max() > maxval:
        raise PgmError("pixel values out of range for maxval")
    dtype = ">u2" if maxval == 65535 else "u1"
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + pixels.astype(dtype).tobytes())


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a binary PGM. Returns (pixels as uint array, maxval)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise PgmError(f"{path}: not a binary PGM (P5)")
    # Header is three whitespace-separated tokens after the magic; '#' comments allowed.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmError(f"{path}: truncated header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise PgmError(f"{path}: bad header token") from exc
    if maxval not in (255, 65535):
        raise PgmError(f"{path}: unsupported maxval {maxval}")
    dtype = ">u2" if maxval == 65535 else "u1"
    count = width * height
    raw = data[pos:]
    expected = count * (2 if maxval == 65535 else 1)
    if len(raw) < expected:
        raise PgmError(f"{path}: truncated pixel data")
    pixels = np.frombuffer(raw[:expected], dtype=dtype).reshape(height, width)
    return pixels.astype(np.uint16 if maxval == 65535 else np.uint8), maxval
