"""Grayscale frame container and image loading (binary PGM and 8-bit gray PNG)."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

MAX_DIM = 4096


class FrameError(ValueError):
    pass


class FrameFormatError(FrameError):
    """Unsupported or malformed image file."""


@dataclass
class GrayFrame:
    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8, row-major
    t_ms: int = 0

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.width < 1 or self.height < 1:
            raise FrameError("frame dimensions must be >= 1")
        if self.width > MAX_DIM or self.height > MAX_DIM:
            raise FrameError("frame dimensions exceed %d" % MAX_DIM)
        if self.pixels.shape != (self.height, self.width):
            raise FrameError(
                "pixel buffer shape %s does not match %dx%d"
                % (self.pixels.shape, self.width, self.height)
            )

    @classmethod
    def from_array(cls, arr, t_ms: int = 0) -> "GrayFrame":
        arr = np.asarray(arr, dtype=np.uint8)
        h, w = arr.shape
        return cls(width=w, height=h, pixels=arr, t_ms=t_ms)


def load_pgm(data: bytes, t_ms: int = 0) -> GrayFrame:
    """Parse a binary (P5) PGM with maxval 255."""
    if not data.startswith(b"P5"):
        raise FrameFormatError("not a binary PGM (missing P5 magic)")
    # header tokens: magic, width, height, maxval; comments start with '#'
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
            raise FrameFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise FrameFormatError("bad PGM header: %s" % e) from None
    if maxval != 255:
        raise FrameFormatError("only maxval 255 PGM supported, got %d" % maxval)
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise FrameFormatError("PGM raster truncated")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayFrame(width=width, height=height, pixels=arr.copy(), t_ms=t_ms)


def save_pgm(frame: GrayFrame) -> bytes:
    header = b"P5\n%d %d\n255\n" % (frame.width, frame.height)
    return header + frame.pixels.tobytes()


def load_png(data: bytes, t_ms: int = 0) -> GrayFrame:
    """Load an 8-bit grayscale PNG."""
    from PIL import Image, UnidentifiedImageError

    try:
        img = Image.open(io.BytesIO(data))
    except UnidentifiedImageError:
        raise FrameFormatError("not a valid PNG") from None
    if img.format != "PNG":
        raise FrameFormatError("expected PNG, got %s" % img.format)
    if img.mode != "L":
        raise FrameFormatError("PNG must be 8-bit grayscale (mode L), got %s" % img.mode)
    arr = np.asarray(img, dtype=np.uint8)
    return GrayFrame.from_array(arr, t_ms=t_ms)


def load_image(path: str, t_ms: int = 0) -> GrayFrame:
    """Load a frame from disk; only binary PGM and 8-bit gray PNG are accepted."""
    with open(path, "rb") as f:
        data = f.read()
    if data.startswith(b"P5"):
        return load_pgm(data, t_ms=t_ms)
    if data.startswith(b"\x89PNG"):
        return load_png(data, t_ms=t_ms)
    raise FrameFormatError("unsupported image format: %s" % path)
