"""8-bit raster images and the resampling primitives shared by the toolkit.

Pixel (i, j) is sampled at continuous location (i + 0.5, j + 0.5); all
resampling is bilinear with clamp-to-edge, quantized round-half-up.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import EmptyIntersection, MissingFile
from .manifest import BoundingBox


@dataclass
class ImageBuffer:
    """Row-major 8-bit image; ``pixels`` has shape (height, width, channels)."""

    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim == 2:
            self.pixels = self.pixels[:, :, None]
        if self.pixels.ndim != 3 or self.pixels.shape[2] not in (1, 3):
            raise ValueError(f"expected (h, w, 1|3) pixel array, got shape {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {self.pixels.dtype}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def full_box(self) -> BoundingBox:
        return BoundingBox(0.0, 0.0, float(self.width), float(self.height))


def quantize(values: np.ndarray) -> np.ndarray:
    """Round-half-up to uint8 with clipping."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def read_png(path: str | Path) -> ImageBuffer:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"image not found: {path}")
    with Image.open(path) as img:
        if img.mode in ("L",):
            arr = np.asarray(img, dtype=np.uint8)
        elif img.mode in ("LA", "I;16", "I"):
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
        else:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return ImageBuffer(arr)


def write_png(img: ImageBuffer, path: str | Path) -> None:
    arr = img.pixels[:, :, 0] if img.channels == 1 else img.pixels
    Image.fromarray(arr, mode="L" if img.channels == 1 else "RGB").save(Path(path), format="PNG")


def bilinear_sample(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample float pixel grid (h, w, c) at continuous image coords (x, y).

    Coordinates follow the pixel-center convention; samples outside the
    image clamp to the nearest edge pixel.
    """
    h, w = pixels.shape[:2]
    # clamp before splitting into index + fraction so outside samples take
    # the edge pixel exactly instead of blending one pixel inward
    u = np.clip(np.asarray(xs, dtype=np.float64) - 0.5, 0.0, w - 1.0)
    v = np.clip(np.asarray(ys, dtype=np.float64) - 0.5, 0.0, h - 1.0)
    x0 = np.floor(u)
    y0 = np.floor(v)
    fx = (u - x0)[..., None]
    fy = (v - y0)[..., None]
    x0i = x0.astype(np.int64)
    x1i = np.minimum(x0i + 1, w - 1)
    y0i = y0.astype(np.int64)
    y1i = np.minimum(y0i + 1, h - 1)
    p00 = pixels[y0i, x0i]
    p01 = pixels[y0i, x1i]
    p10 = pixels[y1i, x0i]
    p11 = pixels[y1i, x1i]
    top = p00 * (1.0 - fx) + p01 * fx
    bot = p10 * (1.0 - fx) + p11 * fx
    return top * (1.0 - fy) + bot * fy


def crop_and_resize(img: ImageBuffer, box: BoundingBox, out_w: int, out_h: int) -> ImageBuffer:
    """Resample the (clamped) box region to exactly out_w x out_h."""
    x0 = max(0.0, box.x)
    y0 = max(0.0, box.y)
    x1 = min(float(img.width), box.x + box.w)
    y1 = min(float(img.height), box.y + box.h)
    if x1 <= x0 or y1 <= y0:
        raise EmptyIntersection(f"box {box} does not intersect {img.width}x{img.height} image")
    sx = (x1 - x0) / out_w
    sy = (y1 - y0) / out_h
    xs = x0 + (np.arange(out_w, dtype=np.float64) + 0.5) * sx
    ys = y0 + (np.arange(out_h, dtype=np.float64) + 0.5) * sy
    grid_x, grid_y = np.meshgrid(xs, ys)
    sampled = bilinear_sample(img.pixels.astype(np.float64), grid_x, grid_y)
    return ImageBuffer(quantize(sampled))


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    """ITU-R 601 luma (0.299 R + 0.587 G + 0.114 B), round-half-up."""
    if img.channels == 1:
        return ImageBuffer(img.pixels.copy())
    weights = np.array([0.299, 0.587, 0.114], dtype=np.float64)
    gray = img.pixels.astype(np.float64) @ weights
    return ImageBuffer(quantize(gray))


def flip_horizontal(img: ImageBuffer) -> ImageBuffer:
    return ImageBuffer(np.ascontiguousarray(img.pixels[:, ::-1, :]))
