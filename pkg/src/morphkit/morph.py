"""Landmark-driven face morphing: per-triangle affine warps plus cross-dissolve.

Both source images are warped onto the alpha-averaged landmark geometry
(destination-driven, inverse affine per triangle, bilinear sampling), blended
in floating point, and quantized once at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CountMismatch, DegenerateTriangle, SizeMismatch
from .image import ImageBuffer, bilinear_sample, quantize
from .landmarks import (LandmarkSet, add_boundary_points, average_landmarks,
                        delaunay_triangulate)

EPS_WARP_AREA = 1e-12


@dataclass(frozen=True)
class MorphSpec:
    alpha: float
    source_a: str = ""
    source_b: str = ""
    output_size: tuple[int, int] | None = None  # defaults to the input size

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")


def _barycentric_transform(tri_dst: np.ndarray):
    """Return a function mapping (x, y) pixel-center arrays to barycentric coords."""
    (x0, y0), (x1, y1), (x2, y2) = tri_dst
    det = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
    if abs(det) <= EPS_WARP_AREA:
        raise DegenerateTriangle(f"destination triangle has ~zero area: {tri_dst.tolist()}")

    def to_bary(px, py):
        l0 = ((y1 - y2) * (px - x2) + (x2 - x1) * (py - y2)) / det
        l1 = ((y2 - y0) * (px - x2) + (x0 - x2) * (py - y2)) / det
        return l0, l1, 1.0 - l0 - l1

    return to_bary


def warp_triangle(src_pixels: np.ndarray, tri_src: np.ndarray, tri_dst: np.ndarray,
                  dst_pixels: np.ndarray, written: np.ndarray | None = None) -> None:
    """Fill dst pixels whose centers fall inside tri_dst with bilinear src samples.

    `src_pixels` and `dst_pixels` are float (h, w, c) arrays; `written` is an
    optional bool (h, w) coverage mask updated alongside.  The source location
    is the inverse affine image of the pixel center, expressed through the
    triangles' shared barycentric coordinates.
    """
    tri_src = np.asarray(tri_src, dtype=np.float64)
    tri_dst = np.asarray(tri_dst, dtype=np.float64)
    (sx0, sy0), (sx1, sy1), (sx2, sy2) = tri_src
    src_area2 = (sx1 - sx0) * (sy2 - sy0) - (sy1 - sy0) * (sx2 - sx0)
    if abs(src_area2) <= EPS_WARP_AREA:
        raise DegenerateTriangle(f"source triangle has ~zero area: {tri_src.tolist()}")
    to_bary = _barycentric_transform(tri_dst)

    h, w = dst_pixels.shape[:2]
    x_lo = max(0, int(np.floor(tri_dst[:, 0].min() - 0.5)))
    x_hi = min(w - 1, int(np.ceil(tri_dst[:, 0].max())))
    y_lo = max(0, int(np.floor(tri_dst[:, 1].min() - 0.5)))
    y_hi = min(h - 1, int(np.ceil(tri_dst[:, 1].max())))
    if x_hi < x_lo or y_hi < y_lo:
        return

    xs = np.arange(x_lo, x_hi + 1, dtype=np.float64) + 0.5
    ys = np.arange(y_lo, y_hi + 1, dtype=np.float64) + 0.5
    px, py = np.meshgrid(xs, ys)
    l0, l1, l2 = to_bary(px, py)
    tol = 1e-9
    inside = (l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol)
    if not inside.any():
        return
    src_x = l0 * tri_src[0, 0] + l1 * tri_src[1, 0] + l2 * tri_src[2, 0]
    src_y = l0 * tri_src[0, 1] + l1 * tri_src[1, 1] + l2 * tri_src[2, 1]
    samples = bilinear_sample(src_pixels, src_x[inside], src_y[inside])
    ys_idx, xs_idx = np.nonzero(inside)
    dst_pixels[ys_idx + y_lo, xs_idx + x_lo] = samples
    if written is not None:
        written[ys_idx + y_lo, xs_idx + x_lo] = True


def warp_to_landmarks(img: ImageBuffer, lm_from: LandmarkSet, lm_to: LandmarkSet,
                      mesh) -> tuple[np.ndarray, np.ndarray]:
    """Warp the whole image onto target geometry; returns (float pixels, coverage mask)."""
    src = img.pixels.astype(np.float64)
    dst = np.zeros_like(src)
    written = np.zeros(src.shape[:2], dtype=bool)
    for tri in mesh.triangles:
        idx = list(tri)
        warp_triangle(src, lm_from.points[idx], lm_to.points[idx], dst, written)
    return dst, written


def morph_pair(img_a: ImageBuffer, img_b: ImageBuffer, lm_a: LandmarkSet,
               lm_b: LandmarkSet, spec: MorphSpec) -> ImageBuffer:
    if (img_a.width, img_a.height, img_a.channels) != (img_b.width, img_b.height, img_b.channels):
        raise SizeMismatch(
            f"images differ: {img_a.width}x{img_a.height}x{img_a.channels} vs "
            f"{img_b.width}x{img_b.height}x{img_b.channels}")
    if len(lm_a) != len(lm_b):
        raise CountMismatch(len(lm_a), len(lm_b))
    alpha = spec.alpha
    aug_a = add_boundary_points(lm_a, img_a.width, img_a.height)
    aug_b = add_boundary_points(lm_b, img_b.width, img_b.height)
    target = average_landmarks(aug_a, aug_b, alpha)
    mesh = delaunay_triangulate(target)
    warped_a, cov_a = warp_to_landmarks(img_a, aug_a, target, mesh)
    warped_b, cov_b = warp_to_landmarks(img_b, aug_b, target, mesh)
    if not (cov_a.all() and cov_b.all()):
        missing = int((~(cov_a & cov_b)).sum())
        raise DegenerateTriangle(f"warp left {missing} pixels uncovered")
    blended = (1.0 - alpha) * warped_a + alpha * warped_b
    out = ImageBuffer(quantize(blended))
    if spec.output_size is not None and spec.output_size != (out.width, out.height):
        from .image import crop_and_resize
        out = crop_and_resize(out, out.full_box(), *spec.output_size)
    return out
