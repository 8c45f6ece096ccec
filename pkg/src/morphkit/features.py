"""Uniform LBP texture features and the binary feature-file format.

Codes use the 8-neighborhood at radius 1, bit 0 at the top-left neighbor and
bits proceeding clockwise, with ties (neighbor == center) counting as set.
Border pixels without a full neighborhood are skipped; the coded interior is
divided into a grid of cells, each contributing an L1-normalized 59-bin
histogram (58 uniform patterns in ascending code order plus one catch-all).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ImageTooSmall, MissingFile, ParseError
from .image import ImageBuffer, to_grayscale

FEATURE_MAGIC = b"MKFV"
FEATURE_VERSION = 1
FLIP_SUFFIX = "#flip"

# (dx, dy) offsets clockwise from the top-left neighbor; bit k = offset k
NEIGHBOR_OFFSETS = [
    (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0),
]


def _transitions(code: int) -> int:
    rotated = ((code << 1) | (code >> 7)) & 0xFF
    return bin(code ^ rotated).count("1")


def _build_uniform_table() -> tuple[np.ndarray, int]:
    uniform_codes = [c for c in range(256) if _transitions(c) <= 2]
    table = np.full(256, len(uniform_codes), dtype=np.int64)
    for bin_idx, code in enumerate(uniform_codes):
        table[code] = bin_idx
    return table, len(uniform_codes) + 1

UNIFORM_BIN_TABLE, LBP_BINS = _build_uniform_table()  # 58 uniform bins + catch-all = 59


def lbp_code(center: int, neighbors) -> int:
    """LBP code for one pixel; neighbors listed clockwise from top-left."""
    if len(neighbors) != 8:
        raise ValueError(f"need 8 neighbors, got {len(neighbors)}")
    code = 0
    for k, value in enumerate(neighbors):
        if value >= center:
            code |= 1 << k
    return code


def lbp_code_image(gray: np.ndarray) -> np.ndarray:
    """Codes for all interior pixels of a 2-D uint8 array; shape (h-2, w-2)."""
    center = gray[1:-1, 1:-1].astype(np.int16)
    codes = np.zeros(center.shape, dtype=np.int64)
    for k, (dx, dy) in enumerate(NEIGHBOR_OFFSETS):
        neighbor = gray[1 + dy: gray.shape[0] - 1 + dy, 1 + dx: gray.shape[1] - 1 + dx].astype(np.int16)
        codes |= (neighbor >= center).astype(np.int64) << k
    return codes


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray  # float32, length = gx * gy * 59
    descriptor_id: str


@dataclass(frozen=True)
class FeatureProfile:
    """Preprocessing + descriptor configuration (crop size and LBP grid)."""

    name: str
    out_w: int
    out_h: int
    grid: tuple[int, int] = (4, 4)

    @property
    def descriptor_id(self) -> str:
        return f"lbp-{self.grid[0]}x{self.grid[1]}-{self.out_w}x{self.out_h}"

    @property
    def dim(self) -> int:
        return self.grid[0] * self.grid[1] * LBP_BINS


PROFILES = {
    "hrnet": FeatureProfile("hrnet", 256, 256),
    "xception": FeatureProfile("xception", 299, 299),
}


def parse_profile(spec: str) -> FeatureProfile:
    """Resolve a profile name: 'hrnet', 'xception', 'lbp-GXxGY' or 'lbp-GXxGY-WxH'."""
    if spec in PROFILES:
        return PROFILES[spec]
    parts = spec.split("-")
    if parts[0] == "lbp" and len(parts) in (2, 3):
        try:
            gx, gy = (int(v) for v in parts[1].split("x"))
            w, h = (int(v) for v in parts[2].split("x")) if len(parts) == 3 else (256, 256)
            return FeatureProfile(spec, w, h, (gx, gy))
        except ValueError:
            pass
    raise ParseError(f"unknown feature profile {spec!r}")


def extract_lbp_histogram(img: ImageBuffer, grid: tuple[int, int] = (4, 4),
                          descriptor_id: str | None = None) -> FeatureVector:
    """Per-cell uniform-LBP histograms over the coded interior region.

    The interior (width-2) x (height-2) code image is split into gx x gy
    cells (remainder rows/columns assigned to the last cell); each cell's
    histogram is L1-normalized.
    """
    gx, gy = grid
    if img.channels != 1:
        raise ValueError("extract_lbp_histogram expects a grayscale image")
    if img.width < gx + 2 or img.height < gy + 2:
        raise ImageTooSmall(
            f"{img.width}x{img.height} image too small for a {gx}x{gy} grid")
    codes = lbp_code_image(img.pixels[:, :, 0])
    ch, cw = codes.shape
    cell_w = cw // gx
    cell_h = ch // gy
    col_of = np.minimum(np.arange(cw) // cell_w, gx - 1)
    row_of = np.minimum(np.arange(ch) // cell_h, gy - 1)
    cell_idx = row_of[:, None] * gx + col_of[None, :]
    bins = UNIFORM_BIN_TABLE[codes]
    flat = (cell_idx * LBP_BINS + bins).ravel()
    hist = np.bincount(flat, minlength=gx * gy * LBP_BINS).astype(np.float64)
    hist = hist.reshape(gx * gy, LBP_BINS)
    totals = hist.sum(axis=1, keepdims=True)
    hist = hist / totals
    return FeatureVector(
        values=hist.ravel().astype(np.float32),
        descriptor_id=descriptor_id or f"lbp-{gx}x{gy}-{img.width}x{img.height}",
    )


def extract_from_image(img: ImageBuffer, profile: FeatureProfile,
                       bbox=None) -> FeatureVector:
    """Full preprocessing chain: crop/resize to the profile, grayscale, LBP."""
    from .image import crop_and_resize
    box = bbox if bbox is not None else img.full_box()
    prepped = crop_and_resize(img, box, profile.out_w, profile.out_h)
    return extract_lbp_histogram(to_grayscale(prepped), profile.grid,
                                 descriptor_id=profile.descriptor_id)


def save_features(entries: list[tuple[str, np.ndarray]], path: str | Path) -> None:
    """Write the MKFV binary feature file (little-endian)."""
    if not entries:
        raise ValueError("feature file needs at least one entry")
    dim = len(entries[0][1])
    with Path(path).open("wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", FEATURE_VERSION, dim))
        for sample_id, values in entries:
            values = np.asarray(values, dtype="<f4")
            if len(values) != dim:
                raise ValueError(f"feature length {len(values)} != dim {dim} for {sample_id!r}")
            encoded = sample_id.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(values.tobytes())


def load_features(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"feature file not found: {path}")
    blob = path.read_bytes()
    if blob[:4] != FEATURE_MAGIC:
        raise ParseError(f"bad magic in feature file {path}")
    version, dim = struct.unpack_from("<II", blob, 4)
    if version != FEATURE_VERSION:
        raise ParseError(f"unsupported feature file version {version}")
    offset = 12
    out: dict[str, np.ndarray] = {}
    while offset < len(blob):
        (id_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        sample_id = blob[offset:offset + id_len].decode("utf-8")
        offset += id_len
        values = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
        if sample_id in out:
            raise ParseError(f"duplicate feature id {sample_id!r}")
        out[sample_id] = values
    return out
