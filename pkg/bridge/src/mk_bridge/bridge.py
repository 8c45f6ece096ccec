"""Run a pretrained TorchScript detector over a dataset manifest.

The bridge consumes the toolkit's file formats only: it reads the dataset
manifest CSV and writes the score CSV, so the toolkit can evaluate deep
detectors without depending on torch itself. Models are TorchScript
archives whose forward maps a (n, 3, size, size) float batch in [0, 1] to
probabilities: either one sigmoid neuron or a softmax distribution whose
`softmax_attack_index` column is the attack-class probability. The bridge
never trains; it only runs inference.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import HeadOutputError, ImageError, ManifestError, WeightsLoadError

BACKBONE_INPUT_SIZES = {"xception-like": 299, "hrnet-like": 256}
SCORE_HEADER = "sample_id,label,morph_method,score"
MANIFEST_COLUMNS = ("sample_id", "image_path", "label", "morph_method")
SOFTMAX_SUM_TOL = 1e-4


@dataclass(frozen=True)
class BridgeConfig:
    backbone: str
    weights_path: str
    softmax_attack_index: int = 1
    device: str = "cpu"
    batch_size: int = 16

    def __post_init__(self):
        if self.backbone not in BACKBONE_INPUT_SIZES:
            known = ", ".join(sorted(BACKBONE_INPUT_SIZES))
            raise ValueError(f"unknown backbone {self.backbone!r}, expected one of: {known}")
        if self.softmax_attack_index < 0:
            raise ValueError(f"softmax_attack_index must be >= 0, got {self.softmax_attack_index}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def input_size(self) -> int:
        return BACKBONE_INPUT_SIZES[self.backbone]


@dataclass(frozen=True)
class ManifestRow:
    sample_id: str
    image_path: str
    label: str
    morph_method: str


def read_manifest(path: str | Path) -> list[ManifestRow]:
    """Rows of a dataset manifest CSV, in file order, comments skipped."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    lines = [ln for ln in path.read_text().splitlines()
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ManifestError(f"manifest has no header: {path}")
    reader = csv.reader(lines)
    header = next(reader)
    missing = [c for c in MANIFEST_COLUMNS if c not in header]
    if missing:
        raise ManifestError(f"manifest missing columns {missing}: {path}")
    index = {c: header.index(c) for c in MANIFEST_COLUMNS}
    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if len(cells) != len(header):
            raise ManifestError(f"{path} line {lineno}: expected {len(header)} cells, got {len(cells)}")
        rows.append(ManifestRow(*(cells[index[c]] for c in MANIFEST_COLUMNS)))
    return rows


def load_backbone(config: BridgeConfig) -> torch.jit.ScriptModule:
    try:
        module = torch.jit.load(config.weights_path, map_location=config.device)
    except Exception as exc:
        raise WeightsLoadError(f"{config.weights_path}: {exc}") from exc
    module.eval()
    return module


def load_image_tensor(row: ManifestRow, root: str | Path, size: int) -> torch.Tensor:
    """One (3, size, size) float tensor in [0, 1], bilinear-resized RGB."""
    path = Path(root) / row.image_path
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
    except Exception as exc:
        raise ImageError(row.sample_id, f"cannot read {path}: {exc}") from exc
    array = np.asarray(rgb, dtype=np.float32) / 255.0
    return torch.from_numpy(array.transpose(2, 0, 1))


def attack_scores(output: torch.Tensor, attack_index: int) -> np.ndarray:
    """Per-sample attack probabilities from a probability-head output.

    A single-column output is taken as the attack probability directly
    (sigmoid head); a multi-column output must be a distribution over
    classes and contributes its `attack_index` column (softmax head).
    """
    if output.ndim == 1:
        output = output.unsqueeze(1)
    if output.ndim != 2:
        raise HeadOutputError(f"expected (n,) or (n, classes) output, got shape {tuple(output.shape)}")
    values = output.detach().cpu().to(torch.float64).numpy()
    if not np.all(np.isfinite(values)):
        raise HeadOutputError("model output contains non-finite values")
    if values.min() < 0.0 or values.max() > 1.0:
        raise HeadOutputError(
            "model output is not a probability; the loaded head must end in sigmoid or softmax")
    if values.shape[1] == 1:
        return values[:, 0]
    if attack_index >= values.shape[1]:
        raise HeadOutputError(
            f"attack index {attack_index} out of range for a {values.shape[1]}-class head")
    sums = values.sum(axis=1)
    if np.abs(sums - 1.0).max() > SOFTMAX_SUM_TOL:
        raise HeadOutputError(
            "multi-class output rows do not sum to 1; the loaded head must end in softmax")
    return values[:, attack_index]


def format_score(score: float) -> str:
    return np.format_float_positional(np.float64(score), precision=9,
                                      unique=False, fractional=False)


def bridge_score(manifest_path: str | Path, config: BridgeConfig,
                 out_path: str | Path, root: str | Path = ".") -> list[tuple[str, float]]:
    """Score every manifest row in order and write a score CSV.

    Returns (sample_id, score) pairs in manifest order.
    """
    module = load_backbone(config)
    rows = read_manifest(manifest_path)
    scored: list[float] = []
    with torch.no_grad():
        for start in range(0, len(rows), config.batch_size):
            chunk = rows[start:start + config.batch_size]
            batch = torch.stack([load_image_tensor(r, root, config.input_size)
                                 for r in chunk]).to(config.device)
            scored.extend(attack_scores(module(batch), config.softmax_attack_index))
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# backbone={config.backbone} attack_index={config.softmax_attack_index}",
             SCORE_HEADER]
    lines += [f"{r.sample_id},{r.label},{r.morph_method},{format_score(s)}"
              for r, s in zip(rows, scored)]
    out_path.write_text("\n".join(lines) + "\n")
    return [(r.sample_id, float(s)) for r, s in zip(rows, scored)]
