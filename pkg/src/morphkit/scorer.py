"""Apply a trained detector to manifests and read/write score files.

Score polarity is fixed: higher = more attack-like. The score CSV
(`sample_id,label,morph_method,score`) is the interchange boundary between
this package and any external scorer, so scores are written with 9
significant digits and the loader enforces the file invariants.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InvariantViolation,
    MissingFeatures,
    MissingFile,
    MissingImage,
    ParseError,
    ProfileMismatch,
)
from .features import FeatureProfile, extract_from_image
from .image import ImageBuffer, read_png
from .manifest import Label, MorphMethod, DatasetManifest, SampleRecord, Split
from .trainer import DetectorModel

SCORE_HEADER = ["sample_id", "label", "morph_method", "score"]


@dataclass(frozen=True)
class ScoreRecord:
    sample_id: str
    label: Label
    morph_method: MorphMethod
    score: float


def format_score(score: float) -> str:
    return np.format_float_positional(np.float64(score), precision=9,
                                      unique=False, fractional=False)


def score_sample(model: DetectorModel, img: ImageBuffer,
                 profile: FeatureProfile, bbox=None) -> float:
    if profile.descriptor_id != model.descriptor_id:
        raise ProfileMismatch(
            f"model was trained on {model.descriptor_id!r},"
            f" profile produces {profile.descriptor_id!r}")
    vec = extract_from_image(img, profile, bbox=bbox)
    return model.score(vec.values)


def _score_record(model: DetectorModel, record: SampleRecord,
                  profile: FeatureProfile, root: Path) -> ScoreRecord:
    path = Path(record.image_path)
    if not path.is_absolute():
        path = root / path
    try:
        img = read_png(path)
    except MissingFile as exc:
        raise MissingImage(record.sample_id, str(path)) from exc
    score = score_sample(model, img, profile, bbox=record.bbox)
    return ScoreRecord(record.sample_id, record.label, record.morph_method, score)


def score_manifest(model: DetectorModel, manifest: DatasetManifest,
                   profile: FeatureProfile, root: str | Path = ".",
                   mode: str = "serial", max_workers: int = 4) -> list[ScoreRecord]:
    """Score every Test sample, output in manifest order regardless of mode."""
    records = manifest.records_in(Split.TEST)
    root = Path(root)
    if mode == "serial":
        return [_score_record(model, r, profile, root) for r in records]
    if mode == "thread":
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(
                lambda r: _score_record(model, r, profile, root), records))
    raise ValueError(f"unknown scoring mode {mode!r}")


def score_from_features(model: DetectorModel, records: list[SampleRecord],
                        features: dict[str, np.ndarray]) -> list[ScoreRecord]:
    """Score precomputed feature rows (originals only, no flip rows)."""
    out = []
    for record in records:
        if record.sample_id not in features:
            raise MissingFeatures(record.sample_id)
        score = model.score(features[record.sample_id])
        out.append(ScoreRecord(record.sample_id, record.label,
                               record.morph_method, score))
    return out


def save_scores(records: list[ScoreRecord], path: str | Path,
                header_comments: tuple[str, ...] = ()) -> None:
    lines = [f"# {comment}" for comment in header_comments]
    lines.append(",".join(SCORE_HEADER))
    for r in records:
        lines.append(f"{r.sample_id},{r.label.value},{r.morph_method.value},"
                     f"{format_score(r.score)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _iter_csv_rows(path: Path):
    with path.open("r", encoding="utf-8", newline="") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield line_no, next(csv.reader([line]))


def load_scores(path: str | Path) -> list[ScoreRecord]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"score file not found: {path}")
    rows = _iter_csv_rows(path)
    try:
        line_no, header = next(rows)
    except StopIteration:
        raise ParseError("score file has no header", line=1) from None
    if header != SCORE_HEADER:
        raise ParseError(f"bad score header {header!r}", line=line_no)
    records: list[ScoreRecord] = []
    seen: set[str] = set()
    for line_no, fields in rows:
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", line=line_no)
        sample_id, label_s, method_s, score_s = fields
        try:
            label = Label(label_s)
            method = MorphMethod(method_s)
        except ValueError as exc:
            raise ParseError(str(exc), line=line_no) from None
        try:
            score = float(score_s)
        except ValueError:
            raise ParseError(f"bad score {score_s!r}", line=line_no) from None
        if not np.isfinite(score) or not 0.0 <= score <= 1.0:
            raise InvariantViolation(sample_id, f"score {score!r} outside [0, 1]")
        if sample_id in seen:
            raise InvariantViolation(sample_id, "duplicate sample_id")
        seen.add(sample_id)
        records.append(ScoreRecord(sample_id, label, method, score))
    return records


def validate_score_file(path: str | Path) -> list[str]:
    """Collect every problem in a score file as a warning string.

    Structural damage (missing file, missing/garbled header) still raises;
    everything row-level is reported so external producers get a full list.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"score file not found: {path}")
    rows = _iter_csv_rows(path)
    try:
        line_no, header = next(rows)
    except StopIteration:
        raise ParseError("score file has no header", line=1) from None
    if header != SCORE_HEADER:
        raise ParseError(f"bad score header {header!r}", line=line_no)
    warnings: list[str] = []
    seen: set[str] = set()
    n_records = 0
    for line_no, fields in rows:
        if len(fields) != 4:
            warnings.append(f"line {line_no}: expected 4 fields, got {len(fields)}")
            continue
        n_records += 1
        sample_id, label_s, method_s, score_s = fields
        label = None
        try:
            label = Label(label_s)
        except ValueError:
            warnings.append(f"line {line_no}: unknown label {label_s!r}")
        method = None
        try:
            method = MorphMethod(method_s)
        except ValueError:
            warnings.append(f"line {line_no}: unknown morph method {method_s!r}")
        if label is Label.BONA_FIDE and method not in (None, MorphMethod.NONE):
            warnings.append(f"line {line_no}: bona fide sample with morph method"
                            f" {method_s!r}")
        if label is Label.ATTACK and method is MorphMethod.NONE:
            warnings.append(f"line {line_no}: attack sample without a morph method")
        try:
            score = float(score_s)
        except ValueError:
            warnings.append(f"line {line_no}: unparsable score {score_s!r}")
        else:
            if not np.isfinite(score) or not 0.0 <= score <= 1.0:
                warnings.append(f"line {line_no}: score {score_s} outside [0, 1]")
        if sample_id in seen:
            warnings.append(f"line {line_no}: duplicate sample_id {sample_id!r}")
        seen.add(sample_id)
    if n_records == 0:
        warnings.append("score file contains no records")
    return warnings
