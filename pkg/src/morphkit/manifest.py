"""Labeled sample collections: load, validate, split and summarize.

Manifest CSV layout (UTF-8, ``#`` comment lines allowed before the header):

    sample_id,image_path,label,morph_method,subject_a,subject_b,
    bbox_x,bbox_y,bbox_w,bbox_h,landmarks_path[,split]

Empty string marks an absent optional.  The trailing ``split`` column is an
extension written by this toolkit; files without it load with every record
assigned to Train.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvariantViolation, MissingFile, ParseError, TooFewSamples
from .rng import SplitMix64


class Label(enum.Enum):
    BONA_FIDE = "bonafide"
    ATTACK = "attack"


class MorphMethod(enum.Enum):
    NONE = "none"
    OPENCV = "opencv"
    FACEMORPHER = "facemorpher"
    STYLEGAN = "stylegan"
    AMSL = "amsl"
    WEBMORPH = "webmorph"


class Split(enum.Enum):
    TRAIN = "train"
    HOLDOUT = "holdout"
    TEST = "test"


ATTACK_METHODS = [m for m in MorphMethod if m is not MorphMethod.NONE]

CSV_HEADER = [
    "sample_id", "image_path", "label", "morph_method", "subject_a",
    "subject_b", "bbox_x", "bbox_y", "bbox_w", "bbox_h", "landmarks_path",
]


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"bounding box must have positive size, got {self.w}x{self.h}")


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    image_path: str
    label: Label
    morph_method: MorphMethod = MorphMethod.NONE
    source_subjects: tuple[str, ...] = ()
    bbox: BoundingBox | None = None
    landmarks_path: str | None = None

    def validate(self) -> None:
        if self.label is Label.BONA_FIDE:
            if self.morph_method is not MorphMethod.NONE:
                raise InvariantViolation(self.sample_id, "bona fide record must have morph_method none")
            if len(self.source_subjects) > 1:
                raise InvariantViolation(self.sample_id, "bona fide record must have at most one source subject")
        else:
            if self.morph_method is MorphMethod.NONE:
                raise InvariantViolation(self.sample_id, "attack record must name a morph method")
            if len(self.source_subjects) != 2:
                raise InvariantViolation(self.sample_id, "attack record must have exactly two source subjects")


@dataclass
class DatasetManifest:
    name: str
    records: list[SampleRecord]
    split: dict[str, Split] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.sample_id in seen:
                raise InvariantViolation(rec.sample_id, "duplicate sample_id")
            seen.add(rec.sample_id)
            rec.validate()
            self.split.setdefault(rec.sample_id, Split.TRAIN)
        extra = set(self.split) - seen
        if extra:
            raise InvariantViolation(sorted(extra)[0], "split assignment for unknown sample")

    def __len__(self) -> int:
        return len(self.records)

    def records_in(self, *splits: Split) -> list[SampleRecord]:
        wanted = set(splits)
        return [r for r in self.records if self.split[r.sample_id] in wanted]

    def by_id(self, sample_id: str) -> SampleRecord:
        for rec in self.records:
            if rec.sample_id == sample_id:
                return rec
        raise KeyError(sample_id)


def _parse_enum(cls, raw, line_no, what):
    try:
        return cls(raw)
    except ValueError:
        raise ParseError(f"unknown {what} {raw!r}", line_no) from None


def load_manifest(path: str | Path, name: str | None = None) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    records: list[SampleRecord] = []
    split: dict[str, Split] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    data_lines = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip() and not ln.startswith("#")]
    if not data_lines:
        raise ParseError("empty manifest file", 1)
    header_no, header_line = data_lines[0]
    header = next(csv.reader([header_line]))
    if header[: len(CSV_HEADER)] != CSV_HEADER or len(header) > len(CSV_HEADER) + 1 or (
        len(header) == len(CSV_HEADER) + 1 and header[-1] != "split"
    ):
        raise ParseError(f"unexpected manifest header: {header_line!r}", header_no)
    has_split = len(header) == len(CSV_HEADER) + 1
    for line_no, line in data_lines[1:]:
        row = next(csv.reader([line]))
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line_no)
        (sid, image_path, label_raw, method_raw, subj_a, subj_b,
         bx, by, bw, bh, lmk) = row[: len(CSV_HEADER)]
        label = _parse_enum(Label, label_raw, line_no, "label")
        method = _parse_enum(MorphMethod, method_raw, line_no, "morph_method")
        subjects = tuple(s for s in (subj_a, subj_b) if s)
        bbox_fields = [bx, by, bw, bh]
        if any(bbox_fields) and not all(bbox_fields):
            raise ParseError("bounding box needs all of bbox_x,bbox_y,bbox_w,bbox_h", line_no)
        bbox = None
        if all(bbox_fields):
            try:
                bbox = BoundingBox(*(float(v) for v in bbox_fields))
            except ValueError as exc:
                raise ParseError(f"bad bounding box: {exc}", line_no) from None
        rec = SampleRecord(
            sample_id=sid,
            image_path=image_path,
            label=label,
            morph_method=method,
            source_subjects=subjects,
            bbox=bbox,
            landmarks_path=lmk or None,
        )
        rec.validate()
        records.append(rec)
        if has_split:
            split[sid] = _parse_enum(Split, row[-1], line_no, "split")
    return DatasetManifest(name=name or path.stem, records=records, split=split)


def _fmt_num(v: float) -> str:
    # repr round-trips doubles exactly; %g-style formats would truncate
    return repr(float(v))


def save_manifest(manifest: DatasetManifest, path: str | Path,
                  header_comments: list[str] | None = None) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        for comment in header_comments or []:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER + ["split"])
        for rec in manifest.records:
            subj = list(rec.source_subjects) + ["", ""]
            bbox = ([_fmt_num(rec.bbox.x), _fmt_num(rec.bbox.y),
                     _fmt_num(rec.bbox.w), _fmt_num(rec.bbox.h)]
                    if rec.bbox else ["", "", "", ""])
            writer.writerow([
                rec.sample_id, rec.image_path, rec.label.value, rec.morph_method.value,
                subj[0], subj[1], *bbox, rec.landmarks_path or "",
                manifest.split[rec.sample_id].value,
            ])


def summarize(manifest: DatasetManifest) -> dict[tuple[Label, MorphMethod, Split], int]:
    """Counts per (label, morph_method, split), every combination present.

    Keys are ordered label-major, then method enum order, then split order,
    so rendering the dict reproduces a deterministic table.
    """
    counts = {
        (label, method, split): 0
        for label in Label for method in MorphMethod for split in Split
    }
    for rec in manifest.records:
        counts[(rec.label, rec.morph_method, manifest.split[rec.sample_id])] += 1
    return counts


def counts_by_method(counts: dict[tuple[Label, MorphMethod, Split], int]) -> dict[str, int]:
    """Collapse a summarize() table to one bona fide total plus per-method totals."""
    out = {"bonafide": 0}
    for method in ATTACK_METHODS:
        out[method.value] = 0
    for (label, method, _split), n in counts.items():
        if label is Label.BONA_FIDE:
            out["bonafide"] += n
        elif method is not MorphMethod.NONE:
            out[method.value] += n
    return out


def render_summary(manifest: DatasetManifest) -> str:
    counts = summarize(manifest)
    rows = [("bona fide", Label.BONA_FIDE, MorphMethod.NONE)]
    rows += [(m.value, Label.ATTACK, m) for m in ATTACK_METHODS]
    lines = [f"{'class':<12}{'train':>8}{'holdout':>9}{'test':>8}{'total':>8}"]
    for title, label, method in rows:
        per_split = [counts[(label, method, s)] for s in Split]
        lines.append(f"{title:<12}{per_split[0]:>8}{per_split[1]:>9}{per_split[2]:>8}{sum(per_split):>8}")
    lines.append(f"{'total':<12}{'':>8}{'':>9}{'':>8}{len(manifest):>8}")
    return "\n".join(lines)


def split_holdout(manifest: DatasetManifest, holdout_fraction: float, seed: int) -> DatasetManifest:
    """Reassign non-Test records to Train/Holdout, stratified by label.

    Per label class the holdout size is round-half-up(fraction * class size);
    a class that cannot contribute at least one sample raises TooFewSamples.
    Records already marked Test keep their assignment.
    """
    if not 0 < holdout_fraction < 1:
        raise ValueError(f"holdout_fraction must be in (0,1), got {holdout_fraction}")
    eligible = [r for r in manifest.records if manifest.split[r.sample_id] is not Split.TEST]
    if not eligible:
        raise TooFewSamples("no non-test records to split")
    new_split = dict(manifest.split)
    rng = SplitMix64(seed)
    for label in Label:
        class_ids = [r.sample_id for r in eligible if r.label is label]
        if not class_ids:
            continue
        k = int(holdout_fraction * len(class_ids) + 0.5)
        if k < 1:
            raise TooFewSamples(
                f"label {label.value!r} with {len(class_ids)} samples cannot "
                f"contribute a holdout sample at fraction {holdout_fraction}")
        order = list(range(len(class_ids)))
        rng.shuffle(order)
        chosen = set(order[:k])
        for idx, sid in enumerate(class_ids):
            new_split[sid] = Split.HOLDOUT if idx in chosen else Split.TRAIN
    return DatasetManifest(name=manifest.name, records=list(manifest.records), split=new_split)
