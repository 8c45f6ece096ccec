"""Detection error rates, ROC/AUC/EER and fixed-width report tables.

Conventions, fixed once for the whole toolkit:
  - higher score = more attack-like;
  - a sample scoring exactly at the threshold is classified as an attack;
  - apcer = fraction of attacks scored below the threshold (missed),
    bpcer = fraction of bona fide scored at/above it (falsely rejected).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, SingleClassFile
from .manifest import Label, MorphMethod
from .scorer import ScoreRecord

# APCER operating points reported everywhere, as (ratio, column label)
BPCER_TARGETS = ((0.001, "0.10"), (0.01, "1.00"), (0.1, "10.00"), (0.2, "20.00"))

TABLE_COLUMNS = ["detector", "dataset", "AUC(%)", "EER(%)",
                 "BPCER@0.10%", "BPCER@1.00%", "BPCER@10.00%", "BPCER@20.00%"]


def _split_scores(records: list[ScoreRecord]) -> tuple[np.ndarray, np.ndarray]:
    attack = np.array(sorted(r.score for r in records if r.label is Label.ATTACK))
    bona = np.array(sorted(r.score for r in records if r.label is Label.BONA_FIDE))
    if len(attack) == 0 or len(bona) == 0:
        raise SingleClassFile("need at least one attack and one bona fide score")
    return attack, bona


def compute_rates(records: list[ScoreRecord], threshold: float) -> tuple[float, float]:
    """(apcer, bpcer) at one threshold; score >= threshold classifies as attack."""
    attack, bona = _split_scores(records)
    apcer = float(np.count_nonzero(attack < threshold)) / len(attack)
    bpcer = float(np.count_nonzero(bona >= threshold)) / len(bona)
    return apcer, bpcer


@dataclass(frozen=True)
class RocCurve:
    """Operating points (apcer, 1-bpcer, threshold), threshold-ascending."""

    points: tuple[tuple[float, float, float], ...]


def _operating_points(records: list[ScoreRecord]):
    """Thresholds at every distinct score plus -inf/+inf sentinels."""
    attack, bona = _split_scores(records)
    distinct = np.unique(np.concatenate([attack, bona]))
    thresholds = np.concatenate([[-np.inf], distinct, [np.inf]])
    apcer = np.searchsorted(attack, thresholds, side="left") / len(attack)
    bpcer = 1.0 - np.searchsorted(bona, thresholds, side="left") / len(bona)
    return thresholds, apcer, bpcer


def roc_curve(records: list[ScoreRecord]) -> RocCurve:
    thresholds, apcer, bpcer = _operating_points(records)
    points = tuple((float(a), float(1.0 - b), float(t))
                   for t, a, b in zip(thresholds, apcer, bpcer))
    return RocCurve(points)


def eer(records: list[ScoreRecord]) -> float:
    """Equal error rate over the threshold sweep.

    Returns the exact rate when some threshold gives apcer == bpcer;
    otherwise interpolates linearly between the two straddling operating
    points (apcer is non-decreasing and bpcer non-increasing in the
    threshold, so the straddle is unique).
    """
    _, apcer, bpcer = _operating_points(records)
    diff = apcer - bpcer
    exact = np.nonzero(diff == 0.0)[0]
    if len(exact):
        return float(apcer[exact[0]])
    i = int(np.nonzero(diff > 0.0)[0][0]) - 1
    a0, a1 = apcer[i], apcer[i + 1]
    b0, b1 = bpcer[i], bpcer[i + 1]
    lam = (b0 - a0) / ((a1 - a0) - (b1 - b0))
    return float(a0 + lam * (a1 - a0))


def auc(records: list[ScoreRecord]) -> float:
    """Area under the (apcer, 1-bpcer) curve.

    The trapezoidal area over all distinct thresholds equals the
    Mann-Whitney statistic P(attack > bona) + P(attack == bona)/2, which is
    what gets computed here: integer pair counts, one final division.
    """
    attack, bona = _split_scores(records)
    below = np.searchsorted(bona, attack, side="left")
    at_or_below = np.searchsorted(bona, attack, side="right")
    wins = int(below.sum())
    ties = int((at_or_below - below).sum())
    return (2 * wins + ties) / (2 * len(attack) * len(bona))


def bpcer_at_apcer(records: list[ScoreRecord], target_apcer: float) -> float:
    """Lowest bpcer over all thresholds whose apcer stays within the target."""
    if not 0.0 < target_apcer < 1.0:
        raise ValueError(f"target apcer must be in (0, 1), got {target_apcer!r}")
    _, apcer, bpcer = _operating_points(records)
    feasible = bpcer[apcer <= target_apcer]
    return float(feasible.min())


@dataclass(frozen=True)
class MetricBundle:
    auc_percent: float
    eer_percent: float
    bpcer_at_apcer: dict[str, float]  # keyed by APCER percent label

    def as_dict(self) -> dict:
        return {"auc_percent": self.auc_percent, "eer_percent": self.eer_percent,
                "bpcer_at_apcer": dict(self.bpcer_at_apcer)}


@dataclass(frozen=True)
class EvalReport:
    dataset: str
    detector: str
    auc_percent: float
    eer_percent: float
    bpcer_at_apcer: dict[str, float]
    per_method: dict[str, MetricBundle] = field(default_factory=dict)

    @property
    def overall(self) -> MetricBundle:
        return MetricBundle(self.auc_percent, self.eer_percent,
                            dict(self.bpcer_at_apcer))


def _bundle(records: list[ScoreRecord]) -> MetricBundle:
    return MetricBundle(
        auc_percent=100.0 * auc(records),
        eer_percent=100.0 * eer(records),
        bpcer_at_apcer={label: 100.0 * bpcer_at_apcer(records, ratio)
                        for ratio, label in BPCER_TARGETS},
    )


def evaluate(records: list[ScoreRecord], group_by_method: bool = False,
             dataset: str = "", detector: str = "") -> EvalReport:
    """Overall metric bundle, optionally split per morph method.

    Each method group is evaluated against the full bona fide set; methods
    with no attack samples simply do not appear.
    """
    overall = _bundle(records)
    per_method: dict[str, MetricBundle] = {}
    if group_by_method:
        bona = [r for r in records if r.label is Label.BONA_FIDE]
        for method in MorphMethod:
            if method is MorphMethod.NONE:
                continue
            attacks = [r for r in records
                       if r.label is Label.ATTACK and r.morph_method is method]
            if attacks:
                per_method[method.value] = _bundle(bona + attacks)
    return EvalReport(dataset, detector, overall.auc_percent,
                      overall.eer_percent, overall.bpcer_at_apcer, per_method)


def report_to_json(report: EvalReport) -> str:
    payload = {
        "dataset": report.dataset,
        "detector": report.detector,
        "auc_percent": report.auc_percent,
        "eer_percent": report.eer_percent,
        "bpcer_at_apcer": dict(report.bpcer_at_apcer),
        "per_method": {m: b.as_dict() for m, b in report.per_method.items()},
    }
    return json.dumps(payload, indent=2) + "\n"


def load_report_json(path: str | Path) -> EvalReport:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    per_method = {m: MetricBundle(b["auc_percent"], b["eer_percent"],
                                  dict(b["bpcer_at_apcer"]))
                  for m, b in payload.get("per_method", {}).items()}
    return EvalReport(payload["dataset"], payload["detector"],
                      payload["auc_percent"], payload["eer_percent"],
                      dict(payload["bpcer_at_apcer"]), per_method)


def save_curves(records: list[ScoreRecord], path: str | Path,
                header_comments: tuple[str, ...] = ()) -> None:
    """Raw (threshold, apcer, bpcer) triples for external plotting."""
    thresholds, apcer, bpcer = _operating_points(records)
    lines = [f"# {c}" for c in header_comments]
    lines.append("threshold,apcer,bpcer")
    for t, a, b in zip(thresholds, apcer, bpcer):
        lines.append(f"{float(t)!r},{float(a)!r},{float(b)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def render_table(reports: list[EvalReport]) -> str:
    """Fixed-width report table, one row per (detector, dataset) bundle.

    Cells are whitespace-separated, so an empty detector or dataset is
    written as "-" (and read back as empty by parse_table).
    """
    rows = [[r.detector or "-", r.dataset or "-",
             f"{r.auc_percent:.2f}", f"{r.eer_percent:.2f}",
             *(f"{r.bpcer_at_apcer[label]:.2f}" for _, label in BPCER_TARGETS)]
            for r in reports]
    widths = [max(len(TABLE_COLUMNS[c]), *(len(row[c]) for row in rows))
              if rows else len(TABLE_COLUMNS[c])
              for c in range(len(TABLE_COLUMNS))]
    def fmt(cells):
        left = [cells[0].ljust(widths[0]), cells[1].ljust(widths[1])]
        right = [cells[c].rjust(widths[c]) for c in range(2, len(cells))]
        return "  ".join(left + right).rstrip()
    lines = [fmt(TABLE_COLUMNS)]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list[EvalReport]:
    """Inverse of render_table (per-method bundles are not tabulated)."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0].split() != TABLE_COLUMNS:
        raise ParseError(f"bad table header: {lines[0]!r}" if lines
                         else "empty table")
    reports = []
    for ln in lines[1:]:
        cells = ln.split()
        if len(cells) != len(TABLE_COLUMNS):
            raise ParseError(f"expected {len(TABLE_COLUMNS)} columns: {ln!r}")
        detector = "" if cells[0] == "-" else cells[0]
        dataset = "" if cells[1] == "-" else cells[1]
        auc_pct, eer_pct = float(cells[2]), float(cells[3])
        bpcer = {label: float(cells[4 + k])
                 for k, (_, label) in enumerate(BPCER_TARGETS)}
        reports.append(EvalReport(dataset, detector, auc_pct, eer_pct, bpcer))
    return reports
