"""Morphing attack detection toolkit: landmark morphs, LBP features,
a small trained detector head, and the full detection-error metric suite."""

from .errors import MorphkitError
from .image import ImageBuffer
from .landmarks import LandmarkSet, TriangleMesh, delaunay_triangulate
from .manifest import DatasetManifest, Label, MorphMethod, SampleRecord, Split
from .metrics import EvalReport, auc, bpcer_at_apcer, compute_rates, eer, evaluate
from .morph import MorphSpec, morph_pair
from .scorer import ScoreRecord, load_scores, save_scores, score_manifest
from .trainer import DetectorModel, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "DatasetManifest", "DetectorModel", "EvalReport", "ImageBuffer",
    "Label", "LandmarkSet", "MorphMethod", "MorphSpec", "MorphkitError",
    "SampleRecord", "ScoreRecord", "Split", "TrainConfig", "TriangleMesh",
    "auc", "bpcer_at_apcer", "compute_rates", "delaunay_triangulate", "eer",
    "evaluate", "load_scores", "morph_pair", "save_scores", "score_manifest",
    "train",
]
