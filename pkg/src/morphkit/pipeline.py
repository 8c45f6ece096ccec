"""End-to-end workflow: toy corpus -> morphs -> split -> features -> model -> scores -> report.

Every stage reads only files written by earlier stages, so any stage can be
replaced by an external tool that honors the same formats. All randomness
flows from one seed through named substreams; rerunning a config yields
byte-identical artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, MissingFile, MorphkitError, StageError
from .features import parse_profile
from .image import ImageBuffer, crop_and_resize, flip_horizontal, read_png, to_grayscale, write_png
from .landmarks import LandmarkSet, parse_landmarks, save_landmarks
from .manifest import (
    BoundingBox,
    DatasetManifest,
    Label,
    MorphMethod,
    SampleRecord,
    Split,
    load_manifest,
    save_manifest,
    split_holdout,
)
from .metrics import evaluate, render_table, report_to_json, save_curves
from .morph import MorphSpec, morph_pair
from .rng import SplitMix64, derive_seed, fnv1a64
from .scorer import load_scores, save_scores, score_from_features
from .trainer import TrainConfig, build_dataset, load_model, save_model, save_train_log, train
from .features import load_features, save_features, extract_lbp_histogram

STAGES = ("corpus", "morph", "split", "extract", "train", "score", "eval")


@dataclass
class PipelineConfig:
    out_dir: str
    seed: int = 0
    subjects: int = 40
    test_subjects: int = 20
    width: int = 96
    height: int = 96
    alpha: float = 0.5
    morph_ratio: str = "15:25"
    profile: str = "lbp-4x4-96x96"
    holdout_fraction: float = 0.2
    learning_rate: float = 1e-4
    epochs: int = 30
    batch_size: int = 16
    hidden_dim: int = 64
    augment_flip: bool = True
    lm_grid: str = "5x4"
    noise_amp: float = 8.0

    def as_text(self) -> str:
        """Canonical form of the semantic knobs; out_dir is a workspace
        location, not part of the run's identity, so it is left out and two
        runs into different directories stay byte-identical."""
        pairs = [(f.name, getattr(self, f.name)) for f in dataclass_fields(self)
                 if f.name != "out_dir"]
        return "\n".join(f"{k}={v}" for k, v in sorted(pairs))

    def digest(self) -> str:
        return f"{fnv1a64(self.as_text().encode('utf-8')):016x}"

    def comments(self) -> tuple[str, str]:
        return (f"seed={self.seed}", f"config={self.digest()}")


_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False,
               "yes": True, "no": False}


def parse_pipeline_config(text: str) -> PipelineConfig:
    """Flat key=value lines; '#' comments; unknown keys are config errors."""
    field_types = {f.name: f.type for f in dataclass_fields(PipelineConfig)}
    values: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in field_types:
            raise ConfigError(f"line {line_no}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate config key {key!r}")
        kind = field_types[key]
        try:
            if kind == "int":
                values[key] = int(value)
            elif kind == "float":
                values[key] = float(value)
            elif kind == "bool":
                values[key] = _BOOL_WORDS[value.lower()]
            else:
                values[key] = value
        except (ValueError, KeyError):
            raise ConfigError(
                f"line {line_no}: bad value {value!r} for {key!r}") from None
    if "out_dir" not in values:
        raise ConfigError("config must set out_dir")
    config = PipelineConfig(**values)
    _validate_config(config)
    return config


def _validate_config(config: PipelineConfig) -> None:
    if config.subjects < 2 or config.test_subjects < 2:
        raise ConfigError("subjects and test_subjects must each be >= 2")
    if config.width < 8 or config.height < 8:
        raise ConfigError("toy images must be at least 8x8")
    if not 0.0 <= config.alpha <= 1.0:
        raise ConfigError("alpha must lie in [0, 1]")
    if not 0.0 < config.holdout_fraction < 1.0:
        raise ConfigError("holdout_fraction must lie in (0, 1)")
    try:
        a, b = (int(v) for v in config.morph_ratio.split(":"))
        if a <= 0 or b <= 0:
            raise ValueError
    except ValueError:
        raise ConfigError(f"bad morph_ratio {config.morph_ratio!r}") from None
    try:
        gx, gy = (int(v) for v in config.lm_grid.split("x"))
        if gx < 2 or gy < 2:
            raise ValueError
    except ValueError:
        raise ConfigError(f"bad lm_grid {config.lm_grid!r}") from None
    try:
        parse_profile(config.profile)
    except MorphkitError as exc:
        raise ConfigError(str(exc)) from None


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_pipeline_config(path.read_text(encoding="utf-8"))


# --- toy corpus -------------------------------------------------------------

def _toy_image(rng: np.random.Generator, w: int, h: int, noise_amp: float) -> ImageBuffer:
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    scale = float(min(w, h))
    img = np.full((h, w), 120.0)
    for _ in range(4):
        angle = rng.uniform(0.0, np.pi)
        freq = rng.uniform(1.0, 3.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(15.0, 30.0)
        along = (xs * np.cos(angle) + ys * np.sin(angle)) / scale
        img += amp * np.sin(2.0 * np.pi * freq * along + phase)
    cx = w * (0.5 + rng.uniform(-0.06, 0.06))
    cy = h * (0.5 + rng.uniform(-0.06, 0.06))
    rx = w * rng.uniform(0.28, 0.38)
    ry = h * rng.uniform(0.32, 0.42)
    d2 = ((xs + 0.5 - cx) / rx) ** 2 + ((ys + 0.5 - cy) / ry) ** 2
    img += 35.0 * np.exp(-d2)
    img += rng.uniform(-noise_amp, noise_amp, (h, w))
    quantized = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    return ImageBuffer(quantized[:, :, None])


def _toy_landmarks(rng: np.random.Generator, w: int, h: int,
                   grid: tuple[int, int]) -> LandmarkSet:
    gx, gy = grid
    margin_x, margin_y = 0.12 * w, 0.12 * h
    jitter = 0.03 * min(w, h)
    points = []
    for y in np.linspace(margin_y, h - margin_y, gy):
        for x in np.linspace(margin_x, w - margin_x, gx):
            px = x + rng.uniform(-jitter, jitter)
            py = y + rng.uniform(-jitter, jitter)
            points.append((min(max(px, 1.0), w - 1.0),
                           min(max(py, 1.0), h - 1.0)))
    return LandmarkSet(np.array(points))


def make_toy_corpus(n_subjects: int, size: tuple[int, int], seed: int,
                    out_dir: str | Path, image_subdir: str = "corpus",
                    id_prefix: str = "subject", split: Split = Split.TRAIN,
                    lm_grid: tuple[int, int] = (5, 4),
                    noise_amp: float = 8.0, name: str = "toy") -> DatasetManifest:
    """Generate bona fide texture images with jittered landmark grids.

    Paths stored in the returned manifest are relative to out_dir.
    """
    if n_subjects < 2:
        raise ValueError("need at least 2 subjects")
    w, h = size
    out_dir = Path(out_dir)
    (out_dir / image_subdir).mkdir(parents=True, exist_ok=True)
    records = []
    split_map = {}
    for i in range(n_subjects):
        rng = np.random.Generator(np.random.PCG64(
            derive_seed(seed, f"{id_prefix}-{i}")))
        img = _toy_image(rng, w, h, noise_amp)
        lms = _toy_landmarks(rng, w, h, lm_grid)
        sample_id = f"{id_prefix}_{i:03d}"
        img_rel = f"{image_subdir}/{sample_id}.png"
        lm_rel = f"{image_subdir}/{sample_id}.lm"
        write_png(img, out_dir / img_rel)
        save_landmarks(lms, out_dir / lm_rel)
        records.append(SampleRecord(
            sample_id=sample_id, image_path=img_rel, label=Label.BONA_FIDE,
            morph_method=MorphMethod.NONE, source_subjects=(sample_id,),
            bbox=None, landmarks_path=lm_rel))
        split_map[sample_id] = split
    return DatasetManifest(name=name, records=records, split=split_map)


def plan_morph_pairs(n_subjects: int, ratio: tuple[int, int], seed: int) -> list[tuple[int, int]]:
    """Seeded choice of subject pairs; count scales n by the attack:bona ratio."""
    count = int(n_subjects * ratio[0] / ratio[1] + 0.5)
    pairs = [(a, b) for a in range(n_subjects) for b in range(a + 1, n_subjects)]
    count = min(count, len(pairs))
    rng = SplitMix64(seed)
    rng.shuffle(pairs)
    return sorted(pairs[:count])


# --- stages -----------------------------------------------------------------

def _paths(config: PipelineConfig) -> dict[str, Path]:
    out = Path(config.out_dir)
    return {
        "out": out,
        "manifests": out / "manifests",
        "corpus_train": out / "manifests" / "corpus_train.csv",
        "corpus_test": out / "manifests" / "corpus_test.csv",
        "full_train": out / "manifests" / "full_train.csv",
        "full_test": out / "manifests" / "full_test.csv",
        "train_split": out / "manifests" / "train_split.csv",
        "features_train": out / "features" / "train.mkfv",
        "features_test": out / "features" / "test.mkfv",
        "model": out / "model.mkmd",
        "train_log": out / "train_log.csv",
        "scores": out / "scores.csv",
        "report": out / "report.json",
        "curves": out / "curves.csv",
        "table": out / "table.txt",
        "run": out / "run.json",
    }


def _lm_grid(config: PipelineConfig) -> tuple[int, int]:
    gx, gy = (int(v) for v in config.lm_grid.split("x"))
    return gx, gy


def stage_corpus(config: PipelineConfig) -> None:
    paths = _paths(config)
    paths["manifests"].mkdir(parents=True, exist_ok=True)
    size = (config.width, config.height)
    grid = _lm_grid(config)
    train = make_toy_corpus(
        config.subjects, size, derive_seed(config.seed, "corpus-train"),
        paths["out"], image_subdir="corpus/train", id_prefix="subject",
        split=Split.TRAIN, lm_grid=grid, noise_amp=config.noise_amp,
        name="toy-train")
    test = make_toy_corpus(
        config.test_subjects, size, derive_seed(config.seed, "corpus-test"),
        paths["out"], image_subdir="corpus/test", id_prefix="probe",
        split=Split.TEST, lm_grid=grid, noise_amp=config.noise_amp,
        name="toy-test")
    save_manifest(train, paths["corpus_train"], header_comments=config.comments())
    save_manifest(test, paths["corpus_test"], header_comments=config.comments())


def _morph_corpus(config: PipelineConfig, corpus: DatasetManifest,
                  image_subdir: str, pair_seed_label: str, split: Split):
    paths = _paths(config)
    (paths["out"] / image_subdir).mkdir(parents=True, exist_ok=True)
    records = list(corpus.records)
    ratio = tuple(int(v) for v in config.morph_ratio.split(":"))
    pairs = plan_morph_pairs(len(records), ratio,
                             derive_seed(config.seed, pair_seed_label))
    out_records = []
    lm_count = None
    for ia, ib in pairs:
        rec_a, rec_b = records[ia], records[ib]
        imgs = []
        lms = []
        for rec in (rec_a, rec_b):
            img_path = paths["out"] / rec.image_path
            lm_path = paths["out"] / rec.landmarks_path
            if not lm_path.is_file():
                raise MissingFile(
                    f"landmarks for sample {rec.sample_id}: {lm_path}")
            imgs.append(read_png(img_path))
            lms.append(parse_landmarks(lm_path, expected_count=lm_count))
            lm_count = len(lms[-1].points)
        morph_id = f"morph_{rec_a.sample_id}_{rec_b.sample_id}"
        spec = MorphSpec(alpha=config.alpha, source_a=rec_a.sample_id,
                         source_b=rec_b.sample_id)
        morphed = morph_pair(imgs[0], imgs[1], lms[0], lms[1], spec)
        img_rel = f"{image_subdir}/{morph_id}.png"
        write_png(morphed, paths["out"] / img_rel)
        out_records.append(SampleRecord(
            sample_id=morph_id, image_path=img_rel, label=Label.ATTACK,
            morph_method=MorphMethod.OPENCV,
            source_subjects=(rec_a.sample_id, rec_b.sample_id),
            bbox=None, landmarks_path=None))
    all_records = records + out_records
    split_map = {r.sample_id: split for r in all_records}
    return DatasetManifest(name=corpus.name, records=all_records, split=split_map)


def stage_morph(config: PipelineConfig) -> None:
    paths = _paths(config)
    corpus_train = load_manifest(paths["corpus_train"])
    corpus_test = load_manifest(paths["corpus_test"])
    full_train = _morph_corpus(config, corpus_train, "morphs/train",
                               "pairs-train", Split.TRAIN)
    full_test = _morph_corpus(config, corpus_test, "morphs/test",
                              "pairs-test", Split.TEST)
    save_manifest(full_train, paths["full_train"], header_comments=config.comments())
    save_manifest(full_test, paths["full_test"], header_comments=config.comments())


def stage_split(config: PipelineConfig) -> None:
    paths = _paths(config)
    full_train = load_manifest(paths["full_train"])
    seeded = split_holdout(full_train, config.holdout_fraction,
                           derive_seed(config.seed, "split"))
    save_manifest(seeded, paths["train_split"], header_comments=config.comments())


def _extract_features(config: PipelineConfig, manifest: DatasetManifest,
                      with_flips: bool):
    paths = _paths(config)
    profile = parse_profile(config.profile)
    entries = []
    for record in manifest.records:
        img = read_png(paths["out"] / record.image_path)
        box = record.bbox if record.bbox is not None else img.full_box()
        prepped = crop_and_resize(img, box, profile.out_w, profile.out_h)
        gray = to_grayscale(prepped)
        vec = extract_lbp_histogram(gray, profile.grid,
                                    descriptor_id=profile.descriptor_id)
        entries.append((record.sample_id, vec.values))
        if with_flips:
            flipped = to_grayscale(flip_horizontal(prepped))
            flip_vec = extract_lbp_histogram(flipped, profile.grid,
                                             descriptor_id=profile.descriptor_id)
            entries.append((record.sample_id + "#flip", flip_vec.values))
    return entries


def stage_extract(config: PipelineConfig) -> None:
    paths = _paths(config)
    paths["features_train"].parent.mkdir(parents=True, exist_ok=True)
    train_manifest = load_manifest(paths["train_split"])
    test_manifest = load_manifest(paths["full_test"])
    save_features(_extract_features(config, train_manifest, with_flips=True),
                  paths["features_train"])
    save_features(_extract_features(config, test_manifest, with_flips=False),
                  paths["features_test"])


def stage_train(config: PipelineConfig) -> None:
    paths = _paths(config)
    manifest = load_manifest(paths["train_split"])
    features = load_features(paths["features_train"])
    profile = parse_profile(config.profile)
    train_cfg = TrainConfig(
        learning_rate=config.learning_rate, epochs=config.epochs,
        batch_size=config.batch_size, hidden_dim=config.hidden_dim,
        holdout_fraction=config.holdout_fraction,
        augment_flip=config.augment_flip,
        seed=derive_seed(config.seed, "train"))
    _, train_x, train_y = build_dataset(manifest.records_in(Split.TRAIN),
                                        features, augment_flip=config.augment_flip)
    _, hold_x, hold_y = build_dataset(manifest.records_in(Split.HOLDOUT),
                                      features, augment_flip=False)
    result = train(train_x, train_y, hold_x, hold_y, train_cfg,
                   profile.descriptor_id)
    save_model(result, paths["model"])
    save_train_log(result, paths["train_log"])


def stage_score(config: PipelineConfig) -> None:
    paths = _paths(config)
    model, _ = load_model(paths["model"])
    profile = parse_profile(config.profile)
    if model.descriptor_id != profile.descriptor_id:
        from .errors import ProfileMismatch
        raise ProfileMismatch(
            f"model {model.descriptor_id!r} vs profile {profile.descriptor_id!r}")
    manifest = load_manifest(paths["full_test"])
    features = load_features(paths["features_test"])
    records = score_from_features(model, manifest.records_in(Split.TEST), features)
    save_scores(records, paths["scores"], header_comments=config.comments())


def stage_eval(config: PipelineConfig) -> None:
    paths = _paths(config)
    records = load_scores(paths["scores"])
    profile = parse_profile(config.profile)
    report = evaluate(records, group_by_method=True, dataset="toy",
                      detector=profile.name)
    paths["report"].write_text(report_to_json(report), encoding="utf-8")
    save_curves(records, paths["curves"], header_comments=config.comments())
    paths["table"].write_text(render_table([report]), encoding="utf-8")


_STAGE_FUNCS = {
    "corpus": stage_corpus,
    "morph": stage_morph,
    "split": stage_split,
    "extract": stage_extract,
    "train": stage_train,
    "score": stage_score,
    "eval": stage_eval,
}


def _write_run_summary(config: PipelineConfig, ran: list[str]) -> None:
    paths = _paths(config)
    artifacts = {}
    # "run" is this summary itself; listing it would make the summary depend
    # on whether a previous run already wrote one
    for key, path in paths.items():
        if key in ("out", "manifests", "run") or not path.exists():
            continue
        artifacts[key] = str(path.relative_to(paths["out"]))
    payload = {
        "seed": config.seed,
        "config_digest": config.digest(),
        "config": {k: v for k, v in
                   (line.split("=", 1) for line in config.as_text().splitlines())},
        "stages_run": ran,
        "artifacts": artifacts,
    }
    paths["run"].write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")


def run_pipeline(config: PipelineConfig, stages: list[str] | None = None) -> None:
    """Run the requested stages in canonical order; errors name their stage."""
    selected = list(STAGES) if stages is None else list(stages)
    for name in selected:
        if name not in _STAGE_FUNCS:
            raise ConfigError(f"unknown stage {name!r}")
    Path(config.out_dir).mkdir(parents=True, exist_ok=True)
    ran = []
    for name in STAGES:
        if name not in selected:
            continue
        try:
            _STAGE_FUNCS[name](config)
        except MorphkitError as exc:
            raise StageError(name, exc) from exc
        ran.append(name)
    _write_run_summary(config, ran)
