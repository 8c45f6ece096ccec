import time

import numpy as np
import pytest

from morphkit.image import ImageBuffer
from morphkit.landmarks import LandmarkSet
from morphkit.pipeline import PipelineConfig, run_pipeline


def gray_image(values) -> ImageBuffer:
    return ImageBuffer(np.asarray(values, dtype=np.uint8))


def random_face(seed: int, w: int = 48, h: int = 48):
    """Random grayscale image plus a jittered 3x3 landmark grid inside it."""
    rng = np.random.Generator(np.random.PCG64(seed))
    img = ImageBuffer(rng.integers(0, 256, size=(h, w, 1), dtype=np.uint8))
    points = []
    for fy in (0.2, 0.5, 0.8):
        for fx in (0.2, 0.5, 0.8):
            points.append((fx * w + rng.uniform(-2, 2),
                           fy * h + rng.uniform(-2, 2)))
    return img, LandmarkSet(np.array(points))


@pytest.fixture(scope="session")
def toy_run(tmp_path_factory):
    """One full default-config pipeline run, shared across the session."""
    out = tmp_path_factory.mktemp("toy_run")
    config = PipelineConfig(out_dir=str(out), seed=0)
    started = time.perf_counter()
    run_pipeline(config)
    elapsed = time.perf_counter() - started
    return {"dir": out, "config": config, "elapsed": elapsed}
