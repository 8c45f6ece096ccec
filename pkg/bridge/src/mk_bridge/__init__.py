from .bridge import (
    BACKBONE_INPUT_SIZES,
    BridgeConfig,
    ManifestRow,
    attack_scores,
    bridge_score,
    load_backbone,
    read_manifest,
)
from .errors import (
    BridgeError,
    HeadOutputError,
    ImageError,
    ManifestError,
    WeightsLoadError,
)

__all__ = [
    "BACKBONE_INPUT_SIZES",
    "BridgeConfig",
    "ManifestRow",
    "attack_scores",
    "bridge_score",
    "load_backbone",
    "read_manifest",
    "BridgeError",
    "HeadOutputError",
    "ImageError",
    "ManifestError",
    "WeightsLoadError",
]
