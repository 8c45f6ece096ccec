class BridgeError(Exception):
    """Base for all bridge failures."""


class WeightsLoadError(BridgeError):
    """The weights file is missing or not a loadable TorchScript module."""


class ManifestError(BridgeError):
    """The manifest file is missing, malformed, or lacks required columns."""


class ImageError(BridgeError):
    """An image named by a manifest row cannot be read."""

    def __init__(self, sample_id: str, detail: str):
        super().__init__(f"{sample_id}: {detail}")
        self.sample_id = sample_id


class HeadOutputError(BridgeError):
    """The model's output is not the probability head the bridge expects."""
