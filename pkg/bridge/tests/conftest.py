import numpy as np
import pytest
import torch
from PIL import Image


class SoftmaxDetector(torch.nn.Module):
    """Tiny stand-in for a 2-class deep detector: conv, pool, fc, softmax."""

    def __init__(self):
        super().__init__()
        self.conv = torch.nn.Conv2d(3, 4, 5, stride=7)
        self.fc = torch.nn.Linear(4, 2)

    def forward(self, x):
        h = torch.relu(self.conv(x))
        h = torch.nn.functional.adaptive_avg_pool2d(h, 1).flatten(1)
        return torch.softmax(self.fc(h), dim=1)


class SigmoidDetector(torch.nn.Module):
    """One-neuron head returning a flat (n,) probability vector."""

    def __init__(self):
        super().__init__()
        self.conv = torch.nn.Conv2d(3, 4, 5, stride=7)
        self.fc = torch.nn.Linear(4, 1)

    def forward(self, x):
        h = torch.relu(self.conv(x))
        h = torch.nn.functional.adaptive_avg_pool2d(h, 1).flatten(1)
        return torch.sigmoid(self.fc(h)).squeeze(1)


class LogitDetector(torch.nn.Module):
    """Head with no activation; its outputs sit far outside [0, 1]."""

    def __init__(self):
        super().__init__()
        self.fc = torch.nn.Linear(3, 2)
        torch.nn.init.zeros_(self.fc.weight)
        torch.nn.init.constant_(self.fc.bias, 5.0)

    def forward(self, x):
        return self.fc(x.mean(dim=(2, 3)))


@pytest.fixture(scope="session")
def weights_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("weights")
    for name, cls in (("softmax", SoftmaxDetector), ("sigmoid", SigmoidDetector),
                      ("logits", LogitDetector)):
        torch.manual_seed(7)
        torch.jit.script(cls()).save(str(out / f"{name}.pt"))
    return out


MANIFEST_HEADER = ("sample_id,image_path,label,morph_method,subject_a,subject_b,"
                   "bbox_x,bbox_y,bbox_w,bbox_h,landmarks_path,split")


def write_image(path, seed, size=(32, 32)):
    rng = np.random.Generator(np.random.PCG64(seed))
    pixels = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path)


def manifest_line(sample_id, image_path, label, method, split="Test"):
    return f"{sample_id},{image_path},{label},{method},,,0,0,32,32,,{split}"


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """Four labeled images plus a primary-format manifest naming them."""
    root = tmp_path_factory.mktemp("toy_dataset")
    rows = [("s0", "bonafide", "none"), ("s1", "bonafide", "none"),
            ("m0", "attack", "opencv"), ("m1", "attack", "opencv")]
    lines = ["# toy bridge corpus", MANIFEST_HEADER]
    for i, (sid, label, method) in enumerate(rows):
        rel = f"imgs/{sid}.png"
        write_image(root / rel, 100 + i)
        lines.append(manifest_line(sid, rel, label, method))
    (root / "manifest.csv").write_text("\n".join(lines) + "\n")
    return root
