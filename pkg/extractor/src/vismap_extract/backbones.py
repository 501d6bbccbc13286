"""CNN backbones with the classification head removed.

Every backbone maps a float32 image batch (N, H, W, 3) in [0, 1] to a
(N, dim) float32 embedding matrix: the penultimate-layer activations of the
underlying network. A single backbone instance has one fixed dim, so mixed
dimensionalities across batches cannot occur.

"tiny" is a small built-in convnet whose weights are initialized from a fixed
seed: fully deterministic, no downloaded weights, intended for tests and
offline pipelines. The torchvision entries load pretrained weights and
therefore need them present in the local cache.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)

_TINY_SEED = 1337

# name -> (embedding dim, default input size)
_TORCHVISION_BACKBONES = {
    "resnet18": (512, 224),
    "resnet50": (2048, 224),
    "vgg16": (4096, 224),
    "alexnet": (4096, 224),
}


class Backbone:
    """A headless network plus its preprocessing constants."""

    def __init__(self, name: str, model: nn.Module, dim: int, image_size: int, normalize):
        self.name = name
        self.dim = dim
        self.image_size = image_size
        self._normalize = normalize
        self._model = model.eval()
        for p in self._model.parameters():
            p.requires_grad_(False)

    def embed(self, batch: np.ndarray) -> np.ndarray:
        if batch.ndim != 4 or batch.shape[3] != 3:
            raise ValueError(f"expected (N, H, W, 3) image batch, got {batch.shape}")
        x = torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32))
        x = x.permute(0, 3, 1, 2)
        if self._normalize is not None:
            mean, std = self._normalize
            x = (x - torch.tensor(mean).view(1, 3, 1, 1)) / torch.tensor(std).view(1, 3, 1, 1)
        with torch.no_grad():
            out = self._model(x)
        return out.reshape(out.shape[0], -1).numpy().astype(np.float32)


def _tiny_model() -> nn.Module:
    torch.manual_seed(_TINY_SEED)
    return nn.Sequential(
        nn.Conv2d(3, 16, kernel_size=3, stride=2, padding=1),
        nn.ReLU(),
        nn.Conv2d(16, 32, kernel_size=3, stride=2, padding=1),
        nn.ReLU(),
        nn.Conv2d(32, 64, kernel_size=3, stride=2, padding=1),
        nn.ReLU(),
        nn.AdaptiveAvgPool2d(1),
        nn.Flatten(),
    )


def _torchvision_model(name: str) -> nn.Module:
    try:
        from torchvision import models
    except ImportError as exc:
        raise RuntimeError(
            f"backbone {name!r} needs torchvision (pip install vismap-extract[torchvision])"
        ) from exc
    try:
        model = models.get_model(name, weights="DEFAULT")
    except Exception as exc:
        raise RuntimeError(
            f"cannot load pretrained weights for {name!r} (no download cache?): {exc}"
        ) from exc
    if name.startswith("resnet"):
        return nn.Sequential(*list(model.children())[:-1])
    # vgg16 / alexnet: keep features + avgpool, drop the final classifier layer
    return nn.Sequential(
        model.features,
        model.avgpool,
        nn.Flatten(),
        nn.Sequential(*list(model.classifier.children())[:-1]),
    )


def available_backbones() -> tuple:
    return ("tiny",) + tuple(sorted(_TORCHVISION_BACKBONES))


def load_backbone(name: str, image_size: int | None = None) -> Backbone:
    if name == "tiny":
        return Backbone("tiny", _tiny_model(), 64, image_size or 64, normalize=None)
    if name in _TORCHVISION_BACKBONES:
        dim, default_size = _TORCHVISION_BACKBONES[name]
        return Backbone(
            name,
            _torchvision_model(name),
            dim,
            image_size or default_size,
            normalize=(_IMAGENET_MEAN, _IMAGENET_STD),
        )
    raise ValueError(f"unknown backbone {name!r}; available: {available_backbones()}")
