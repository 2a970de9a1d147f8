"""Frozen feature-extractor backends behind one small interface.

A FeatureExtractor owns a deterministic, non-trainable mapping from an image
batch to a list of feature maps (one per declared tap point). Concrete
backends: analytic stubs for tests and weight-free runs, TorchScript archives
for pretrained edge/metric models, and the torchvision VGG16 architecture
fed from a user-supplied state-dict file.
"""

from __future__ import annotations

from typing import Callable, Sequence

import torch
import torch.nn.functional as F

from .errors import ExtractorUnavailable


class FeatureExtractor:
    """Named, frozen image -> [feature map] mapping with declared tap points."""

    def __init__(self, name: str, layers: Sequence[str], fn: Callable, parameters=()):
        self.name = name
        self.layers = list(layers)
        self._fn = fn
        self._parameters = list(parameters)

    def apply(self, images: torch.Tensor) -> list[torch.Tensor]:
        out = self._fn(images)
        if torch.is_tensor(out):
            out = [out]
        return list(out)

    def parameters(self):
        return iter(self._parameters)

    def state_snapshot(self) -> list[torch.Tensor]:
        """Clone of all parameters, for frozen-weights audits."""
        return [p.detach().clone() for p in self._parameters]


def _freeze(module: torch.nn.Module) -> torch.nn.Module:
    module.eval()
    for p in module.parameters():
        p.requires_grad_(False)
    return module


def module_extractor(name: str, module: torch.nn.Module, layers: Sequence[str] = ("out",)):
    """Wrap a torch module (frozen, eval mode) as an extractor."""
    frozen = _freeze(module)
    return FeatureExtractor(name, layers, frozen, parameters=list(frozen.parameters()))


def identity_extractor(name: str = "identity") -> FeatureExtractor:
    """Single tap returning the image itself. Test stub."""
    return FeatureExtractor(name, ["image"], lambda images: [images])


def mean_pool_extractor(cell: int = 8, name: str = "meanpool") -> FeatureExtractor:
    """Average-pool the image over cell x cell blocks. Test/curation stub."""
    return FeatureExtractor(name, [f"avg{cell}"], lambda images: [F.avg_pool2d(images, cell)])


def grid_pool_extractor(grid: int = 4, name: str = "gridpool") -> FeatureExtractor:
    """Adaptive average-pool to a fixed grid: same feature length at any
    resolution. Stub backend for distribution metrics."""
    return FeatureExtractor(
        name, [f"grid{grid}"], lambda images: [F.adaptive_avg_pool2d(images, grid)]
    )


def sobel_edge_extractor(name: str = "sobel-edges") -> FeatureExtractor:
    """Analytic single-channel edge map (gradient magnitude of luminance).

    Weight-free stand-in for a learned edge detector; used whenever no edge
    model archive is configured.
    """
    kx = torch.tensor([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
    ky = kx.t()

    def fn(images: torch.Tensor) -> list[torch.Tensor]:
        if images.shape[1] == 3:
            luma = torch.tensor(
                [0.299, 0.587, 0.114], dtype=images.dtype, device=images.device
            ).view(1, 3, 1, 1)
            gray = (images * luma).sum(dim=1, keepdim=True)
        else:
            gray = images
        wx = kx.to(dtype=images.dtype, device=images.device).view(1, 1, 3, 3)
        wy = ky.to(dtype=images.dtype, device=images.device).view(1, 1, 3, 3)
        gx = F.conv2d(gray, wx, padding=1)
        gy = F.conv2d(gray, wy, padding=1)
        return [torch.sqrt(gx * gx + gy * gy + 1e-12)]

    return FeatureExtractor(name, ["edges"], fn)


def ink_stats_extractor(ink_threshold: float = 0.3, name: str = "ink-stats") -> FeatureExtractor:
    """Stroke statistics of a line drawing: value quantiles over ink pixels,
    core (interior) fraction and run density.

    Weight-free backbone for style clustering of sketch corpora; the features
    track darkness, stroke width and dashing rather than drawn content.
    """

    def per_image(x: torch.Tensor) -> torch.Tensor:
        ink = x < ink_threshold
        values = x[ink]
        if values.numel() == 0:
            return torch.zeros(6, dtype=x.dtype)
        quantiles = torch.quantile(values, torch.tensor([0.02, 0.10, 0.50], dtype=x.dtype))
        core = (
            ink[1:-1, 1:-1] & ink[2:, 1:-1] & ink[:-2, 1:-1]
            & ink[1:-1, 2:] & ink[1:-1, :-2]
        ).sum() / ink.sum()
        runs = ((~ink[:, :-1]) & ink[:, 1:]).sum() + ((~ink[:-1, :]) & ink[1:, :]).sum()
        return torch.cat([
            quantiles,
            torch.stack([values.mean(), core.to(x.dtype), (runs / ink.sum()).to(x.dtype)]),
        ])

    def fn(images: torch.Tensor) -> list[torch.Tensor]:
        feats = torch.stack([per_image(img[0]) for img in images])
        return [feats.unsqueeze(-1).unsqueeze(-1)]

    return FeatureExtractor(name, ["ink-stats"], fn)


def pyramid_extractor(levels: int = 3, name: str = "pyramid") -> FeatureExtractor:
    """Multi-scale average-pool taps. Weight-free stand-in for perceptual taps."""

    def fn(images: torch.Tensor) -> list[torch.Tensor]:
        feats, x = [], images
        for _ in range(levels):
            x = F.avg_pool2d(x, 2)
            feats.append(x)
        return feats

    return FeatureExtractor(name, [f"pool{i + 1}" for i in range(levels)], fn)


def torchscript_extractor(path, name: str | None = None, layers: Sequence[str] = ("out",)):
    """Load a TorchScript archive whose forward returns a tensor or tuple of
    tensors, and wrap it frozen."""
    try:
        module = torch.jit.load(str(path), map_location="cpu")
    except (RuntimeError, ValueError, OSError) as exc:
        raise ExtractorUnavailable(f"cannot load TorchScript archive {path}: {exc}") from exc
    return module_extractor(name or str(path), module, layers)


# Post-activation taps of the first four conv blocks (torchvision VGG16
# feature indices), the perceptual-loss convention.
VGG16_DEFAULT_TAPS = (3, 8, 15, 22)
# Final pooled conv grid: 7x7x512 at 224x224 input, flattened for clustering.
VGG16_CLUSTER_TAP = 30


def vgg16_extractor(weights_path=None, taps: Sequence[int] = VGG16_DEFAULT_TAPS,
                    name: str = "vgg16"):
    """torchvision VGG16 features with taps at the given layer indices.

    `weights_path` is a state-dict archive for the full torchvision VGG16
    (pass None for the architecture at random init, which is still a valid
    deterministic extractor for smoke runs).
    """
    try:
        from torchvision.models import vgg16
    except ImportError as exc:
        raise ExtractorUnavailable("torchvision is required for the VGG16 backbone") from exc

    model = vgg16(weights=None)
    if weights_path is not None:
        state = torch.load(str(weights_path), map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    features = _freeze(model.features)
    tap_set = sorted(taps)

    def fn(images: torch.Tensor) -> list[torch.Tensor]:
        if images.shape[1] == 1:
            images = images.repeat(1, 3, 1, 1)
        out, x = [], images
        for idx, layer in enumerate(features):
            x = layer(x)
            if idx in tap_set:
                out.append(x)
                if idx == tap_set[-1]:
                    break
        return out

    return FeatureExtractor(
        name, [f"features.{i}" for i in tap_set], fn, parameters=list(features.parameters())
    )
