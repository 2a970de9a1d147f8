"""Image loading, saving and the canonical tensor conventions.

All images are float32 torch tensors shaped C x H x W with values in
[-1, 1]. Color images carry 3 channels, sketches and gray content carry 1,
with +1 meaning white background and -1 the darkest line. 8-bit pixels map
through p -> 2p/255 - 1 and back via round-half-up.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image, UnidentifiedImageError

from .errors import (
    DecodeError,
    InvalidImage,
    InvalidTarget,
    MissingFile,
    WriteError,
    ZeroSizeImage,
)

# Luminance weights (ITU-R BT.601), applied directly in [-1, 1] space.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

MIN_SIZE = 16


def _check_range(data: torch.Tensor, what: str) -> None:
    if not torch.isfinite(data).all():
        raise InvalidImage(f"{what} contains non-finite values")
    if data.min() < -1.0 or data.max() > 1.0:
        raise InvalidImage(
            f"{what} values outside [-1, 1]: min={data.min():.4g} max={data.max():.4g}"
        )


@dataclass(frozen=True)
class ColorImage:
    """3 x H x W tensor in [-1, 1]."""

    data: torch.Tensor

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] != 3:
            raise InvalidImage(f"expected 3xHxW, got {tuple(self.data.shape)}")
        if self.data.shape[1] < MIN_SIZE or self.data.shape[2] < MIN_SIZE:
            raise InvalidImage(f"color image smaller than {MIN_SIZE}px: {tuple(self.data.shape)}")
        _check_range(self.data, "color image")

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class SketchImage:
    """1 x H x W tensor in [-1, 1]; +1 = white background, -1 = darkest line."""

    data: torch.Tensor

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] != 1:
            raise InvalidImage(f"expected 1xHxW, got {tuple(self.data.shape)}")
        _check_range(self.data, "sketch image")

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class GrayContent:
    """1 x H x W luminance tensor in [-1, 1], derived from a ColorImage."""

    data: torch.Tensor

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] != 1:
            raise InvalidImage(f"expected 1xHxW, got {tuple(self.data.shape)}")
        _check_range(self.data, "gray content")

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def load_image(path, mode: str = "color"):
    """Load an 8-bit PNG/JPEG as a ColorImage or SketchImage.

    Pixels map through p -> 2p/255 - 1. Sketch mode converts to a single
    luminance channel.
    """
    if mode not in ("color", "sketch"):
        raise ValueError(f"mode must be 'color' or 'sketch', got {mode!r}")
    if not os.path.exists(path):
        raise MissingFile(f"no such file: {path}")
    try:
        with Image.open(path) as img:
            img = img.convert("RGB")
            arr = np.asarray(img, dtype=np.float32)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    if arr.size == 0 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ZeroSizeImage(f"zero-sized image: {path}")
    tensor = torch.from_numpy(arr).permute(2, 0, 1) * (2.0 / 255.0) - 1.0
    if mode == "color":
        return ColorImage(tensor)
    luma = torch.tensor(LUMA_WEIGHTS, dtype=tensor.dtype).view(3, 1, 1)
    gray = (tensor * luma).sum(dim=0, keepdim=True).clamp(-1.0, 1.0)
    return SketchImage(gray)


def luminance(batch: torch.Tensor) -> torch.Tensor:
    """Batched luminance: (..., 3, H, W) -> (..., 1, H, W) in [-1, 1]."""
    if batch.shape[-3] != 3:
        raise InvalidImage(f"expected 3 channels, got {batch.shape[-3]}")
    luma = torch.tensor(LUMA_WEIGHTS, dtype=batch.dtype, device=batch.device).view(3, 1, 1)
    return (batch * luma).sum(dim=-3, keepdim=True).clamp(-1.0, 1.0)


def to_gray(color: ColorImage) -> GrayContent:
    """Collapse a ColorImage to single-channel luminance content."""
    return GrayContent(luminance(color.data))


def _resize_tensor(data: torch.Tensor, height: int, width: int) -> torch.Tensor:
    if data.shape[1] == height and data.shape[2] == width:
        return data.clone()
    out = F.interpolate(
        data.unsqueeze(0), size=(height, width), mode="bilinear", align_corners=False
    )
    return out.squeeze(0).clamp(-1.0, 1.0)


def resize(img, height: int, width: int):
    """Bilinear resize to height x width, output clamped to [-1, 1]."""
    if height < MIN_SIZE or width < MIN_SIZE:
        raise InvalidTarget(f"target {height}x{width} below minimum {MIN_SIZE}")
    return type(img)(_resize_tensor(img.data, height, width))


def to_bytes(data: torch.Tensor) -> np.ndarray:
    """Map [-1, 1] values to 8-bit, rounding half up."""
    scaled = (data.detach().cpu().numpy() + 1.0) * (255.0 / 2.0)
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def save_image(img, path) -> None:
    """Write an image as 8-bit PNG (grayscale for 1 channel, RGB for 3)."""
    arr = to_bytes(img.data)
    if arr.shape[0] == 1:
        pil = Image.fromarray(arr[0], mode="L")
    else:
        pil = Image.fromarray(arr.transpose(1, 2, 0), mode="RGB")
    try:
        pil.save(path)
    except (OSError, ValueError) as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc
