"""Spatial attention, channel attention and adaptive instance normalization.

These are the style/shape fusion primitives: a spatial gate computed from
pooled content features, a channel gate computed from pooled reference
features, and AdaIN which re-scales content statistics to match the
reference. Feature maps are (B, C, H, W) tensors; (C, H, W) is accepted and
treated as a batch of one.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .errors import ChannelMismatch, ReductionMismatch

ADAIN_EPS = 1e-5


def _batched(fm: torch.Tensor):
    if fm.ndim == 3:
        return fm.unsqueeze(0), True
    if fm.ndim == 4:
        return fm, False
    raise ChannelMismatch(f"expected 3- or 4-dim feature map, got {fm.ndim} dims")


class SpatialAttention(nn.Module):
    """Per-position gate in (0, 1): pool channels, 3x3 conv, sigmoid."""

    def __init__(self, kernel_size: int = 3):
        super().__init__()
        self.conv = nn.Conv2d(2, 1, kernel_size, padding=(kernel_size - 1) // 2)

    def forward(self, fm: torch.Tensor) -> torch.Tensor:
        fm, squeeze = _batched(fm)
        avg = fm.mean(dim=1, keepdim=True)
        mx = fm.max(dim=1, keepdim=True).values
        gate = torch.sigmoid(self.conv(torch.cat([avg, mx], dim=1)))
        return gate.squeeze(0) if squeeze else gate


class ChannelAttention(nn.Module):
    """Per-channel gate in (0, 1): global pools, shared two-layer MLP, sigmoid.

    The MLP squeezes C -> C/reduction -> C; `activation` is the hidden
    nonlinearity (rectifier by default, injectable for exact-value tests).
    """

    def __init__(self, channels: int, reduction: int = 16, activation: nn.Module | None = None):
        super().__init__()
        if channels % reduction != 0:
            raise ReductionMismatch(
                f"channels {channels} not divisible by reduction ratio {reduction}"
            )
        self.channels = channels
        self.mlp = nn.Sequential(
            nn.Conv2d(channels, channels // reduction, 1),
            activation if activation is not None else nn.ReLU(),
            nn.Conv2d(channels // reduction, channels, 1),
        )

    def forward(self, fm: torch.Tensor) -> torch.Tensor:
        fm, squeeze = _batched(fm)
        if fm.shape[1] != self.channels:
            raise ChannelMismatch(f"expected {self.channels} channels, got {fm.shape[1]}")
        avg = fm.mean(dim=(2, 3), keepdim=True)
        mx = fm.amax(dim=(2, 3), keepdim=True)
        gate = torch.sigmoid(self.mlp(avg) + self.mlp(mx))
        return gate.squeeze(0) if squeeze else gate


def adain(content: torch.Tensor, style: torch.Tensor, eps: float = ADAIN_EPS) -> torch.Tensor:
    """Align per-channel mean/std of `content` to those of `style`.

    Uses population statistics over spatial positions; spatial sizes of the
    two maps may differ, channel counts must match. The epsilon in the
    denominator keeps constant (zero-variance) channels finite.
    """
    content, squeeze = _batched(content)
    style, _ = _batched(style)
    if content.shape[1] != style.shape[1]:
        raise ChannelMismatch(
            f"content has {content.shape[1]} channels, style has {style.shape[1]}"
        )
    c_mean = content.mean(dim=(2, 3), keepdim=True)
    c_std = content.var(dim=(2, 3), unbiased=False, keepdim=True).sqrt()
    s_mean = style.mean(dim=(2, 3), keepdim=True)
    s_std = style.var(dim=(2, 3), unbiased=False, keepdim=True).sqrt()
    out = s_std * (content - c_mean) / (c_std + eps) + s_mean
    return out.squeeze(0) if squeeze else out


class AttentionFusion(nn.Module):
    """Gate content spatially and style channel-wise, then AdaIN-fuse them.

    Style statistics are taken from the gated reference features. The gates
    broadcast: the spatial map across all channels, the channel map across
    all positions.
    """

    def __init__(self, channels: int, reduction: int = 16, spatial_kernel: int = 3):
        super().__init__()
        self.spatial = SpatialAttention(spatial_kernel)
        self.channel = ChannelAttention(channels, reduction)

    def forward(self, content_fm: torch.Tensor, style_fm: torch.Tensor) -> torch.Tensor:
        gated_content = content_fm * self.spatial(content_fm)
        gated_style = style_fm * self.channel(style_fm)
        return adain(gated_content, gated_style)
