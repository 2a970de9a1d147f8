"""The four training losses and the epoch-dependent weight schedule.

Generator total = lambda_style * style + lambda_line * line
                + lambda_cyc * cycle + lambda_adv * adversarial,
with lambda_style = lambda_line ramping linearly from 5 down to 0.5 over the
run, lambda_cyc fixed at 10 and lambda_adv fixed at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import (
    EncoderNotFrozen,
    ExtractorShapeMismatch,
    NonFiniteTerm,
    OutOfRangeEpoch,
    ShapeMismatch,
)
from .extractors import FeatureExtractor
from .networks import StyleEncoder

# Weight-schedule constants: style/line ramp start and total decay, fixed
# cycle and adversarial weights.
LAMBDA_STYLE_LINE_START = 5.0
LAMBDA_STYLE_LINE_DECAY = 4.5
LAMBDA_CYC = 10.0
LAMBDA_ADV = 1.0


@dataclass(frozen=True)
class LossWeights:
    """Per-term weights; cyc and adv are constant, style always equals line."""

    style: float
    line: float
    cyc: float = LAMBDA_CYC
    adv: float = LAMBDA_ADV

    def __post_init__(self):
        if self.cyc != LAMBDA_CYC or self.adv != LAMBDA_ADV:
            raise ValueError(f"cyc/adv weights are fixed at {LAMBDA_CYC}/{LAMBDA_ADV}")
        if self.style != self.line:
            raise ValueError("style and line weights must be equal")
        if not 0.5 <= self.style <= 5.0:
            raise ValueError(f"style/line weight {self.style} outside [0.5, 5]")


@dataclass(frozen=True)
class LossBreakdown:
    style: float
    line: float
    cyc: float
    adv_g: float
    adv_d: float
    total_g: float


def loss_weights(epoch: int, total_epochs: int) -> LossWeights:
    """Weights for the given epoch: style/line ramp 5 -> 0.5, cyc 10, adv 1."""
    if total_epochs < 1:
        raise OutOfRangeEpoch(f"total_epochs must be >= 1, got {total_epochs}")
    if not 0 <= epoch <= total_epochs:
        raise OutOfRangeEpoch(f"epoch {epoch} outside [0, {total_epochs}]")
    ramp = LAMBDA_STYLE_LINE_START - LAMBDA_STYLE_LINE_DECAY * epoch / total_epochs
    return LossWeights(style=ramp, line=ramp)


def _check_frozen(encoder: StyleEncoder) -> None:
    if encoder.training:
        raise EncoderNotFrozen("style encoder must be in eval mode")
    if any(p.requires_grad for p in encoder.parameters()):
        raise EncoderNotFrozen("style encoder parameters must not require grad")


def style_loss(output: torch.Tensor, reference: torch.Tensor, encoder: StyleEncoder) -> torch.Tensor:
    """Mean absolute difference of the two 128-d style embeddings.

    Gradients flow into `output` only; the encoder must be frozen.
    """
    _check_frozen(encoder)
    e_out = encoder(output)
    with torch.no_grad():
        e_ref = encoder(reference)
    return (e_out - e_ref).abs().mean()


def _as_three_channel(edge: torch.Tensor) -> torch.Tensor:
    if edge.shape[1] == 1:
        return edge.repeat(1, 3, 1, 1)
    return edge


def line_loss(color: torch.Tensor, reconstructed: torch.Tensor,
              hed: FeatureExtractor, vgg: FeatureExtractor) -> torch.Tensor:
    """Edge-map perceptual distance between the input and its reconstruction.

    Both images run through the edge extractor; the single-channel edge maps
    (replicated to 3 channels) are compared layer-wise through the perceptual
    backbone with per-layer L1 means.
    """
    if color.shape[-2:] != reconstructed.shape[-2:]:
        raise ShapeMismatch(f"{tuple(color.shape)} vs {tuple(reconstructed.shape)}")
    edges_in = _as_three_channel(hed.apply(color)[0])
    edges_out = _as_three_channel(hed.apply(reconstructed)[0])
    feats_in = vgg.apply(edges_in)
    feats_out = vgg.apply(edges_out)
    if len(feats_in) != len(feats_out):
        raise ExtractorShapeMismatch("perceptual backbone returned unequal tap counts")
    total = color.new_zeros(())
    for fa, fb in zip(feats_in, feats_out):
        if fa.shape != fb.shape:
            raise ExtractorShapeMismatch(f"tap shapes differ: {tuple(fa.shape)} vs {tuple(fb.shape)}")
        total = total + (fa - fb).abs().mean()
    return total


def cycle_loss(color: torch.Tensor, reconstructed: torch.Tensor) -> torch.Tensor:
    """Mean absolute pixel difference."""
    if color.shape != reconstructed.shape:
        raise ShapeMismatch(f"{tuple(color.shape)} vs {tuple(reconstructed.shape)}")
    return (color - reconstructed).abs().mean()


def adversarial_losses(d, real: torch.Tensor, fake: torch.Tensor,
                       saturating: bool = False) -> tuple[torch.Tensor, torch.Tensor]:
    """Patch-grid adversarial losses for discriminator and generator.

    d_loss = -mean log sigmoid(D(real)) - mean log(1 - sigmoid(D(fake)))
    with the fake detached; g_loss defaults to the non-saturating
    -mean log sigmoid(D(fake)), or the literal mean log(1 - sigmoid(D(fake)))
    when `saturating` is set.
    """
    real_logits = d(real)
    fake_logits_detached = d(fake.detach())
    d_loss = F.softplus(-real_logits).mean() + F.softplus(fake_logits_detached).mean()
    fake_logits = d(fake)
    if saturating:
        g_loss = -F.softplus(fake_logits).mean()
    else:
        g_loss = F.softplus(-fake_logits).mean()
    return d_loss, g_loss


def total_generator_loss(style: torch.Tensor, line: torch.Tensor, cyc: torch.Tensor,
                         adv_g: torch.Tensor, weights: LossWeights) -> torch.Tensor:
    """Weighted sum of the four generator terms."""
    for name, term in (("style", style), ("line", line), ("cyc", cyc), ("adv", adv_g)):
        value = term.item() if torch.is_tensor(term) else float(term)
        if not math.isfinite(value):
            raise NonFiniteTerm(f"{name} loss is {value}")
    return weights.style * style + weights.line * line + weights.cyc * cyc + weights.adv * adv_g
