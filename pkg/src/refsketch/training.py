"""Adversarial training loop: alternating discriminator/generator updates,
epoch-indexed weight and learning-rate schedules, checkpointing, resumption
and single-image extraction.

Each step runs the full pipeline: gray content + reference -> sketch ->
color reconstruction, a discriminator update on (real reference, detached
output), then a generator update on the weighted four-term objective.
"""

from __future__ import annotations

import csv
import math
import os
import random
from dataclasses import asdict, dataclass, field

import torch

from .curation import load_image_batch, unpaired_batches
from .errors import (
    CheckpointVersionMismatch,
    ConfigError,
    NonFiniteLoss,
    OutOfRangeEpoch,
)
from .extractors import (
    FeatureExtractor,
    pyramid_extractor,
    sobel_edge_extractor,
    torchscript_extractor,
    vgg16_extractor,
)
from .imaging import GrayContent, SketchImage, load_image, luminance, resize, save_image
from .losses import (
    LossBreakdown,
    LossWeights,
    adversarial_losses,
    cycle_loss,
    line_loss,
    loss_weights,
    style_loss,
    total_generator_loss,
)
from .networks import ColorGenerator, PatchDiscriminator, SketchGenerator, StyleEncoder

BASE_LR = 2e-4
ADAM_BETAS = (0.5, 0.999)
CHECKPOINT_FORMAT_VERSION = 1


def lr_schedule(epoch: int, total: int = 100, base: float = BASE_LR) -> float:
    """Constant `base` for the first half of the run, then linear decay to 0."""
    if not 0 <= epoch <= total:
        raise OutOfRangeEpoch(f"epoch {epoch} outside [0, {total}]")
    half = total / 2
    if epoch < half:
        return base
    return base * (1.0 - (epoch - half) / half)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch: int = 4
    lr: float = BASE_LR
    beta1: float = ADAM_BETAS[0]
    beta2: float = ADAM_BETAS[1]
    resolution: int = 512
    base_channels: int = 64
    seed: int = 0
    checkpoint_every: int = 1
    no_attention: bool = False
    no_style: bool = False
    no_line: bool = False
    no_cyc: bool = False
    saturating: bool = False
    clip_norm: float | None = None
    hed_weights: str | None = None
    vgg_weights: str | None = None
    out_dir: str = "runs"

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch < 1:
            raise ConfigError(f"batch must be >= 1, got {self.batch}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.resolution % 16 != 0:
            raise ConfigError(f"resolution must be a multiple of 16, got {self.resolution}")
        if self.checkpoint_every < 1:
            raise ConfigError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")


@dataclass
class Models:
    """Everything the training step touches; extractors and C_w stay frozen."""

    g_s: SketchGenerator
    g_c: ColorGenerator
    d: PatchDiscriminator
    style_encoder: StyleEncoder | None
    hed: FeatureExtractor
    vgg: FeatureExtractor


def build_models(config: TrainConfig, style_encoder: StyleEncoder | None = None) -> Models:
    """Instantiate networks per config; edge/perceptual backbones fall back to
    weight-free analytic extractors when no archives are configured."""
    torch.manual_seed(config.seed)
    g_s = SketchGenerator(config.base_channels, use_attention=not config.no_attention)
    g_c = ColorGenerator(config.base_channels)
    d = PatchDiscriminator(base_channels=config.base_channels)
    if style_encoder is None and not config.no_style:
        style_encoder = StyleEncoder(base_channels=config.base_channels)
    if style_encoder is not None:
        style_encoder.eval()
        for p in style_encoder.parameters():
            p.requires_grad_(False)
    hed = (
        torchscript_extractor(config.hed_weights, name="hed")
        if config.hed_weights
        else sobel_edge_extractor()
    )
    vgg = (
        vgg16_extractor(config.vgg_weights)
        if config.vgg_weights
        else pyramid_extractor()
    )
    return Models(g_s=g_s, g_c=g_c, d=d, style_encoder=style_encoder, hed=hed, vgg=vgg)


def build_optimizers(models: Models, config: TrainConfig):
    params_g = list(models.g_s.parameters()) + list(models.g_c.parameters())
    opt_g = torch.optim.Adam(params_g, lr=config.lr, betas=(config.beta1, config.beta2))
    opt_d = torch.optim.Adam(models.d.parameters(), lr=config.lr,
                             betas=(config.beta1, config.beta2))
    return opt_g, opt_d


def train_step(models: Models, opt_g, opt_d, colors: torch.Tensor,
               references: torch.Tensor, weights: LossWeights,
               config: TrainConfig) -> LossBreakdown:
    """One discriminator update then one generator update on a batch.

    `colors` is (B, 3, H, W), `references` (B, 1, H, W), both in [-1, 1].
    """
    gray = luminance(colors)
    output = models.g_s(gray, references)
    reconstructed = models.g_c(output)

    d_loss, _ = adversarial_losses(models.d, references, output, config.saturating)
    if not math.isfinite(d_loss.item()):
        raise NonFiniteLoss(f"discriminator loss is {d_loss.item()}")
    opt_d.zero_grad()
    d_loss.backward()
    opt_d.step()

    # Generator trains against the just-updated discriminator.
    _, g_adv = adversarial_losses(models.d, references, output, config.saturating)
    zero = output.new_zeros(())
    sty = zero if config.no_style else style_loss(output, references, models.style_encoder)
    lin = zero if config.no_line else line_loss(colors, reconstructed, models.hed, models.vgg)
    cyc = zero if config.no_cyc else cycle_loss(colors, reconstructed)
    total = total_generator_loss(sty, lin, cyc, g_adv, weights)
    if not math.isfinite(total.item()):
        raise NonFiniteLoss(f"generator loss is {total.item()}")
    opt_g.zero_grad()
    total.backward()
    if config.clip_norm is not None:
        torch.nn.utils.clip_grad_norm_(
            [p for group in opt_g.param_groups for p in group["params"]], config.clip_norm
        )
    opt_g.step()

    return LossBreakdown(
        style=sty.item(), line=lin.item(), cyc=cyc.item(),
        adv_g=g_adv.item(), adv_d=d_loss.item(), total_g=total.item(),
    )


def save_checkpoint(path, models: Models, opt_g, opt_d, epoch: int,
                    config: TrainConfig) -> None:
    torch.save(
        {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "epoch": epoch,
            "g_s": models.g_s.state_dict(),
            "g_c": models.g_c.state_dict(),
            "d": models.d.state_dict(),
            "opt_g": opt_g.state_dict(),
            "opt_d": opt_d.state_dict(),
            "torch_rng": torch.get_rng_state(),
            "python_rng": random.getstate(),
            "config": asdict(config),
        },
        path,
    )


def load_checkpoint(path) -> dict:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointVersionMismatch(
            f"checkpoint format {version!r}, expected {CHECKPOINT_FORMAT_VERSION}"
        )
    return payload


def restore_models(payload: dict, style_encoder: StyleEncoder | None = None
                   ) -> tuple[Models, TrainConfig]:
    config = TrainConfig(**payload["config"])
    models = build_models(config, style_encoder)
    models.g_s.load_state_dict(payload["g_s"])
    models.g_c.load_state_dict(payload["g_c"])
    models.d.load_state_dict(payload["d"])
    return models, config


@dataclass
class TrainResult:
    checkpoint_path: str
    log_path: str
    history: list[LossBreakdown] = field(default_factory=list)


def train(config: TrainConfig, color_dir, sketch_dir,
          style_encoder: StyleEncoder | None = None, models: Models | None = None,
          resume=None, log=None) -> TrainResult:
    """Full training run; checkpoints every epoch, CSV-logs every step.

    `resume` takes an epoch checkpoint path and continues from the following
    epoch with optimizer moments and RNG streams restored. Prebuilt `models`
    (e.g. with custom extractor backends) are used as-is.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    torch.manual_seed(config.seed)
    random.seed(config.seed)

    start_epoch = 0
    if resume is not None:
        payload = load_checkpoint(resume)
        models, config = restore_models(payload, style_encoder)
        opt_g, opt_d = build_optimizers(models, config)
        opt_g.load_state_dict(payload["opt_g"])
        opt_d.load_state_dict(payload["opt_d"])
        torch.set_rng_state(payload["torch_rng"])
        random.setstate(payload["python_rng"])
        start_epoch = payload["epoch"] + 1
    else:
        if models is None:
            models = build_models(config, style_encoder)
        opt_g, opt_d = build_optimizers(models, config)

    models.g_s.train()
    models.g_c.train()
    models.d.train()

    log_path = os.path.join(config.out_dir, "loss_log.csv")
    mode = "a" if resume is not None and os.path.exists(log_path) else "w"
    history: list[LossBreakdown] = []
    ckpt_path = ""
    with open(log_path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(
                ["epoch", "step", "lr", "lambda_style", "style", "line", "cyc",
                 "adv_g", "adv_d", "total_g"]
            )
        for epoch in range(start_epoch, config.epochs):
            weights = loss_weights(epoch, config.epochs)
            lr = lr_schedule(epoch, config.epochs, config.lr)
            for opt in (opt_g, opt_d):
                for group in opt.param_groups:
                    group["lr"] = lr
            for step, (color_paths, ref_paths) in enumerate(
                unpaired_batches(color_dir, sketch_dir, config.batch,
                                 seed=config.seed + epoch)
            ):
                colors = load_image_batch(color_paths, "color", config.resolution)
                refs = load_image_batch(ref_paths, "sketch", config.resolution)
                breakdown = train_step(models, opt_g, opt_d, colors, refs, weights, config)
                history.append(breakdown)
                writer.writerow(
                    [epoch, step, f"{lr:.8g}", f"{weights.style:.8g}",
                     breakdown.style, breakdown.line, breakdown.cyc,
                     breakdown.adv_g, breakdown.adv_d, breakdown.total_g]
                )
            if (epoch + 1) % config.checkpoint_every == 0 or epoch == config.epochs - 1:
                ckpt_path = os.path.join(config.out_dir, f"epoch_{epoch}.ckpt")
                save_checkpoint(ckpt_path, models, opt_g, opt_d, epoch, config)
            if log is not None:
                log(
                    f"epoch {epoch + 1}/{config.epochs} lr {lr:.6g} "
                    f"lambda {weights.style:.3f} total_g {history[-1].total_g:.4f}"
                )
    return TrainResult(checkpoint_path=ckpt_path, log_path=log_path, history=history)


def extract(checkpoint_path, content_path, reference_path, out_path) -> SketchImage:
    """Produce a sketch of `content` in the style of `reference` and save it.

    A single-channel content file (already a sketch) skips the luminance
    conversion, which makes this the style-transfer entry point as well.
    """
    payload = load_checkpoint(checkpoint_path)
    models, config = restore_models(payload)
    models.g_s.eval()

    from PIL import Image

    with Image.open(content_path) as probe:
        single_channel = probe.mode in ("1", "L", "LA", "I", "I;16")
    content = load_image(content_path, mode="sketch" if single_channel else "color")
    if not single_channel:
        content = GrayContent(luminance(content.data))
    content = resize(content, config.resolution, config.resolution)
    reference = resize(
        load_image(reference_path, mode="sketch"), config.resolution, config.resolution
    )
    with torch.no_grad():
        out = models.g_s(content.data.unsqueeze(0), reference.data.unsqueeze(0))
    sketch = SketchImage(out.squeeze(0))
    save_image(sketch, out_path)
    return sketch
