"""Generator, discriminator and style-encoder architectures.

The sketch generator fuses a content branch (gray input) with a reference
branch (exemplar sketch) through attention-gated AdaIN, runs four residual
blocks and decodes to a 1-channel tanh output. The color generator maps the
sketch back to RGB for cycle supervision. The discriminator is a patch
classifier with a 70x70 receptive field. The style encoder embeds a sketch
into a 128-d style vector via adaptive pooling, so it accepts any input at
least 8x8.

All generator convolutions preserve H x W: paddings are (K-1)/2, with a
one-pixel-asymmetric zero pad for even kernels.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .attention import AttentionFusion, adain
from .errors import ResolutionMismatch, TooSmall
from .imaging import ColorImage, GrayContent, SketchImage

EMBED_DIM = 128


def init_weights(module: nn.Module, std: float = 0.02) -> None:
    """Zero-mean Gaussian init for convs/linears, (1, 0.02) for norm layers."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (nn.BatchNorm2d, nn.InstanceNorm2d)):
            if m.weight is not None:
                nn.init.normal_(m.weight, 1.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def same_conv(in_ch: int, out_ch: int, kernel: int, norm: bool = True, act: bool = True):
    """Conv + batch norm + rectifier preserving spatial size at stride 1."""
    layers: list[nn.Module] = []
    if kernel % 2 == 0:
        half = kernel // 2
        layers.append(nn.ZeroPad2d((half - 1, half, half - 1, half)))
        layers.append(nn.Conv2d(in_ch, out_ch, kernel))
    else:
        layers.append(nn.Conv2d(in_ch, out_ch, kernel, padding=(kernel - 1) // 2))
    if norm:
        layers.append(nn.BatchNorm2d(out_ch))
    if act:
        layers.append(nn.ReLU(inplace=True))
    return nn.Sequential(*layers)


def _encoder(in_ch: int, base: int) -> nn.Sequential:
    return nn.Sequential(
        same_conv(in_ch, base, 7),
        same_conv(base, base * 2, 3),
        same_conv(base * 2, base * 4, 3),
        same_conv(base * 4, base * 8, 3),
    )


def _decoder(base: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        same_conv(base * 8, base * 4, 4),
        same_conv(base * 4, base * 2, 7),
        same_conv(base * 2, base, 7),
        same_conv(base, out_ch, 7, norm=False, act=False),
        nn.Tanh(),
    )


class SketchGenerator(nn.Module):
    """Reference-styled sketch generator.

    Two mirrored encoders lift the gray content and the reference sketch to
    `base * 8` channels. The attention-fused features feed every residual
    block alongside the running features (concatenated to a 2x-wide input);
    the plain AdaIN of the two encodings seeds the first block. With
    `use_attention=False` the fusion path is removed entirely and blocks run
    at single width, which is the attention-ablated configuration.
    """

    def __init__(self, base_channels: int = 64, reduction: int = 16, use_attention: bool = True):
        super().__init__()
        base = base_channels
        wide = base * 8
        self.use_attention = use_attention
        self.content_encoder = _encoder(1, base)
        self.reference_encoder = _encoder(1, base)
        self.fusion = AttentionFusion(wide, reduction) if use_attention else None
        block_in = wide * 2 if use_attention else wide
        self.resblocks = nn.ModuleList(same_conv(block_in, wide, 3) for _ in range(4))
        self.decoder = _decoder(base, 1)
        init_weights(self)

    def forward(self, content: torch.Tensor, reference: torch.Tensor) -> torch.Tensor:
        if content.shape[-2:] != reference.shape[-2:]:
            raise ResolutionMismatch(
                f"content {tuple(content.shape[-2:])} vs reference {tuple(reference.shape[-2:])}"
            )
        f_content = self.content_encoder(content)
        f_reference = self.reference_encoder(reference)
        x = adain(f_content, f_reference)
        if self.use_attention:
            fused = self.fusion(f_content, f_reference)
            for block in self.resblocks:
                x = block(torch.cat([x, fused], dim=1)) + x
        else:
            for block in self.resblocks:
                x = block(x) + x
        return self.decoder(x)


class ColorGenerator(nn.Module):
    """Sketch-to-color reconstruction generator (encoder, 4 resblocks, decoder)."""

    def __init__(self, base_channels: int = 64):
        super().__init__()
        base = base_channels
        wide = base * 8
        self.encoder = _encoder(1, base)
        self.resblocks = nn.ModuleList(same_conv(wide, wide, 3) for _ in range(4))
        self.decoder = _decoder(base, 3)
        init_weights(self)

    def forward(self, sketch: torch.Tensor) -> torch.Tensor:
        x = self.encoder(sketch)
        for block in self.resblocks:
            x = block(x) + x
        return self.decoder(x)


class PatchDiscriminator(nn.Module):
    """Patch classifier: C64-C128-C256-C512 + 1-channel head, 70x70 field."""

    def __init__(self, in_channels: int = 1, base_channels: int = 64):
        super().__init__()
        base = base_channels
        self.model = nn.Sequential(
            nn.Conv2d(in_channels, base, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base, base * 2, 4, stride=2, padding=1),
            nn.InstanceNorm2d(base * 2),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base * 2, base * 4, 4, stride=2, padding=1),
            nn.InstanceNorm2d(base * 4),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base * 4, base * 8, 4, stride=1, padding=1),
            nn.InstanceNorm2d(base * 8),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base * 8, 1, 4, stride=1, padding=1),
        )
        init_weights(self)

    def forward(self, sketch: torch.Tensor) -> torch.Tensor:
        return self.model(sketch)

    def receptive_field(self) -> int:
        """Receptive field of one output logit, from the actual conv stack."""
        field, jump = 1, 1
        for m in self.model:
            if isinstance(m, nn.Conv2d):
                field += (m.kernel_size[0] - 1) * jump
                jump *= m.stride[0]
        return field


class StyleEncoder(nn.Module):
    """Embeds a 1-channel sketch into a 128-d style vector.

    Three conv stages (the latter two stride-2), adaptive average pooling to
    1x1 and a linear head, so the embedding length is resolution-independent.
    """

    def __init__(self, base_channels: int = 64):
        super().__init__()
        base = base_channels
        self.features = nn.Sequential(
            nn.Conv2d(1, base, 7, stride=1, padding=3),
            nn.BatchNorm2d(base),
            nn.ReLU(inplace=True),
            nn.Conv2d(base, base * 2, 4, stride=2, padding=1),
            nn.BatchNorm2d(base * 2),
            nn.ReLU(inplace=True),
            nn.Conv2d(base * 2, base * 4, 4, stride=2, padding=1),
            nn.BatchNorm2d(base * 4),
            nn.ReLU(inplace=True),
        )
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(base * 4, EMBED_DIM)
        init_weights(self)

    def forward(self, sketch: torch.Tensor) -> torch.Tensor:
        if sketch.shape[-2] < 8 or sketch.shape[-1] < 8:
            raise TooSmall(f"style encoder needs >= 8x8 input, got {tuple(sketch.shape[-2:])}")
        squeeze = sketch.ndim == 3
        if squeeze:
            sketch = sketch.unsqueeze(0)
        x = self.pool(self.features(sketch)).flatten(1)
        emb = self.head(x)
        return emb.squeeze(0) if squeeze else emb


def conv_plan(module: nn.Module) -> list[tuple[int, int, int, int]]:
    """(in_ch, out_ch, kernel, stride) of every conv, in registration order."""
    return [
        (m.in_channels, m.out_channels, m.kernel_size[0], m.stride[0])
        for m in module.modules()
        if isinstance(m, nn.Conv2d)
    ]


# --- typed single-image entry points ----------------------------------------


class _inference:
    """Temporarily put a module in eval mode (no grad, no BN stat updates)."""

    def __init__(self, module: nn.Module):
        self.module = module

    def __enter__(self):
        self.was_training = self.module.training
        self.module.eval()
        self.no_grad = torch.no_grad()
        self.no_grad.__enter__()

    def __exit__(self, *exc):
        self.no_grad.__exit__(*exc)
        self.module.train(self.was_training)
        return False


def generate_sketch(g: SketchGenerator, content: GrayContent, reference: SketchImage) -> SketchImage:
    """Run the sketch generator on one content/reference pair."""
    if (content.height, content.width) != (reference.height, reference.width):
        raise ResolutionMismatch(
            f"content {content.height}x{content.width} vs "
            f"reference {reference.height}x{reference.width}"
        )
    with _inference(g):
        out = g(content.data.unsqueeze(0), reference.data.unsqueeze(0))
    return SketchImage(out.squeeze(0))


def reconstruct_color(g: ColorGenerator, sketch: SketchImage) -> ColorImage:
    """Reconstruct an RGB image from a sketch."""
    with _inference(g):
        out = g(sketch.data.unsqueeze(0))
    return ColorImage(out.squeeze(0))


def discriminate(d: PatchDiscriminator, sketch: SketchImage) -> torch.Tensor:
    """Real/fake logit grid for one sketch."""
    with _inference(d):
        return d(sketch.data.unsqueeze(0)).squeeze(0).squeeze(0)


def embed_style(f: StyleEncoder, sketch: SketchImage) -> torch.Tensor:
    """128-d style embedding of one sketch."""
    with _inference(f):
        return f(sketch.data)
