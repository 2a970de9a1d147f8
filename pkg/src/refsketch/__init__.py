"""Reference-based sketch extraction.

A color image plus an exemplar sketch in, a sketch of the image's content in
the exemplar's drawing style out. Trained adversarially on unpaired
color/sketch corpora; the drawing style is supervised through a frozen,
contrastively pretrained style embedding.
"""

from .attention import AttentionFusion, ChannelAttention, SpatialAttention, adain
from .imaging import (
    ColorImage,
    GrayContent,
    SketchImage,
    load_image,
    resize,
    save_image,
    to_gray,
)
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
from .networks import (
    ColorGenerator,
    PatchDiscriminator,
    SketchGenerator,
    StyleEncoder,
    embed_style,
    generate_sketch,
    reconstruct_color,
)
from .style_pretrain import (
    PretrainConfig,
    StyleCorpus,
    Triplet,
    pretrain_style_encoder,
    sample_triplet,
    triplet_loss,
)
from .training import TrainConfig, extract, lr_schedule, train, train_step
from .evaluation import evaluate_extraction, cyclic_evaluate, fid, lpips, psnr

__version__ = "0.1.0"

__all__ = [
    "AttentionFusion",
    "ChannelAttention",
    "ColorGenerator",
    "ColorImage",
    "GrayContent",
    "LossBreakdown",
    "LossWeights",
    "PatchDiscriminator",
    "PretrainConfig",
    "SketchGenerator",
    "SketchImage",
    "SpatialAttention",
    "StyleCorpus",
    "StyleEncoder",
    "TrainConfig",
    "Triplet",
    "adain",
    "adversarial_losses",
    "cycle_loss",
    "cyclic_evaluate",
    "embed_style",
    "evaluate_extraction",
    "extract",
    "fid",
    "generate_sketch",
    "line_loss",
    "load_image",
    "loss_weights",
    "lpips",
    "lr_schedule",
    "pretrain_style_encoder",
    "psnr",
    "reconstruct_color",
    "resize",
    "sample_triplet",
    "save_image",
    "style_loss",
    "to_gray",
    "total_generator_loss",
    "train",
    "train_step",
    "triplet_loss",
]
