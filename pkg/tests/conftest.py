"""Session fixtures: synthetic datasets and the shared overfit smoke run."""

from __future__ import annotations

import os
import sys

import pytest
import torch

sys.path.insert(0, os.path.dirname(__file__))

from helpers import synthetic_color_image  # noqa: E402

from refsketch.imaging import save_image  # noqa: E402
from refsketch.networks import StyleEncoder  # noqa: E402
from refsketch.synthetic import DEFAULT_STYLES, render_sketch  # noqa: E402
from refsketch.training import TrainConfig, build_models, train  # noqa: E402

SMOKE_RESOLUTION = 64
SMOKE_STEPS = 300


@pytest.fixture(scope="session")
def eval_dataset_dir(tmp_path_factory):
    """4SKST-layout directory: 25 shapes, color/ plus style1..4/ at 64x64."""
    root = tmp_path_factory.mktemp("eval4skst")
    os.makedirs(root / "color")
    for s in range(1, 5):
        os.makedirs(root / f"style{s}")
    for i in range(25):
        save_image(synthetic_color_image(i), root / "color" / f"{i:02d}.png")
        for s, style in enumerate(DEFAULT_STYLES, start=1):
            save_image(render_sketch(i, style, SMOKE_RESOLUTION), root / f"style{s}" / f"{i:02d}.png")
    return root


@pytest.fixture(scope="session")
def smoke_train(tmp_path_factory):
    """Overfit run: 4 colors + 4 sketches, 64x64, 300 steps, all losses on.

    Returns the train result, the injected models (for frozen-weight audits)
    and the pre-training snapshot of the style-encoder parameters.
    """
    root = tmp_path_factory.mktemp("smoke")
    color_dir, sketch_dir = root / "color", root / "sketch"
    os.makedirs(color_dir)
    os.makedirs(sketch_dir)
    for i in range(4):
        save_image(synthetic_color_image(i, SMOKE_RESOLUTION), color_dir / f"{i}.png")
        save_image(render_sketch(50 + i, DEFAULT_STYLES[i], SMOKE_RESOLUTION),
                   sketch_dir / f"{i}.png")
    config = TrainConfig(
        epochs=SMOKE_STEPS, batch=4, resolution=SMOKE_RESOLUTION, base_channels=8,
        seed=3, checkpoint_every=SMOKE_STEPS, out_dir=str(root / "run"),
    )
    torch.manual_seed(11)
    style_encoder = StyleEncoder(base_channels=8)
    style_encoder.eval()
    for p in style_encoder.parameters():
        p.requires_grad_(False)
    encoder_snapshot = [p.detach().clone() for p in style_encoder.parameters()]
    models = build_models(config, style_encoder)
    result = train(config, color_dir, sketch_dir, style_encoder=style_encoder,
                   models=models)
    return {
        "result": result,
        "models": models,
        "config": config,
        "encoder_snapshot": encoder_snapshot,
        "color_dir": color_dir,
        "sketch_dir": sketch_dir,
    }
