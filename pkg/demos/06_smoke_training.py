"""A miniature end-to-end training run plus extraction.

Four color images and four reference sketches at 64x64, a narrow model, and
a couple hundred steps: enough to watch the cycle-reconstruction loss fall
and then extract a sketch with the trained checkpoint. Expect a few minutes
on CPU. Production settings (512x512, base width 64, 100 epochs, batch 4)
live in TrainConfig's defaults.
"""

import os
import sys

import torch

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))
from helpers import synthetic_color_image  # reuse the procedural color images

from refsketch.imaging import save_image
from refsketch.networks import StyleEncoder
from refsketch.synthetic import DEFAULT_STYLES, render_sketch
from refsketch.training import TrainConfig, extract, train

OUT = os.path.join(os.path.dirname(__file__), "output", "06_smoke_training")
STEPS = int(os.environ.get("SMOKE_STEPS", "120"))

color_dir = os.path.join(OUT, "color")
sketch_dir = os.path.join(OUT, "sketch")
os.makedirs(color_dir, exist_ok=True)
os.makedirs(sketch_dir, exist_ok=True)
for i in range(4):
    save_image(synthetic_color_image(i, 64), os.path.join(color_dir, f"{i}.png"))
    save_image(render_sketch(50 + i, DEFAULT_STYLES[i], 64),
               os.path.join(sketch_dir, f"{i}.png"))

config = TrainConfig(
    epochs=STEPS, batch=4, resolution=64, base_channels=8, seed=3,
    checkpoint_every=STEPS, out_dir=os.path.join(OUT, "run"),
)
torch.manual_seed(7)
style_encoder = StyleEncoder(base_channels=8)  # frozen at random init for the demo

def progress(message):
    # "epoch k/N lr ... total_g ..." once every 20 epochs
    epoch = int(message.split("/")[0].split()[-1])
    if epoch == 1 or epoch % 20 == 0:
        print(message)

result = train(config, color_dir, sketch_dir, style_encoder=style_encoder, log=progress)

cyc = [entry.cyc for entry in result.history]
print(f"\ncycle loss: first 20 steps {sum(cyc[:20]) / 20:.4f} -> "
      f"last 20 steps {sum(cyc[-20:]) / 20:.4f}")
print(f"checkpoint: {result.checkpoint_path}")

out_path = os.path.join(OUT, "extracted.png")
extract(result.checkpoint_path, os.path.join(color_dir, "0.png"),
        os.path.join(sketch_dir, "1.png"), out_path)
print(f"extracted sketch -> {out_path}")
