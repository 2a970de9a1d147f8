"""Tensor conventions: loading, value mapping, luminance and resizing.

Every image in the library is a float32 C x H x W tensor in [-1, 1]; +1 is
the white background of a sketch, -1 the darkest line. This script walks the
8-bit mapping and the basic operations on a procedurally rendered sketch.
"""

import os

import torch

from refsketch.imaging import ColorImage, load_image, resize, save_image, to_gray
from refsketch.synthetic import DEFAULT_STYLES, render_sketch

OUT = os.path.join(os.path.dirname(__file__), "output", "01_image_conventions")
os.makedirs(OUT, exist_ok=True)

# Render a sketch and push it through a save/load round trip.
sketch = render_sketch(shape_id=3, style=DEFAULT_STYLES[0], resolution=128)
path = os.path.join(OUT, "sketch.png")
save_image(sketch, path)
reloaded = load_image(path, mode="sketch")
print(f"round-trip max deviation: {float((reloaded.data - sketch.data).abs().max()):.6f}"
      f" (quantization bound is {2 / 255:.6f})")

# 8-bit pixels map through p -> 2p/255 - 1:
print(f"byte 0 -> {2 * 0 / 255 - 1:+.4f}, byte 128 -> {2 * 128 / 255 - 1:+.6f}, "
      f"byte 255 -> {2 * 255 / 255 - 1:+.4f}")

# A color image collapses to single-channel luminance content before it
# enters the sketch generator.
color = ColorImage(torch.stack([
    torch.linspace(-1, 1, 128).expand(128, 128),
    torch.linspace(1, -1, 128).expand(128, 128).t(),
    torch.zeros(128, 128),
]))
gray = to_gray(color)
save_image(color, os.path.join(OUT, "color.png"))
save_image(gray, os.path.join(OUT, "gray.png"))
print(f"color {tuple(color.data.shape)} -> gray {tuple(gray.data.shape)}")

# Bilinear resizing clamps back into [-1, 1] and preserves constants.
small = resize(sketch, 64, 64)
save_image(small, os.path.join(OUT, "sketch_64.png"))
print(f"resized to {tuple(small.data.shape)}, range "
      f"[{float(small.data.min()):+.3f}, {float(small.data.max()):+.3f}]")
print(f"outputs in {OUT}")
