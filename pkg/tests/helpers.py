"""Shared test oracles: finite-difference gradients and synthetic images."""

from __future__ import annotations

import numpy as np
import torch

from refsketch.imaging import ColorImage
from refsketch.synthetic import DEFAULT_STYLES, render_sketch


def finite_difference_grad(fn, x: torch.Tensor, eps: float = 1e-4) -> torch.Tensor:
    """Central finite differences of a scalar-valued fn, coordinate by coordinate."""
    grad = torch.zeros_like(x)
    flat = x.flatten()
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        hi = float(fn(x))
        flat[i] = orig - eps
        lo = float(fn(x))
        flat[i] = orig
        grad.flatten()[i] = (hi - lo) / (2.0 * eps)
    return grad


def max_relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    """Worst per-coordinate relative error, with exact-zero agreement allowed."""
    diff = (analytic - numeric).abs()
    scale = torch.maximum(analytic.abs(), numeric.abs()).clamp_min(1e-8)
    rel = diff / scale
    rel[diff < 1e-10] = 0.0
    return float(rel.max())


def assert_grad_matches(fn, x: torch.Tensor, tol: float = 1e-3, eps: float = 1e-4) -> None:
    """fn must be scalar-valued and differentiable at float64 x."""
    assert x.dtype == torch.float64
    probe = x.clone().requires_grad_(True)
    fn(probe).backward()
    analytic = probe.grad.detach()
    numeric = finite_difference_grad(lambda t: fn(t).detach(), x.clone())
    err = max_relative_error(analytic, numeric)
    assert err < tol, f"gradient mismatch: max relative error {err:.3e}"


def synthetic_color_image(shape_id: int, resolution: int = 64, seed: int = 0) -> ColorImage:
    """Smooth per-shape color gradients darkened by the shape's strokes."""
    sketch = render_sketch(shape_id, DEFAULT_STYLES[0], resolution, seed=seed).data
    axis = torch.linspace(-0.9, 0.9, resolution)
    ys, xs = torch.meshgrid(axis, axis, indexing="ij")
    rng = np.random.default_rng([seed, shape_id, 7])
    scale = torch.tensor(rng.uniform(0.3, 1.0, size=3), dtype=torch.float32)
    base = torch.stack([xs * scale[0], ys * scale[1], (xs + ys) / 2 * scale[2]])
    return ColorImage(torch.minimum(base, sketch.expand(3, -1, -1)).clamp(-1.0, 1.0))
