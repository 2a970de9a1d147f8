"""Procedural sketch corpus: random line drawings rendered in parametric styles.

Geometry depends only on the shape id, so the same drawing can be rendered
under every style; that factorization is exactly what the triplet sampler
needs (negatives share the shape, not the style). Styles vary stroke
thickness, stroke darkness and dashing.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
import torch

from .imaging import SketchImage, save_image


@dataclass(frozen=True)
class SketchStyle:
    name: str
    thickness: float
    darkness: float
    dashed: bool = False


DEFAULT_STYLES = (
    SketchStyle("thin-dark", thickness=1.0, darkness=-1.0),
    SketchStyle("thick-dark", thickness=3.0, darkness=-0.85),
    SketchStyle("thin-light", thickness=1.0, darkness=-0.35),
    SketchStyle("medium-dashed", thickness=1.8, darkness=-0.65, dashed=True),
)


def _ellipse_points(cx, cy, rx, ry, n=48):
    theta = np.linspace(0.0, 2.0 * np.pi, n + 1)
    return np.stack([cx + rx * np.cos(theta), cy + ry * np.sin(theta)], axis=1)


def _polyline_points(rng, resolution, n_vertices):
    return rng.uniform(0.15 * resolution, 0.85 * resolution, size=(n_vertices, 2))


def _subdivide(points, step):
    """Resample a polyline so no segment is longer than `step` pixels."""
    out = [points[0]]
    for a, b in zip(points[:-1], points[1:]):
        length = float(np.hypot(*(b - a)))
        pieces = max(1, int(np.ceil(length / step)))
        for i in range(1, pieces + 1):
            out.append(a + (b - a) * (i / pieces))
    return np.asarray(out)


def shape_strokes(shape_id: int, resolution: int, seed: int = 0) -> list[np.ndarray]:
    """Stroke polylines for one shape; a function of (seed, shape_id) only."""
    rng = np.random.default_rng([seed, shape_id])
    strokes = []
    cx, cy = rng.uniform(0.35, 0.65, size=2) * resolution
    rx = rng.uniform(0.12, 0.3) * resolution
    ry = rng.uniform(0.12, 0.3) * resolution
    strokes.append(_ellipse_points(cx, cy, rx, ry))
    for _ in range(int(rng.integers(2, 5))):
        strokes.append(_polyline_points(rng, resolution, int(rng.integers(2, 5))))
    return strokes


def _stroke_coverage(stroke: np.ndarray, xs, ys, radius: float, dashed: bool) -> np.ndarray:
    """Per-pixel coverage in [0, 1] of a polyline drawn with the given radius."""
    pts = _subdivide(stroke, step=3.0)
    coverage = np.zeros(xs.shape, dtype=np.float32)
    for i, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        if dashed and (i % 2 == 1):
            continue
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            continue
        t = np.clip(((xs - a[0]) * ab[0] + (ys - a[1]) * ab[1]) / denom, 0.0, 1.0)
        dist = np.hypot(xs - (a[0] + t * ab[0]), ys - (a[1] + t * ab[1]))
        np.maximum(coverage, np.clip(radius + 0.5 - dist, 0.0, 1.0), out=coverage)
    return coverage


def render_sketch(shape_id: int, style: SketchStyle, resolution: int = 64,
                  seed: int = 0) -> SketchImage:
    """Render one shape in one style onto a white background."""
    ys, xs = np.mgrid[0:resolution, 0:resolution].astype(np.float32)
    image = np.ones((resolution, resolution), dtype=np.float32)
    for stroke in shape_strokes(shape_id, resolution, seed):
        cov = _stroke_coverage(stroke, xs, ys, style.thickness / 2.0, style.dashed)
        np.minimum(image, 1.0 + (style.darkness - 1.0) * cov, out=image)
    return SketchImage(torch.from_numpy(image).unsqueeze(0).clamp(-1.0, 1.0))


def generate_synthetic_corpus(root, n_shapes: int = 32, resolution: int = 64,
                              styles=DEFAULT_STYLES, seed: int = 0,
                              manifest_name: str = "manifest.csv") -> str:
    """Write PNG renders of n_shapes x len(styles) sketches plus a manifest.

    Returns the manifest path; manifest columns are path, shape_id, style_id
    (style ids are 1-based).
    """
    os.makedirs(root, exist_ok=True)
    manifest_path = os.path.join(root, manifest_name)
    with open(manifest_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "shape_id", "style_id"])
        for shape_id in range(n_shapes):
            for style_idx, style in enumerate(styles, start=1):
                name = f"shape{shape_id:03d}_style{style_idx}.png"
                path = os.path.join(root, name)
                save_image(render_sketch(shape_id, style, resolution, seed), path)
                writer.writerow([path, shape_id, style_idx])
    return manifest_path
