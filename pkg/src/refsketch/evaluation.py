"""PSNR / FID / LPIPS metrics and the two evaluation protocols.

Extraction protocol: for every (shape, style) cell of the paired evaluation
set, the reference is the same-style sketch of the *next* shape (unseen
shape, seen style); the output is scored against the ground-truth sketch of
the input shape. Cyclic protocol: re-extract using the first output as the
reference and compare the second output against the first.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import DegenerateCovariance, ShapeMismatch
from .extractors import FeatureExtractor, grid_pool_extractor, identity_extractor
from .imaging import SketchImage, resize, to_gray
from .networks import SketchGenerator

PSNR_CAP_DB = 100.0
PEAK = 255.0


def _tensor(img) -> torch.Tensor:
    return img.data if hasattr(img, "data") else img


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB over the 8-bit value range.

    Inputs are [-1, 1] images; identical inputs return the 100 dB cap so
    aggregates stay finite.
    """
    ta, tb = _tensor(a), _tensor(b)
    if ta.shape != tb.shape:
        raise ShapeMismatch(f"{tuple(ta.shape)} vs {tuple(tb.shape)}")
    scale = PEAK / 2.0
    mse = float(((ta - tb) * scale).pow(2).mean())
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(PEAK * PEAK / mse))


def lpips(a, b, metric_net: FeatureExtractor, linear_weights=None) -> float:
    """Perceptual distance: unit-normalized feature differences, channel-
    weighted, spatially averaged and summed over tap layers.

    `linear_weights` holds one per-channel weight vector per tap (defaults to
    all ones, which is what the analytic stub backbones expect).
    """
    ta, tb = _tensor(a).unsqueeze(0), _tensor(b).unsqueeze(0)
    with torch.no_grad():
        feats_a = metric_net.apply(ta)
        feats_b = metric_net.apply(tb)
    total = 0.0
    for layer, (fa, fb) in enumerate(zip(feats_a, feats_b)):
        na = fa / fa.pow(2).sum(dim=1, keepdim=True).sqrt().clamp_min(1e-10)
        nb = fb / fb.pow(2).sum(dim=1, keepdim=True).sqrt().clamp_min(1e-10)
        diff = (na - nb).pow(2)
        if linear_weights is not None:
            w = linear_weights[layer].view(1, -1, 1, 1).to(diff.dtype)
            diff = diff * w
        total += float(diff.sum(dim=1).mean())
    return total


def _sqrtm_trace(matrix: np.ndarray) -> float:
    """Trace of the PSD square root via eigendecomposition; small negative
    eigenvalues (numerical noise, clamped at the -1e-6 tolerance) go to 0."""
    eigvals = np.linalg.eigvalsh((matrix + matrix.T) / 2.0)
    return float(np.sqrt(np.clip(eigvals, 0.0, None)).sum())


def fid(features_a: np.ndarray, features_b: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two feature sets."""
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeMismatch(f"feature sets {a.shape} vs {b.shape}")
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise DegenerateCovariance("need at least 2 samples per set")
    if min(a.shape[0], b.shape[0]) <= a.shape[1]:
        warnings.warn(
            "sample count <= feature dimension: the score is strongly biased",
            stacklevel=2,
        )
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    sigma_a = np.atleast_2d(np.cov(a, rowvar=False))
    sigma_b = np.atleast_2d(np.cov(b, rowvar=False))
    sqrt_a = _psd_sqrt(sigma_a)
    cross = _sqrtm_trace(sqrt_a @ sigma_b @ sqrt_a)
    value = float(
        ((mu_a - mu_b) ** 2).sum() + np.trace(sigma_a) + np.trace(sigma_b) - 2.0 * cross
    )
    return max(value, 0.0)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh((matrix + matrix.T) / 2.0)
    root = np.sqrt(np.clip(eigvals, 0.0, None))
    return (eigvecs * root) @ eigvecs.T


@dataclass
class EvalBackbones:
    """Feature backends for the metrics; defaults are analytic stubs."""

    lpips_net: FeatureExtractor = field(default_factory=identity_extractor)
    lpips_weights: list | None = None
    fid_net: FeatureExtractor = field(default_factory=lambda: grid_pool_extractor(4, "fid-pool"))

    def fid_features(self, sketch: SketchImage) -> np.ndarray:
        with torch.no_grad():
            taps = self.fid_net.apply(sketch.data.unsqueeze(0))
        return torch.cat([t.flatten() for t in taps]).numpy()


@dataclass
class MetricReport:
    psnr: float
    fid: float
    lpips: float
    n_pairs: int
    resolution: int
    per_style: dict[int, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "psnr": self.psnr,
            "fid": self.fid,
            "lpips": self.lpips,
            "n_pairs": self.n_pairs,
            "resolution": self.resolution,
            "per_style": {str(k): v for k, v in self.per_style.items()},
        }


def checkpoint_model(checkpoint_path):
    """Wrap a saved checkpoint as a (color, reference) -> sketch callable."""
    from .training import load_checkpoint, restore_models

    payload = load_checkpoint(checkpoint_path)
    models, _config = restore_models(payload)
    models.g_s.eval()
    return generator_model(models.g_s)


def generator_model(g_s: SketchGenerator):
    """(ColorImage|GrayContent, SketchImage) -> SketchImage around a generator."""

    def run(content, reference: SketchImage) -> SketchImage:
        gray = to_gray(content) if content.data.shape[0] == 3 else content
        with torch.no_grad():
            out = g_s(gray.data.unsqueeze(0), reference.data.unsqueeze(0))
        return SketchImage(out.squeeze(0))

    return run


def _score_pairs(outputs, truths, backbones: EvalBackbones, resolution: int,
                 styles) -> MetricReport:
    per_style_scores: dict[int, dict[str, list]] = {}
    psnrs, lpips_vals = [], []
    feats_out, feats_truth = [], []
    for out, truth, style in zip(outputs, truths, styles):
        p = psnr(out, truth)
        lp = lpips(out, truth, backbones.lpips_net, backbones.lpips_weights)
        psnrs.append(p)
        lpips_vals.append(lp)
        feats_out.append(backbones.fid_features(out))
        feats_truth.append(backbones.fid_features(truth))
        bucket = per_style_scores.setdefault(style, {"psnr": [], "lpips": [], "out": [], "truth": []})
        bucket["psnr"].append(p)
        bucket["lpips"].append(lp)
        bucket["out"].append(feats_out[-1])
        bucket["truth"].append(feats_truth[-1])
    per_style = {}
    for style, bucket in sorted(per_style_scores.items()):
        per_style[style] = {
            "psnr": float(np.mean(bucket["psnr"])),
            "lpips": float(np.mean(bucket["lpips"])),
            "fid": fid(np.asarray(bucket["out"]), np.asarray(bucket["truth"])),
        }
    return MetricReport(
        psnr=float(np.mean(psnrs)),
        fid=fid(np.asarray(feats_out), np.asarray(feats_truth)),
        lpips=float(np.mean(lpips_vals)),
        n_pairs=len(psnrs),
        resolution=resolution,
        per_style=per_style,
    )


def _prepared(dataset, resolution: int):
    """Resize every color/sketch in the evaluation set to the metric resolution."""
    prepared = []
    for pair in dataset:
        color = resize(pair.color, resolution, resolution)
        sketches = {s: resize(img, resolution, resolution) for s, img in pair.sketches.items()}
        prepared.append((pair.shape_index, color, sketches))
    return prepared


def evaluate_extraction(model, dataset, backbones: EvalBackbones | None = None,
                        resolution: int = 512) -> MetricReport:
    """Seen-style / unseen-shape protocol over every (shape, style) cell.

    `model` is a (color, reference) -> sketch callable (see checkpoint_model);
    `dataset` is the loaded paired evaluation set.
    """
    backbones = backbones or EvalBackbones()
    prepared = _prepared(dataset, resolution)
    n = len(prepared)
    outputs, truths, styles = [], [], []
    for idx, (_shape, color, sketches) in enumerate(prepared):
        for style, truth in sorted(sketches.items()):
            reference = prepared[(idx + 1) % n][2][style]
            outputs.append(model(color, reference))
            truths.append(truth)
            styles.append(style)
    return _score_pairs(outputs, truths, backbones, resolution, styles)


@dataclass
class CyclicReport:
    first_pass: MetricReport
    cyclic: MetricReport

    def to_dict(self) -> dict:
        return {"first_pass": self.first_pass.to_dict(), "cyclic": self.cyclic.to_dict()}


def cyclic_evaluate(model, dataset, backbones: EvalBackbones | None = None,
                    resolution: int = 512, against: str = "first-output") -> CyclicReport:
    """Self-consistency protocol: extract, then re-extract with the output as
    the reference.

    The cyclic block compares the second output against the first
    (`against="first-output"`, the default) or against the ground-truth
    sketch (`against="ground-truth"`).
    """
    if against not in ("first-output", "ground-truth"):
        raise ValueError(f"against must be 'first-output' or 'ground-truth', got {against!r}")
    backbones = backbones or EvalBackbones()
    prepared = _prepared(dataset, resolution)
    n = len(prepared)
    first_outputs, second_outputs, truths, styles = [], [], [], []
    for idx, (_shape, color, sketches) in enumerate(prepared):
        for style, truth in sorted(sketches.items()):
            reference = prepared[(idx + 1) % n][2][style]
            first = model(color, reference)
            second = model(color, first)
            first_outputs.append(first)
            second_outputs.append(second)
            truths.append(truth)
            styles.append(style)
    first_report = _score_pairs(first_outputs, truths, backbones, resolution, styles)
    targets = first_outputs if against == "first-output" else truths
    cyclic_report = _score_pairs(second_outputs, targets, backbones, resolution, styles)
    return CyclicReport(first_pass=first_report, cyclic=cyclic_report)


def write_report(report, json_path=None, csv_path=None) -> None:
    """Serialize a metric report to JSON and/or a flat CSV."""
    payload = report.to_dict()
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    if csv_path is not None:
        import csv as csvmod

        rows = []

        def flatten(prefix, obj):
            if isinstance(obj, dict):
                for key, value in sorted(obj.items()):
                    flatten(f"{prefix}.{key}" if prefix else str(key), value)
            else:
                rows.append((prefix, obj))

        flatten("", payload)
        with open(csv_path, "w", newline="") as fh:
            writer = csvmod.writer(fh)
            writer.writerow(["metric", "value"])
            writer.writerows(rows)
