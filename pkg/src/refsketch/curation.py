"""Corpus construction: k-means culling, style discovery, batch pairing and
the paired evaluation-set loader.

Improper downloads are removed by clustering backbone features (default
K=10, three rounds) and keeping only human-approved cluster labels; the
surviving sketches are clustered again (K=4) to discover the major drawing
styles. Training batches pair a without-replacement permutation of the color
corpus with independently drawn reference sketches.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import (
    AllCulled,
    EmptyDirectory,
    EmptyInput,
    IncompleteDataset,
)
from .extractors import FeatureExtractor
from .imaging import ColorImage, SketchImage, load_image, resize, to_bytes

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")

N_EVAL_SHAPES = 25
N_EVAL_STYLES = 4


def list_images(directory) -> list[str]:
    if not os.path.isdir(directory):
        raise EmptyDirectory(f"not a directory: {directory}")
    names = sorted(
        n for n in os.listdir(directory) if n.lower().endswith(IMAGE_EXTENSIONS)
    )
    if not names:
        raise EmptyDirectory(f"no images in {directory}")
    return [os.path.join(directory, n) for n in names]


def extract_cluster_features(images, backbone: FeatureExtractor) -> np.ndarray:
    """One flat float vector per image from the backbone's configured tap."""
    vectors = []
    with torch.no_grad():
        for img in images:
            data = img.data if hasattr(img, "data") else img
            taps = backbone.apply(data.unsqueeze(0))
            vectors.append(torch.cat([t.flatten() for t in taps]).numpy())
    return np.asarray(vectors, dtype=np.float64)


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: list[float] = field(default_factory=list)


def _plus_plus_init(vectors: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = vectors.shape[0]
    centroids = [vectors[rng.integers(n)]]
    for _ in range(1, k):
        dists = np.min(
            [np.sum((vectors - c) ** 2, axis=1) for c in centroids], axis=0
        )
        total = dists.sum()
        if total <= 0.0:
            centroids.append(vectors[rng.integers(n)])
            continue
        centroids.append(vectors[rng.choice(n, p=dists / total)])
    return np.asarray(centroids)


def _lloyd(vectors: np.ndarray, k: int, max_iter: int, rng) -> ClusterAssignment:
    centroids = _plus_plus_init(vectors, k, rng)
    labels = np.full(vectors.shape[0], -1, dtype=np.int64)
    history: list[float] = []
    for _ in range(max_iter):
        sq_dists = ((vectors[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = sq_dists.argmin(axis=1)
        history.append(float(sq_dists[np.arange(len(vectors)), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = vectors[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
            else:
                # Re-seed an emptied cluster at the point farthest from its centroid.
                farthest = sq_dists[np.arange(len(vectors)), labels].argmax()
                centroids[j] = vectors[farthest]
                labels[farthest] = j
    return ClusterAssignment(labels, centroids, history[-1], history)


def kmeans(vectors: np.ndarray, k: int, max_iter: int = 100, seed: int = 0,
           n_init: int = 10) -> ClusterAssignment:
    """Lloyd iterations from k-means++ seeding, best of `n_init` restarts.

    Runs until the assignment reaches a fixpoint or `max_iter`; the recorded
    inertia history is non-increasing within each run.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    if vectors.shape[0] == 0:
        raise EmptyInput("no vectors to cluster")
    if not 1 <= k <= vectors.shape[0]:
        raise EmptyInput(f"k={k} invalid for {vectors.shape[0]} vectors")
    rng = np.random.default_rng(seed)
    best: ClusterAssignment | None = None
    for _ in range(max(1, n_init)):
        result = _lloyd(vectors, k, max_iter, rng)
        if best is None or result.inertia < best.inertia:
            best = result
    return best


def contact_sheet(images, path, columns: int = 8, thumb: int = 96) -> None:
    """Write a PNG grid of thumbnails for visual cluster review."""
    from PIL import Image

    if not images:
        return
    rows = math.ceil(len(images) / columns)
    cols = min(columns, len(images))
    sheet = Image.new("RGB", (cols * thumb, rows * thumb), (255, 255, 255))
    for i, img in enumerate(images):
        arr = to_bytes(img.data)
        pil = (
            Image.fromarray(arr[0], mode="L").convert("RGB")
            if arr.shape[0] == 1
            else Image.fromarray(arr.transpose(1, 2, 0), mode="RGB")
        )
        pil = pil.resize((thumb, thumb))
        sheet.paste(pil, ((i % columns) * thumb, (i // columns) * thumb))
    sheet.save(path)


def write_cluster_manifest(paths, labels, out_csv) -> None:
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label"])
        for path, label in zip(paths, labels):
            writer.writerow([path, int(label)])


def _emit_review_artifacts(images, paths, assignment, out_dir, tag) -> None:
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    k = assignment.centroids.shape[0]
    for j in range(k):
        members = [img for img, lbl in zip(images, assignment.labels) if lbl == j]
        contact_sheet(members, os.path.join(out_dir, f"{tag}_cluster{j:02d}.png"))
    write_cluster_manifest(paths, assignment.labels, os.path.join(out_dir, f"{tag}.csv"))


def cull_improper(images, backbone: FeatureExtractor, keep_labels,
                  paths=None, k: int = 10, rounds: int = 3, seed: int = 0,
                  out_dir=None):
    """Iteratively cluster and keep only approved cluster labels.

    `keep_labels` is one label collection per round (human review of the
    emitted contact sheets decides them). Returns (kept images, kept paths).
    """
    if len(keep_labels) != rounds:
        raise ValueError(f"need keep_labels for each of {rounds} rounds, got {len(keep_labels)}")
    paths = list(paths) if paths is not None else [f"image{i}" for i in range(len(images))]
    images = list(images)
    for round_idx in range(rounds):
        if not images:
            raise AllCulled("culling removed every image")
        features = extract_cluster_features(images, backbone)
        assignment = kmeans(features, min(k, len(images)), seed=seed + round_idx)
        _emit_review_artifacts(images, paths, assignment, out_dir, f"cull_round{round_idx + 1}")
        keep = set(keep_labels[round_idx])
        survivors = [
            (img, pth)
            for img, pth, lbl in zip(images, paths, assignment.labels)
            if int(lbl) in keep
        ]
        if not survivors:
            raise AllCulled(f"round {round_idx + 1} kept no images")
        images = [s[0] for s in survivors]
        paths = [s[1] for s in survivors]
    return images, paths


def identify_styles(sketches, backbone: FeatureExtractor, k: int = 4,
                    paths=None, seed: int = 0, out_dir=None) -> ClusterAssignment:
    """Cluster the culled sketch corpus into k drawing styles."""
    features = extract_cluster_features(sketches, backbone)
    assignment = kmeans(features, k, seed=seed)
    paths = list(paths) if paths is not None else [f"sketch{i}" for i in range(len(sketches))]
    _emit_review_artifacts(sketches, paths, assignment, out_dir, "styles")
    return assignment


def unpaired_batches(color_dir, sketch_dir, batch: int = 4, seed: int = 0):
    """One epoch of (color paths, reference sketch paths) batches.

    Colors are a without-replacement permutation (every color appears exactly
    once per epoch); references are drawn independently and uniformly from
    the sketch corpus. Deterministic for a fixed seed.
    """
    colors = list_images(color_dir)
    sketches = list_images(sketch_dir)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(colors))
    for start in range(0, len(colors), batch):
        chunk = order[start:start + batch]
        refs = rng.integers(0, len(sketches), size=len(chunk))
        yield [colors[i] for i in chunk], [sketches[int(j)] for j in refs]


@dataclass(frozen=True)
class EvalPair:
    """One evaluation shape: a color image and its four styled sketches."""

    shape_index: int
    color: ColorImage
    sketches: dict[int, SketchImage]


def load_4skst(root) -> list[EvalPair]:
    """Load the 25-shape x 4-style paired evaluation set.

    Expected layout: root/color/{00..24}.png and root/style{1..4}/{00..24}.png.
    Raises IncompleteDataset naming every missing file.
    """
    expected = []
    for i in range(N_EVAL_SHAPES):
        expected.append(os.path.join(root, "color", f"{i:02d}.png"))
        for s in range(1, N_EVAL_STYLES + 1):
            expected.append(os.path.join(root, f"style{s}", f"{i:02d}.png"))
    missing = [p for p in expected if not os.path.exists(p)]
    if missing:
        raise IncompleteDataset(os.path.relpath(p, root) for p in missing)
    pairs = []
    for i in range(N_EVAL_SHAPES):
        color = load_image(os.path.join(root, "color", f"{i:02d}.png"), mode="color")
        sketches = {
            s: load_image(os.path.join(root, f"style{s}", f"{i:02d}.png"), mode="sketch")
            for s in range(1, N_EVAL_STYLES + 1)
        }
        pairs.append(EvalPair(shape_index=i, color=color, sketches=sketches))
    return pairs


def load_image_batch(paths, mode: str, resolution: int) -> torch.Tensor:
    """Load, resize and stack images into a (N, C, resolution, resolution) batch."""
    tensors = []
    for path in paths:
        img = load_image(path, mode=mode)
        img = resize(img, resolution, resolution)
        tensors.append(img.data)
    return torch.stack(tensors)
