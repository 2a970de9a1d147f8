"""Contrastive pretraining of the style encoder with a triplet objective.

Anchor and positive share a drawing style, the negative shares the anchor's
shape but not its style; the squared-distance margin loss pulls same-style
embeddings together and pushes same-shape/other-style embeddings apart. The
trained encoder is frozen afterwards and acts as the style distance for the
main model.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import torch

from .errors import InsufficientCorpus, DivergenceDetected
from .imaging import SketchImage, load_image, resize
from .networks import StyleEncoder

DEFAULT_MARGIN = 1.0
SAMPLE_ATTEMPTS = 100


class CorpusEntry(NamedTuple):
    path: str
    shape_id: str
    style_id: str


@dataclass(frozen=True)
class StyleCorpus:
    """Sketch corpus factorized by (shape, style).

    Needs at least two distinct styles, and every shape must appear under at
    least two styles so a same-shape/different-style negative always exists.
    """

    entries: tuple[CorpusEntry, ...]

    def __post_init__(self):
        styles = {e.style_id for e in self.entries}
        if len(styles) < 2:
            raise InsufficientCorpus(f"need >= 2 styles, found {len(styles)}")
        by_shape: dict[str, set[str]] = {}
        for e in self.entries:
            by_shape.setdefault(e.shape_id, set()).add(e.style_id)
        thin = [s for s, st in by_shape.items() if len(st) < 2]
        if thin:
            raise InsufficientCorpus(
                f"{len(thin)} shape(s) appear under a single style, e.g. {thin[0]!r}"
            )

    @classmethod
    def from_manifest(cls, manifest_path) -> "StyleCorpus":
        with open(manifest_path, newline="") as fh:
            reader = csv.DictReader(fh)
            entries = tuple(
                CorpusEntry(row["path"], str(row["shape_id"]), str(row["style_id"]))
                for row in reader
            )
        if not entries:
            raise InsufficientCorpus(f"empty manifest: {manifest_path}")
        return cls(entries)

    @property
    def styles(self) -> list[str]:
        return sorted({e.style_id for e in self.entries})


@dataclass(frozen=True)
class Triplet:
    anchor: SketchImage
    positive: SketchImage
    negative: SketchImage
    anchor_entry: CorpusEntry
    positive_entry: CorpusEntry
    negative_entry: CorpusEntry


def sample_triplet_entries(corpus: StyleCorpus, rng: random.Random
                           ) -> tuple[CorpusEntry, CorpusEntry, CorpusEntry]:
    """Draw (anchor, positive, negative) corpus entries.

    Positive: same style as the anchor, a different file when one exists.
    Negative: same shape, different style. Redraws the anchor if no negative
    exists for it.
    """
    entries = corpus.entries
    for _ in range(SAMPLE_ATTEMPTS):
        anchor = entries[rng.randrange(len(entries))]
        negatives = [
            e for e in entries
            if e.shape_id == anchor.shape_id and e.style_id != anchor.style_id
        ]
        if not negatives:
            continue
        positives = [e for e in entries if e.style_id == anchor.style_id and e != anchor]
        positive = positives[rng.randrange(len(positives))] if positives else anchor
        negative = negatives[rng.randrange(len(negatives))]
        return anchor, positive, negative
    raise InsufficientCorpus(
        f"no valid negative found after {SAMPLE_ATTEMPTS} anchor draws"
    )


def _load_sketch(entry: CorpusEntry, resolution: int | None) -> SketchImage:
    img = load_image(entry.path, mode="sketch")
    if resolution is not None and (img.height, img.width) != (resolution, resolution):
        img = resize(img, resolution, resolution)
    return img


def sample_triplet(corpus: StyleCorpus, rng: random.Random,
                   resolution: int | None = None) -> Triplet:
    """Sample entries and load the three sketches."""
    anchor, positive, negative = sample_triplet_entries(corpus, rng)
    return Triplet(
        anchor=_load_sketch(anchor, resolution),
        positive=_load_sketch(positive, resolution),
        negative=_load_sketch(negative, resolution),
        anchor_entry=anchor,
        positive_entry=positive,
        negative_entry=negative,
    )


def triplet_loss(anchor: torch.Tensor, positive: torch.Tensor, negative: torch.Tensor,
                 margin: float = DEFAULT_MARGIN) -> torch.Tensor:
    """max(|a-p|^2 - |a-n|^2 + margin, 0) on embeddings, mean over any batch."""
    d_ap = (anchor - positive).pow(2).sum(dim=-1)
    d_an = (anchor - negative).pow(2).sum(dim=-1)
    return torch.clamp(d_ap - d_an + margin, min=0.0).mean()


@dataclass
class PretrainConfig:
    epochs: int = 200
    batch: int = 4
    lr: float = 2e-4
    margin: float = DEFAULT_MARGIN
    resolution: int = 256
    base_channels: int = 64
    steps_per_epoch: int | None = None
    seed: int = 0


STYLE_ENCODER_FORMAT_VERSION = 1


def save_style_encoder(encoder: StyleEncoder, base_channels: int, path) -> None:
    torch.save(
        {
            "format_version": STYLE_ENCODER_FORMAT_VERSION,
            "base_channels": base_channels,
            "state_dict": encoder.state_dict(),
        },
        path,
    )


def load_style_encoder(path) -> StyleEncoder:
    """Load pretrained weights and return the encoder frozen in eval mode."""
    payload = torch.load(path, map_location="cpu", weights_only=True)
    encoder = StyleEncoder(base_channels=payload["base_channels"])
    encoder.load_state_dict(payload["state_dict"])
    encoder.eval()
    for p in encoder.parameters():
        p.requires_grad_(False)
    return encoder


def pretrain_style_encoder(corpus: StyleCorpus, config: PretrainConfig,
                           out_path=None, log=None) -> tuple[StyleEncoder, list[float]]:
    """Train the style encoder on triplets from the corpus.

    Learning rate is constant for the first half of the run, then decays
    linearly to zero. Returns the trained encoder and the per-epoch mean
    triplet loss. A non-finite loss aborts with the last finite weights
    saved (when `out_path` is given) and DivergenceDetected raised.
    """
    from .training import lr_schedule

    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)
    encoder = StyleEncoder(base_channels=config.base_channels)
    encoder.train()
    opt = torch.optim.Adam(encoder.parameters(), lr=config.lr, betas=(0.5, 0.999))
    steps = config.steps_per_epoch or max(1, len(corpus.entries) // config.batch)

    cache: dict[str, torch.Tensor] = {}

    def tensor_of(entry: CorpusEntry) -> torch.Tensor:
        if entry.path not in cache:
            cache[entry.path] = _load_sketch(entry, config.resolution).data
        return cache[entry.path]

    history: list[float] = []
    for epoch in range(config.epochs):
        lr = lr_schedule(epoch, config.epochs, config.lr)
        for group in opt.param_groups:
            group["lr"] = lr
        epoch_losses = []
        for _ in range(steps):
            triplets = [sample_triplet_entries(corpus, rng) for _ in range(config.batch)]
            stacked = torch.stack(
                [tensor_of(e) for trip in triplets for e in trip]
            )
            embeddings = encoder(stacked).view(config.batch, 3, -1)
            loss = triplet_loss(
                embeddings[:, 0], embeddings[:, 1], embeddings[:, 2], config.margin
            )
            if not math.isfinite(loss.item()):
                if out_path is not None:
                    save_style_encoder(encoder, config.base_channels, out_path)
                raise DivergenceDetected(f"triplet loss became {loss.item()} at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_losses.append(loss.item())
        mean_loss = sum(epoch_losses) / len(epoch_losses)
        history.append(mean_loss)
        if log is not None:
            log(f"epoch {epoch + 1}/{config.epochs} lr {lr:.6g} triplet {mean_loss:.6f}")
    encoder.eval()
    for p in encoder.parameters():
        p.requires_grad_(False)
    if out_path is not None:
        save_style_encoder(encoder, config.base_channels, out_path)
    return encoder, history


def export_embeddings(encoder: StyleEncoder, entries: Sequence, out_csv,
                      resolution: int | None = None) -> int:
    """Write one CSV row per sketch: path, style label, 128 embedding floats.

    `entries` holds CorpusEntry items or (path, style_label) pairs; unknown
    labels may be empty strings. Floats are written with 9 significant
    digits, which round-trips float32 exactly. Returns the row count.
    """
    was_training = encoder.training
    encoder.eval()
    rows = 0
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "style_id"] + [f"e{i}" for i in range(128)])
        with torch.no_grad():
            for entry in entries:
                if isinstance(entry, CorpusEntry):
                    path, style = entry.path, entry.style_id
                else:
                    path, style = entry[0], entry[1]
                img = load_image(path, mode="sketch")
                if resolution is not None:
                    img = resize(img, resolution, resolution)
                emb = encoder(img.data)
                writer.writerow([path, style] + [f"{v:.9g}" for v in emb.tolist()])
                rows += 1
    encoder.train(was_training)
    return rows


def read_embeddings(csv_path) -> tuple[list[str], list[str], torch.Tensor]:
    """Parse an embedding table back into (paths, styles, N x 128 tensor)."""
    paths, styles, vecs = [], [], []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            paths.append(row[0])
            styles.append(row[1])
            vecs.append([float(v) for v in row[2:]])
    return paths, styles, torch.tensor(vecs, dtype=torch.float32)
