"""The procedural corpus: one drawing rendered in four parametric styles.

Geometry depends only on the shape id, so each style renders the same
drawing. That gives the (shape, style) factorization triplet sampling
needs: positives share a style, negatives share a shape.
"""

import os
import random

from refsketch.curation import contact_sheet
from refsketch.style_pretrain import StyleCorpus, sample_triplet
from refsketch.synthetic import DEFAULT_STYLES, generate_synthetic_corpus, render_sketch

OUT = os.path.join(os.path.dirname(__file__), "output", "03_synthetic_corpus")
os.makedirs(OUT, exist_ok=True)

for style in DEFAULT_STYLES:
    print(f"style {style.name:14s} thickness={style.thickness} "
          f"darkness={style.darkness} dashed={style.dashed}")

# A montage: rows are shapes, columns are styles.
tiles = [
    render_sketch(shape_id, style, 96)
    for shape_id in range(6)
    for style in DEFAULT_STYLES
]
contact_sheet(tiles, os.path.join(OUT, "montage.png"), columns=len(DEFAULT_STYLES))
print(f"\nwrote montage of 6 shapes x {len(DEFAULT_STYLES)} styles")

# Generate a small corpus on disk and sample a few triplets from it.
manifest = generate_synthetic_corpus(os.path.join(OUT, "corpus"), n_shapes=8,
                                     resolution=64, seed=0)
corpus = StyleCorpus.from_manifest(manifest)
print(f"corpus: {len(corpus.entries)} sketches, styles {corpus.styles}")

rng = random.Random(0)
for _ in range(3):
    triplet = sample_triplet(corpus, rng, resolution=64)
    print(f"anchor  shape={triplet.anchor_entry.shape_id} style={triplet.anchor_entry.style_id}  "
          f"positive style={triplet.positive_entry.style_id}  "
          f"negative shape={triplet.negative_entry.shape_id} "
          f"style={triplet.negative_entry.style_id}")
print(f"outputs in {OUT}")
