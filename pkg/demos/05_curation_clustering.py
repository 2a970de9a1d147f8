"""Corpus curation: k-means culling of improper images and style discovery.

A corpus scraped by tag contains things that are not sketches. Clustering
backbone features groups them; a human looks at the contact sheets and names
the cluster labels to keep. Afterwards the surviving sketches are clustered
again into major drawing styles.
"""

import itertools
import os

import numpy as np
import torch

from refsketch.curation import cull_improper, extract_cluster_features, identify_styles, kmeans
from refsketch.extractors import ink_stats_extractor, mean_pool_extractor
from refsketch.imaging import SketchImage
from refsketch.synthetic import DEFAULT_STYLES, render_sketch

OUT = os.path.join(os.path.dirname(__file__), "output", "05_curation")
os.makedirs(OUT, exist_ok=True)

# A mixed corpus: clean line renders plus solid-color squares (stand-ins for
# mistagged downloads).
renders = [render_sketch(i, DEFAULT_STYLES[i % 4], 64) for i in range(12)]
squares = []
for i in range(6):
    data = torch.ones(1, 64, 64)
    data[:, 8:56, 8:56] = -0.75 + 0.03 * i
    squares.append(SketchImage(data))
images = renders + squares
names = [f"render{i:02d}" for i in range(12)] + [f"square{i:02d}" for i in range(6)]

backbone = mean_pool_extractor(8)
probe = kmeans(extract_cluster_features(images, backbone), 2, seed=0)
render_label = int(probe.labels[0])
print(f"probe clustering put renders in cluster {render_label}; "
      f"review sheets land in {OUT}")

kept, kept_names = cull_improper(
    images, backbone, keep_labels=[[render_label]], k=2, rounds=1,
    paths=names, seed=0, out_dir=OUT,
)
print(f"kept {len(kept)} of {len(images)} images: {kept_names[:4]} ...")

# Style discovery on the survivors with the analytic ink-statistics backbone.
labels_true = [i % 4 for i in range(12)]
assignment = identify_styles(kept, ink_stats_extractor(), k=4, paths=kept_names,
                             seed=0, out_dir=OUT)
accuracy = max(
    np.mean([perm[a] == b for a, b in zip(assignment.labels, labels_true)])
    for perm in itertools.permutations(range(4))
)
print(f"style clustering recovers the generating styles at "
      f"{accuracy:.0%} (best label permutation)")
