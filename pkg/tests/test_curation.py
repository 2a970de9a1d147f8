"""k-means, culling, style discovery, batch pairing and the eval-set loader."""

import inspect
import itertools

import numpy as np
import pytest
import torch

from refsketch.curation import (
    cull_improper,
    extract_cluster_features,
    identify_styles,
    kmeans,
    load_4skst,
    unpaired_batches,
)
from refsketch.errors import AllCulled, EmptyDirectory, EmptyInput, IncompleteDataset
from refsketch.extractors import ink_stats_extractor, mean_pool_extractor
from refsketch.imaging import SketchImage
from refsketch.synthetic import DEFAULT_STYLES, render_sketch


def brute_force_optimal_inertia(points: np.ndarray, k: int) -> float:
    best = float("inf")
    for assignment in itertools.product(range(k), repeat=len(points)):
        inertia = 0.0
        for j in range(k):
            members = points[[i for i, a in enumerate(assignment) if a == j]]
            if len(members):
                inertia += float(((members - members.mean(axis=0)) ** 2).sum())
        best = min(best, inertia)
    return best


class TestKmeans:
    def test_k1_is_global_mean(self):
        rng = np.random.default_rng(0)
        points = rng.normal(size=(20, 3))
        result = kmeans(points, 1)
        assert np.allclose(result.centroids[0], points.mean(axis=0))
        assert set(result.labels) == {0}

    def test_two_points_two_clusters(self):
        result = kmeans(np.array([[0.0], [5.0]]), 2)
        assert result.inertia < 1e-12
        assert len(set(result.labels)) == 2

    def test_three_blobs_match_nearest_center_oracle(self):
        rng = np.random.default_rng(1)
        centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        points = np.concatenate(
            [rng.normal(c, 0.1, size=(30, 2)) for c in centers]
        )
        result = kmeans(points, 3, seed=2)
        oracle = np.argmin(
            ((points[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1
        )
        # same partition up to label permutation
        mapping = {}
        for ours, true in zip(result.labels, oracle):
            mapping.setdefault(ours, true)
            assert mapping[ours] == true
        assert len(mapping) == 3

    def test_matches_brute_force_on_tiny_instances(self):
        rng = np.random.default_rng(3)
        for case in range(10):
            n = int(rng.integers(2, 9))
            k = int(rng.integers(1, min(3, n) + 1))
            points = rng.uniform(0, 10, size=(n, 1))
            result = kmeans(points, k, seed=case, n_init=20)
            assert result.inertia <= brute_force_optimal_inertia(points, k) + 1e-9

    def test_inertia_monotone_and_fixpoint(self):
        rng = np.random.default_rng(4)
        points = rng.normal(size=(40, 2))
        result = kmeans(points, 3, seed=5)
        history = result.inertia_history
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
        # re-assigning against the final centroids changes nothing
        dists = ((points[:, None, :] - result.centroids[None]) ** 2).sum(axis=2)
        assert np.array_equal(dists.argmin(axis=1), result.labels)
        # each centroid is the mean of its members
        for j in range(3):
            members = points[result.labels == j]
            assert np.allclose(result.centroids[j], members.mean(axis=0))

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            kmeans(np.zeros((0, 2)), 1)
        with pytest.raises(EmptyInput):
            kmeans(np.zeros((3, 2)), 5)


class TestClusterFeatures:
    def test_shapes_and_determinism(self):
        backbone = mean_pool_extractor(8)
        images = [SketchImage(torch.rand(1, 32, 32) * 2 - 1) for _ in range(5)]
        feats = extract_cluster_features(images, backbone)
        assert feats.shape == (5, 16)
        again = extract_cluster_features(images, backbone)
        assert np.array_equal(feats, again)
        twice = extract_cluster_features([images[0], images[0]], backbone)
        assert np.array_equal(twice[0], twice[1])

    def test_mean_pool_oracle(self):
        backbone = mean_pool_extractor(16)
        img = SketchImage(torch.linspace(-1, 1, 32 * 32).reshape(1, 32, 32))
        feats = extract_cluster_features([img], backbone)
        blocks = img.data.reshape(1, 2, 16, 2, 16).mean(dim=(2, 4)).flatten().numpy()
        assert np.allclose(feats[0], blocks, atol=1e-6)


class TestCulling:
    @staticmethod
    def mixed_corpus():
        renders = [render_sketch(i, DEFAULT_STYLES[0], 32) for i in range(6)]
        squares = []
        for i in range(6):
            data = torch.ones(1, 32, 32)
            data[:, 4:28, 4:28] = -0.8 + 0.02 * i
            squares.append(SketchImage(data))
        return renders, squares

    def test_keep_all_is_identity(self):
        renders, _ = self.mixed_corpus()
        backbone = mean_pool_extractor(8)
        kept, paths = cull_improper(
            renders, backbone, keep_labels=[list(range(10))], k=10, rounds=1,
        )
        assert kept == renders

    def test_separable_mix_culls_squares(self):
        renders, squares = self.mixed_corpus()
        images = renders + squares
        names = [f"render{i}" for i in range(6)] + [f"square{i}" for i in range(6)]
        backbone = mean_pool_extractor(8)
        feats = extract_cluster_features(images, backbone)
        probe = kmeans(feats, 2, seed=0)
        render_label = int(probe.labels[0])
        assert all(int(l) == render_label for l in probe.labels[:6])
        assert all(int(l) != render_label for l in probe.labels[6:])
        kept, kept_names = cull_improper(
            images, backbone, keep_labels=[[render_label]], k=2, rounds=1,
            paths=names, seed=0,
        )
        assert kept_names == names[:6]

    def test_all_culled_refused(self):
        renders, _ = self.mixed_corpus()
        with pytest.raises(AllCulled):
            cull_improper(renders, mean_pool_extractor(8), keep_labels=[[]],
                          k=2, rounds=1)

    def test_defaults_match_published_procedure(self):
        signature = inspect.signature(cull_improper)
        assert signature.parameters["k"].default == 10
        assert signature.parameters["rounds"].default == 3

    def test_review_artifacts_emitted(self, tmp_path):
        renders, squares = self.mixed_corpus()
        cull_improper(
            renders + squares, mean_pool_extractor(8), keep_labels=[[0, 1]],
            k=2, rounds=1, out_dir=tmp_path, seed=0,
        )
        sheets = list(tmp_path.glob("cull_round1_cluster*.png"))
        assert len(sheets) == 2
        assert (tmp_path / "cull_round1.csv").exists()


class TestStyleDiscovery:
    def test_default_k_is_4(self):
        assert inspect.signature(identify_styles).parameters["k"].default == 4

    def test_deterministic(self):
        images = [render_sketch(i, DEFAULT_STYLES[i % 4], 32) for i in range(8)]
        backbone = ink_stats_extractor()
        a = identify_styles(images, backbone, k=2, seed=9)
        b = identify_styles(images, backbone, k=2, seed=9)
        assert np.array_equal(a.labels, b.labels)

    def test_synthetic_four_styles_recovered(self):
        images, labels = [], []
        for shape_id in range(12):
            for idx, style in enumerate(DEFAULT_STYLES):
                images.append(render_sketch(shape_id, style, 64))
                labels.append(idx)
        assignment = identify_styles(images, ink_stats_extractor(), k=4, seed=0)
        accuracy = max(
            np.mean([perm[a] == b for a, b in zip(assignment.labels, labels)])
            for perm in itertools.permutations(range(4))
        )
        assert accuracy >= 0.9


class TestUnpairedBatches:
    @staticmethod
    def populate(tmp_path, n_colors=10, n_sketches=7):
        from helpers import synthetic_color_image
        from refsketch.imaging import save_image

        color_dir = tmp_path / "color"
        sketch_dir = tmp_path / "sketch"
        color_dir.mkdir()
        sketch_dir.mkdir()
        for i in range(n_colors):
            save_image(synthetic_color_image(i, 32), color_dir / f"c{i}.png")
        for i in range(n_sketches):
            save_image(render_sketch(i, DEFAULT_STYLES[0], 32), sketch_dir / f"s{i}.png")
        return color_dir, sketch_dir

    def test_epoch_covers_every_color_once(self, tmp_path):
        color_dir, sketch_dir = self.populate(tmp_path)
        seen = []
        for colors, refs in unpaired_batches(color_dir, sketch_dir, batch=4, seed=0):
            assert len(colors) == len(refs)
            seen.extend(colors)
        assert sorted(seen) == sorted(str(color_dir / f"c{i}.png") for i in range(10))

    def test_seed_determinism(self, tmp_path):
        color_dir, sketch_dir = self.populate(tmp_path)
        run1 = list(unpaired_batches(color_dir, sketch_dir, batch=4, seed=3))
        run2 = list(unpaired_batches(color_dir, sketch_dir, batch=4, seed=3))
        assert run1 == run2
        run3 = list(unpaired_batches(color_dir, sketch_dir, batch=4, seed=4))
        assert run1 != run3

    def test_batch_default_and_empty_dir(self, tmp_path):
        assert inspect.signature(unpaired_batches).parameters["batch"].default == 4
        with pytest.raises(EmptyDirectory):
            list(unpaired_batches(tmp_path, tmp_path))


class TestLoad4skst:
    def test_complete_dataset(self, eval_dataset_dir):
        pairs = load_4skst(eval_dataset_dir)
        assert len(pairs) == 25
        assert sum(len(p.sketches) for p in pairs) == 100
        assert [p.shape_index for p in pairs] == list(range(25))
        for pair in pairs:
            assert set(pair.sketches) == {1, 2, 3, 4}

    def test_missing_file_named(self, eval_dataset_dir, tmp_path):
        import shutil

        broken = tmp_path / "broken"
        shutil.copytree(eval_dataset_dir, broken)
        (broken / "style3" / "07.png").unlink()
        with pytest.raises(IncompleteDataset) as excinfo:
            load_4skst(broken)
        assert "style3" in str(excinfo.value) and "07.png" in str(excinfo.value)
