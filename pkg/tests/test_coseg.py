import itertools

import numpy as np
import pytest

from conftest import coseg_pair, coseg_scribbles

from cdseg.coseg import (
    ImageScribble,
    apply_labels,
    build_multi_image_graph,
    chi_squared_distances,
    combine,
    color_cross_similarity,
    coseg_interactive,
    coseg_unsupervised,
    descriptor_similarity,
    hog_similarity,
    intra_image_geodesic_similarity,
    objectness_affinity,
    objectness_scores,
    orientation_histograms,
    transform_distances,
    validate_scores,
)
from cdseg.errors import PipelineError
from cdseg.metrics import jaccard
from cdseg.superpixels import grid_superpixels, validate_label_map

S = np.sqrt(0.5)


class TestTransformDistances:
    def test_hand_example(self):
        out = transform_distances(np.array([[1.0, 3.0], [2.0, 4.0]]))
        assert np.allclose(out, [[1.0, 1 / 3], [2 / 3, 0.0]])

    def test_reverses_order(self):
        d = np.array([[0.0, 0.2, 0.9], [0.2, 0.0, 0.5], [0.9, 0.5, 0.0]])
        out = transform_distances(d)
        order_d = np.argsort(d.ravel())
        order_s = np.argsort(-out.ravel())
        assert np.array_equal(order_d, order_s)

    def test_constant_block_warns_zero(self):
        with pytest.warns(RuntimeWarning, match="constant"):
            out = transform_distances(np.full((3, 3), 2.5))
        assert np.array_equal(out, np.zeros((3, 3)))


class TestChiSquared:
    def test_hand_example(self):
        h = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
        d = chi_squared_distances(h, h)
        expected = np.array([[0, 1, 1 / 3], [1, 0, 1 / 3], [1 / 3, 1 / 3, 0]])
        assert np.allclose(d, expected, atol=1e-9)

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(13)
        h = rng.random((6, 8))
        h /= h.sum(axis=1, keepdims=True)
        d = chi_squared_distances(h, h)
        assert np.allclose(d, d.T)
        assert (d >= 0).all()
        assert np.allclose(np.diag(d), 0.0)


class TestHogSimilarity:
    def test_hand_example(self):
        h = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
        out = hog_similarity(h, h)
        expected = np.array([[1, 0, 2 / 3], [0, 1, 2 / 3], [2 / 3, 2 / 3, 1]])
        assert np.allclose(out, expected, atol=1e-9)


class TestColorCross:
    def test_nearest_pair_strongest(self):
        fi = np.array([[0.0, 0.0], [1.0, 1.0]])
        fj = np.array([[0.1, 0.0], [5.0, 5.0]])
        out = color_cross_similarity(fi, fj)
        assert out.shape == (2, 2)
        assert out[0, 0] == 1.0  # closest pair
        assert out[0, 1] == 0.0  # farthest pair


class TestGeodesicSimilarity:
    def test_three_chain_hand_example(self):
        sp = validate_label_map(np.array([[0, 1, 2], [0, 1, 2]]))
        feats = np.array([[0.0], [1.0], [3.0]])
        out = intra_image_geodesic_similarity(sp, feats)
        expected = np.array([[0, 1, 0], [1, 0, 2 / 3], [0, 2 / 3, 0]])
        assert np.allclose(out, expected)

    def test_identical_adjacent_regions_get_max(self):
        sp = validate_label_map(np.array([[0, 1, 2], [0, 1, 2]]))
        feats = np.array([[1.0], [1.0], [3.0]])
        out = intra_image_geodesic_similarity(sp, feats)
        assert out[0, 1] == 1.0
        assert out[1, 2] < 1.0

    def test_custom_edge_distance(self):
        sp = validate_label_map(np.array([[0, 1, 2], [0, 1, 2]]))
        out = intra_image_geodesic_similarity(
            sp, np.zeros((3, 1)), edge_distance=lambda a, b: 1.0
        )
        assert out[0, 1] == out[1, 2] == 1.0
        assert out[0, 2] == 0.0

    def test_six_region_matches_exhaustive_paths(self):
        sp = grid_superpixels((12, 18), 6)  # 2x3 tile grid
        rng = np.random.default_rng(23)
        feats = rng.random((6, 3))

        weight = {}
        for a, b in sp.adjacency:
            weight[(a, b)] = weight[(b, a)] = float(np.linalg.norm(feats[a] - feats[b]))

        def shortest(a, b):
            best = np.inf
            for k in range(2, 7):
                for mid in itertools.permutations(set(range(6)) - {a, b}, k - 2):
                    path = (a, *mid, b)
                    if all((u, v) in weight for u, v in zip(path, path[1:])):
                        best = min(best, sum(weight[(u, v)] for u, v in zip(path, path[1:])))
            return best

        dist = np.zeros((6, 6))
        for a in range(6):
            for b in range(6):
                if a != b:
                    dist[a, b] = shortest(a, b)
        off = dist[~np.eye(6, dtype=bool)]
        local = off.max() - dist + off.min()
        gate = np.zeros((6, 6), dtype=bool)
        for a, b in sp.adjacency:
            gate[a, b] = gate[b, a] = True
        local[~gate] = 0.0
        np.fill_diagonal(local, 0.0)
        expected = local / local.max()

        out = intra_image_geodesic_similarity(sp, feats)
        assert np.allclose(out, expected)

    def test_single_region_all_zero(self):
        sp = validate_label_map(np.zeros((3, 3), dtype=int))
        out = intra_image_geodesic_similarity(sp, np.zeros((1, 2)))
        assert np.array_equal(out, np.zeros((1, 1)))

    def test_feature_count_checked(self):
        sp = validate_label_map(np.array([[0, 1], [0, 1]]))
        with pytest.raises(PipelineError):
            intra_image_geodesic_similarity(sp, np.zeros((3, 2)))


class TestDescriptorSimilarity:
    def test_intra_block(self):
        a = np.array([[1.0, 0.0], [0.0, 1.0], [S, S]])
        out = descriptor_similarity(a)
        assert np.allclose(out, [[0, 0, S], [0, 0, S], [S, S, 0]])

    def test_intra_adjacency_gate(self):
        a = np.array([[1.0, 0.0], [0.0, 1.0], [S, S]])
        out = descriptor_similarity(a, adjacency=((0, 2),))
        assert np.allclose(out, [[0, 0, S], [0, 0, 0], [S, 0, 0]])

    def test_cross_block_clamps_negatives(self):
        a = np.array([[1.0, 0.0], [0.0, 1.0], [S, S]])
        b = np.array([[1.0, 0.0], [-1.0, 0.0]])
        out = descriptor_similarity(a, b)
        assert np.allclose(out, [[1, 0], [0, 0], [S, 0]])

    def test_zero_norm_rows_warn(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        with pytest.warns(RuntimeWarning, match="zero-norm"):
            out = descriptor_similarity(a)
        assert np.allclose(out[0], 0.0)


class TestOrientationHistograms:
    def test_dominant_bin_rolled_first(self):
        rng = np.random.default_rng(31)
        img = rng.random((16, 16, 3))
        sp = grid_superpixels((16, 16), 4)
        hist = orientation_histograms(img, sp)
        assert hist.shape == (4, 16)
        assert np.array_equal(np.argmax(hist, axis=1), np.zeros(4, dtype=np.int64))

    def test_quarter_rotation_invariance(self):
        rng = np.random.default_rng(41)
        img = rng.random((20, 20, 3))
        sp = grid_superpixels((20, 20), 1)
        h0 = orientation_histograms(img, sp)
        h1 = orientation_histograms(np.rot90(img).copy(), sp)
        assert np.allclose(h0, h1, rtol=1e-9, atol=1e-12)

    def test_flat_regions_warn_zero(self):
        img = np.full((12, 12, 3), 0.7)
        sp = grid_superpixels((12, 12), 4)
        with pytest.warns(RuntimeWarning, match="gradient energy"):
            hist = orientation_histograms(img, sp)
        assert np.array_equal(hist, np.zeros((4, 16)))

    def test_custom_bin_count(self):
        rng = np.random.default_rng(3)
        img = rng.random((8, 8, 3))
        sp = grid_superpixels((8, 8), 1)
        assert orientation_histograms(img, sp, bins=8).shape == (1, 8)

    def test_shape_mismatch_rejected(self):
        sp = grid_superpixels((8, 8), 1)
        with pytest.raises(PipelineError):
            orientation_histograms(np.zeros((9, 9, 3)), sp)


class TestObjectness:
    def test_interior_region_fully_foreground(self):
        sp = grid_superpixels((6, 6), 9)  # 3x3 tiles; center touches no border
        p_b, p_f = objectness_scores(sp)
        expected_b = np.array([1, 0.5, 1, 0.5, 0, 0.5, 1, 0.5, 1])
        assert np.allclose(p_b, expected_b)
        assert np.allclose(p_f, 1 - expected_b)

    def test_validate_scores_passthrough(self):
        p_b, p_f = validate_scores([0.0, 0.25, 1.0])
        assert np.allclose(p_b, [0, 0.25, 1])
        assert np.allclose(p_f, [1, 0.75, 0])

    def test_validate_scores_rejects_bad_input(self):
        with pytest.raises(PipelineError):
            validate_scores([0.5, 1.5])
        with pytest.raises(PipelineError):
            validate_scores([[0.5], [0.5]])
        with pytest.raises(PipelineError):
            validate_scores([0.5, np.nan])

    def test_affinity_outer_product(self):
        out = objectness_affinity(np.array([0.0, 0.5, 1.0]))
        assert np.allclose(out, [[0, 0, 0], [0, 0, 0.5], [0, 0.5, 0]])


class TestCombine:
    def test_hand_example(self):
        a_m = np.array([[0.0, 1.0], [1.0, 0.0]])
        rest = np.array([[0.0, 0.6], [0.6, 0.0]])
        out = combine(a_m, rest, rest, rest)
        assert np.allclose(out, [[0, 0.8], [0.8, 0]])

    def test_objectness_weight_is_half(self):
        a = np.array([[0.0, 0.4], [0.4, 0.0]])
        zero = np.zeros((2, 2))
        assert np.allclose(combine(a, zero, zero, zero), 0.5 * a)
        assert np.allclose(combine(zero, a, zero, zero), a / 6.0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(PipelineError):
            combine(np.zeros((2, 2)), np.zeros((3, 3)), np.zeros((2, 2)), np.zeros((2, 2)))


def small_pair(seed=19):
    rng = np.random.default_rng(seed)
    images = [rng.random((12, 12, 3)), rng.random((12, 12, 3))]
    maps = [grid_superpixels((12, 12), 4), grid_superpixels((12, 12), 4)]
    return images, maps


class TestBuildMultiImageGraph:
    def test_block_layout_and_invariants(self):
        images, maps = small_pair()
        graph = build_multi_image_graph(images, maps)
        assert graph.total == 8
        assert graph.offsets == (0, 4)
        for channel in (graph.color, graph.descriptor, graph.hog, graph.objectness,
                        graph.combined):
            assert channel.shape == (8, 8)
            assert np.array_equal(channel, channel.T)
            assert np.allclose(np.diag(channel), 0.0)
            assert channel.min() >= 0.0 and channel.max() <= 1.0

    def test_combined_is_weighted_sum(self):
        images, maps = small_pair()
        graph = build_multi_image_graph(images, maps)
        expected = combine(graph.objectness, graph.color, graph.descriptor, graph.hog)
        assert np.allclose(graph.combined, expected)

    def test_objectness_channel_from_p_f(self):
        images, maps = small_pair()
        graph = build_multi_image_graph(images, maps)
        assert np.allclose(graph.objectness, objectness_affinity(graph.p_f))

    def test_global_local_id_roundtrip(self):
        images, maps = small_pair()
        graph = build_multi_image_graph(images, maps)
        assert graph.global_ids(0) == (0, 1, 2, 3)
        assert graph.global_ids(1) == (4, 5, 6, 7)
        assert graph.global_ids(1, [2, 3]) == (6, 7)
        assert graph.local_regions(1, [0, 3, 5, 6]) == (1, 2)
        with pytest.raises(PipelineError):
            graph.global_ids(0, [4])

    def test_external_descriptors_checked(self):
        images, maps = small_pair()
        with pytest.raises(PipelineError):
            build_multi_image_graph(images, maps, descriptors=[np.ones((3, 5)), np.ones((4, 5))])

    def test_external_backgroundness_checked(self):
        images, maps = small_pair()
        with pytest.raises(PipelineError):
            build_multi_image_graph(images, maps, backgroundness=[np.full(4, 0.5)])
        with pytest.raises(PipelineError):
            build_multi_image_graph(
                images, maps, backgroundness=[np.full(4, 0.5), np.full(4, 2.0)]
            )

    def test_image_map_count_mismatch(self):
        images, maps = small_pair()
        with pytest.raises(PipelineError):
            build_multi_image_graph(images, maps[:1])


class TestApplyLabels:
    def test_cross_label_edges_zeroed(self):
        a = 1.0 - np.eye(4)
        out = apply_labels(a, [0, 1], [3])
        assert out[0, 3] == out[3, 0] == out[1, 3] == out[3, 1] == 0.0
        assert out[0, 1] == out[2, 3] == 1.0

    def test_idempotent(self):
        a = 1.0 - np.eye(4)
        once = apply_labels(a, [0], [2])
        twice = apply_labels(once, [0], [2])
        assert np.array_equal(once, twice)

    def test_one_sided_labels_change_nothing(self):
        a = 1.0 - np.eye(3)
        assert np.array_equal(apply_labels(a, [0], []), a)
        assert np.array_equal(apply_labels(a, [], [1]), a)

    def test_input_not_mutated(self):
        a = 1.0 - np.eye(3)
        snapshot = a.copy()
        apply_labels(a, [0], [2])
        assert np.array_equal(a, snapshot)

    def test_overlap_rejected(self):
        with pytest.raises(PipelineError):
            apply_labels(np.zeros((3, 3)), [0, 1], [1, 2])


class TestUnsupervisedMode:
    def test_requires_exactly_two_images(self):
        images, maps = small_pair()
        with pytest.raises(PipelineError):
            coseg_unsupervised(images[:1], maps[:1])
        with pytest.raises(PipelineError):
            coseg_unsupervised(images + [images[0]], maps + [maps[0]])

    def test_duplicated_image_gives_identical_masks(self):
        images, maps, _ = coseg_pair(seed=1)
        result = coseg_unsupervised([images[0], images[0]], [maps[0], maps[0]])
        assert np.array_equal(result.masks[0], result.masks[1])
        assert result.foreground_regions[0] == result.foreground_regions[1]


class TestInteractiveMode:
    def test_single_image_scribbles_recover_object(self):
        images, maps, gt = coseg_pair(seed=1)
        fg, bg = coseg_scribbles(gt)
        result = coseg_interactive([images[0]], [maps[0]], [ImageScribble(0, fg, bg)])
        assert not result.empty
        assert jaccard(result.masks[0], gt) >= 0.9
        assert np.array_equal(
            result.masks[0], maps[0].mask_of(result.foreground_regions[0])
        )

    def test_scribbles_required(self):
        images, maps = small_pair()
        with pytest.raises(PipelineError):
            coseg_interactive(images, maps, [])

    def test_image_index_checked(self):
        images, maps = small_pair()
        scribble = ImageScribble(5, np.array([[1, 1]]), np.array([[10, 10]]))
        with pytest.raises(PipelineError):
            coseg_interactive(images, maps, [scribble])

    def test_both_sides_required(self):
        images, maps = small_pair()
        empty = np.zeros((0, 2), dtype=np.int64)
        scribble = ImageScribble(0, np.array([[1, 1]]), empty)
        with pytest.raises(PipelineError, match="foreground and background"):
            coseg_interactive(images, maps, [scribble])

    def test_same_region_both_labels_aborts(self):
        images, maps = small_pair()
        scribble = ImageScribble(0, np.array([[1, 1]]), np.array([[2, 2]]))
        with pytest.raises(PipelineError, match="both foreground and background"):
            coseg_interactive(images, maps, [scribble])
