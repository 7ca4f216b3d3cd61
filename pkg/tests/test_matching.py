import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semreg.geometry import (KeypointSet, LabelAlphabet, LabeledPointCloud,
                             apply_transform, random_rigid_transform)
from semreg.matching import (
    Correspondence,
    CorrespondenceSet,
    MatchingGroup,
    build_matching_groups,
    compute_fpfh,
    group_match,
    mask_match,
    score_matrix,
    select_mnn,
    select_nn,
    strict_category_match,
    topk_mask,
)


def _cloud(points, labels=None, names=("ground", "building")):
    points = np.asarray(points, dtype=float)
    if labels is None:
        labels = np.zeros(len(points), dtype=int)
    return LabeledPointCloud(points, labels, LabelAlphabet(tuple(names)))


class TestCorrespondenceSet:
    def test_duplicate_pair_rejected(self):
        with pytest.raises(ValueError):
            CorrespondenceSet((Correspondence(0, 1, 0.5),
                               Correspondence(0, 1, 0.7)))

    def test_as_arrays(self):
        cs = CorrespondenceSet((Correspondence(2, 3, 0.5),
                                Correspondence(0, 1, 0.9)))
        s, d, sc = cs.as_arrays()
        assert s.tolist() == [2, 0] and d.tolist() == [3, 1]
        assert np.allclose(sc, [0.5, 0.9])


class TestFpfh:
    def _scene(self):
        rng = np.random.default_rng(0)
        # two planes meeting at an edge plus a scatter of clutter
        u = rng.uniform(0, 2, size=(400, 2))
        plane_a = np.column_stack([u[:, 0], u[:, 1], np.zeros(400)])
        plane_b = np.column_stack([u[:, 0], np.zeros(400), u[:, 1]])
        clutter = rng.uniform(-1, 3, size=(100, 3)) + [4.0, 0, 0]
        return _cloud(np.vstack([plane_a, plane_b, clutter]))

    def test_shape_and_normalization(self):
        cloud = self._scene()
        kp = KeypointSet(np.arange(0, 40))
        desc = compute_fpfh(cloud, kp, 0.5, 0.8)
        assert desc.values.shape == (40, 33)
        norms = np.linalg.norm(desc.values, axis=1)
        ok = ~desc.degenerate
        assert np.allclose(norms[ok], 1.0)

    def test_rotation_covariance(self):
        cloud = self._scene()
        kp = KeypointSet(np.arange(0, 60))
        T = random_rigid_transform(np.random.default_rng(1))
        d0 = compute_fpfh(cloud, kp, 0.5, 0.8)
        d1 = compute_fpfh(apply_transform(T, cloud), kp, 0.5, 0.8)
        # histograms of rigidly moved geometry stay close (approximately:
        # normal re-estimation and binning shift a little under rotation)
        delta = np.linalg.norm(d0.values - d1.values, axis=1)
        assert np.median(delta) < 0.35

    def test_isolated_keypoint_degenerate(self):
        pts = np.vstack([np.random.default_rng(2).normal(size=(30, 3)),
                         [[100.0, 100.0, 100.0]]])
        cloud = _cloud(pts)
        desc = compute_fpfh(cloud, KeypointSet(np.array([30])), 0.5, 0.8)
        assert desc.degenerate[0]
        assert np.allclose(desc.values[0], 0.0)


class TestScoreMatrix:
    def test_range_and_degenerate_zeroing(self):
        cloud = _cloud(np.random.default_rng(3).normal(size=(50, 3)) * 2)
        a = compute_fpfh(cloud, KeypointSet(np.arange(10)), 1.0, 1.5)
        b = compute_fpfh(cloud, KeypointSet(np.arange(10, 20)), 1.0, 1.5)
        S = score_matrix(a, b)
        assert S.shape == (10, 10)
        assert np.all((S >= 0.0) & (S <= 1.0))


class TestSelectors:
    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_nn_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        S = rng.integers(0, 4, size=(6, 5)).astype(float) / 3.0
        got = {(c.src_index, c.dst_index) for c in select_nn(S)}
        expected = set()
        for i in range(6):
            j = int(np.argmax(S[i]))  # argmax takes the lowest tied column
            if S[i, j] > 0:
                expected.add((i, j))
        assert got == expected

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_mnn_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        S = rng.random((7, 6))
        got = {(c.src_index, c.dst_index) for c in select_mnn(S)}
        expected = {(i, int(np.argmax(S[i]))) for i in range(7)
                    if int(np.argmax(S[:, int(np.argmax(S[i]))])) == i
                    and S[i, int(np.argmax(S[i]))] > 0}
        assert got == expected

    def test_empty_matrix(self):
        assert len(select_nn(np.empty((0, 0)))) == 0
        assert len(select_mnn(np.empty((0, 0)))) == 0


class TestTopkMask:
    @given(st.integers(0, 10_000), st.integers(1, 6))
    @settings(max_examples=40, deadline=None)
    def test_sort_oracle_with_ties(self, seed, k):
        rng = np.random.default_rng(seed)
        sim = rng.integers(0, 5, size=(8, 6))
        mask = topk_mask(sim, k)
        for i in range(8):
            # stable sort on negated values keeps the lowest column on ties
            order = np.argsort(-sim[i], kind="stable")[:k]
            expected = np.zeros(6, dtype=bool)
            expected[order] = True
            assert np.array_equal(mask[i], expected)

    def test_k_larger_than_row(self):
        mask = topk_mask(np.ones((2, 3)), 10)
        assert mask.all()


class TestGroupMatching:
    def test_groups_from_signatures(self):
        alphabet = LabelAlphabet(("a", "b", "c"))
        src = [frozenset({0, 1}), frozenset({1})]
        dst = [frozenset({1, 2}), frozenset({0})]
        groups = build_matching_groups(src, dst, alphabet)
        by_label = {g.anchor_label: g for g in groups}
        assert set(by_label) == {0, 1}  # label 2 has no src member
        assert by_label[0].src_indices.tolist() == [0]
        assert by_label[0].dst_indices.tolist() == [1]
        assert by_label[1].src_indices.tolist() == [0, 1]
        assert by_label[1].dst_indices.tolist() == [0]

    def test_dedup_keeps_max_score(self):
        S = np.array([[0.9, 0.1],
                      [0.2, 0.8]])
        g1 = MatchingGroup(0, np.array([0, 1]), np.array([0, 1]))
        g2 = MatchingGroup(1, np.array([0]), np.array([0]))
        out = group_match([g1, g2], S)
        pairs = {(c.src_index, c.dst_index): c for c in out}
        assert set(pairs) == {(0, 0), (1, 1)}
        assert pairs[(0, 0)].score == pytest.approx(0.9)

    def test_strict_category_blocks_cross_label(self):
        S = np.array([[0.9, 0.5],
                      [0.9, 0.5]])
        out = strict_category_match(S, np.array([0, 1]), np.array([1, 0]))
        pairs = {(c.src_index, c.dst_index) for c in out}
        assert pairs == {(0, 1), (1, 0)}


class TestMaskMatch:
    def test_mask_blocks_high_score_impostor(self):
        # src 0 scores highest with dst 1, but only dst 0 shares its rings
        scores = np.array([[0.6, 0.9]])
        src_bmr = np.zeros((1, 2, 4), dtype=bool)
        dst_bmr = np.zeros((2, 2, 4), dtype=bool)
        src_bmr[0, 0, 0] = True
        dst_bmr[0, 0, 0] = True     # dst 0 similar
        out = mask_match(scores, src_bmr, dst_bmr, k=1)
        assert [(c.src_index, c.dst_index) for c in out] == [(0, 0)]
