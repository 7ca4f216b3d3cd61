import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semreg.errors import DegenerateInputError
from semreg.geometry import (
    KeypointSet,
    LabelAlphabet,
    LabeledPointCloud,
    RigidTransform,
    apply_transform,
    build_spatial_index,
    kabsch,
    random_rigid_transform,
    rotation_about_axis,
)


class TestLabelAlphabet:
    def test_basic(self):
        a = LabelAlphabet(("a", "b"))
        assert len(a) == 2
        assert a.index("b") == 1
        assert a.dynamic == (False, False)

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            LabelAlphabet(("a", "a"))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            LabelAlphabet(())

    def test_dynamic_length_mismatch(self):
        with pytest.raises(ValueError):
            LabelAlphabet(("a", "b"), (True,))


class TestLabeledPointCloud:
    def test_length_mismatch(self, alphabet):
        with pytest.raises(ValueError):
            LabeledPointCloud(np.zeros((3, 3)), np.zeros(2, dtype=int), alphabet)

    def test_nonfinite_rejected(self, alphabet):
        pts = np.zeros((2, 3))
        pts[0, 0] = np.nan
        with pytest.raises(ValueError):
            LabeledPointCloud(pts, np.zeros(2, dtype=int), alphabet)

    def test_label_out_of_range(self, alphabet):
        with pytest.raises(ValueError):
            LabeledPointCloud(np.zeros((1, 3)), np.array([len(alphabet)]), alphabet)

    def test_dtype_coercion(self, alphabet):
        c = LabeledPointCloud(np.zeros((2, 3), dtype=np.float32),
                              np.zeros(2, dtype=np.int32), alphabet)
        assert c.points.dtype == np.float64
        assert c.labels.dtype == np.int64


class TestKeypointSet:
    def test_duplicate_rejected(self):
        with pytest.raises(ValueError):
            KeypointSet(np.array([1, 1, 2]))

    def test_len(self):
        assert len(KeypointSet(np.array([3, 1, 2]))) == 3


class TestSpatialIndex:
    def test_matches_linear_scan(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-2, 2, size=(300, 3))
        index = build_spatial_index(pts)
        for _ in range(50):
            center = rng.uniform(-2, 2, size=3)
            r = rng.uniform(0.1, 2.0)
            expected = np.flatnonzero(np.linalg.norm(pts - center, axis=1) <= r)
            got = index.radius_neighbors(center, r)
            assert np.array_equal(got, expected)

    def test_result_sorted_ascending(self):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=(100, 3))
        idx = build_spatial_index(pts).radius_neighbors(np.zeros(3), 1.5)
        assert np.all(np.diff(idx) > 0)

    def test_negative_radius_rejected(self):
        index = build_spatial_index(np.zeros((1, 3)))
        with pytest.raises(ValueError):
            index.radius_neighbors(np.zeros(3), -0.1)

    def test_empty_index(self):
        index = build_spatial_index(np.empty((0, 3)))
        assert len(index.radius_neighbors(np.zeros(3), 1.0)) == 0

    def test_batch_agrees_with_single(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(80, 3))
        index = build_spatial_index(pts)
        centers = rng.normal(size=(10, 3))
        batch = index.radius_neighbors_batch(centers, 1.0)
        for c, b in zip(centers, batch):
            assert np.array_equal(b, index.radius_neighbors(c, 1.0))


class TestRigidTransform:
    def test_identity(self):
        T = RigidTransform.identity()
        pts = np.random.default_rng(0).normal(size=(5, 3))
        assert np.allclose(T.apply(pts), pts)

    def test_non_orthogonal_rejected(self):
        with pytest.raises(ValueError):
            RigidTransform(np.eye(3) * 2.0, np.zeros(3))

    def test_reflection_rejected(self):
        R = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            RigidTransform(R, np.zeros(3))

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_inverse_roundtrip(self, seed):
        rng = np.random.default_rng(seed)
        T = random_rigid_transform(rng)
        pts = rng.normal(size=(20, 3))
        assert np.allclose(T.inverse().apply(T.apply(pts)), pts, atol=1e-9)

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_compose(self, seed):
        rng = np.random.default_rng(seed)
        A = random_rigid_transform(rng)
        B = random_rigid_transform(rng)
        pts = rng.normal(size=(10, 3))
        assert np.allclose(A.compose(B).apply(pts), A.apply(B.apply(pts)), atol=1e-9)

    def test_apply_transform_keeps_labels(self, random_cloud):
        T = random_rigid_transform(np.random.default_rng(3))
        out = apply_transform(T, random_cloud)
        assert np.array_equal(out.labels, random_cloud.labels)
        assert np.allclose(out.points, T.apply(random_cloud.points))


class TestKabsch:
    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_exact_recovery(self, seed):
        rng = np.random.default_rng(seed)
        T = random_rigid_transform(rng)
        src = rng.normal(size=(30, 3))
        est = kabsch(src, T.apply(src))
        assert np.allclose(est.rotation, T.rotation, atol=1e-9)
        assert np.allclose(est.translation, T.translation, atol=1e-9)

    def test_too_few_pairs(self):
        with pytest.raises(ValueError):
            kabsch(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_collinear_degenerate(self):
        src = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]])
        with pytest.raises(DegenerateInputError):
            kabsch(src, src + 1.0)

    def test_proper_rotation_output(self):
        rng = np.random.default_rng(7)
        src = rng.normal(size=(10, 3))
        dst = T = random_rigid_transform(rng).apply(src) + rng.normal(scale=0.01, size=(10, 3))
        est = kabsch(src, dst)
        assert np.isclose(np.linalg.det(est.rotation), 1.0, atol=1e-9)


class TestRotationAboutAxis:
    def test_orthonormal(self):
        R = rotation_about_axis(np.array([1.0, 2.0, 3.0]), 0.7)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.isclose(np.linalg.det(R), 1.0)

    def test_full_turn_is_identity(self):
        R = rotation_about_axis(np.array([0.0, 0.0, 1.0]), 2 * np.pi)
        assert np.allclose(R, np.eye(3), atol=1e-12)
