"""Point cloud containers, spatial indexing, rigid transforms and the SVD alignment kernel."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateInputError

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class LabelAlphabet:
    """Finite semantic label set. ``dynamic`` flags mobile classes excluded from landmarks."""

    names: tuple[str, ...]
    dynamic: tuple[bool, ...] = ()

    def __post_init__(self):
        if len(self.names) < 1:
            raise ValueError("alphabet must contain at least one category")
        if len(set(self.names)) != len(self.names):
            raise ValueError("category names must be unique")
        if not self.dynamic:
            object.__setattr__(self, "dynamic", (False,) * len(self.names))
        if len(self.dynamic) != len(self.names):
            raise ValueError("dynamic flags must parallel names")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass
class LabeledPointCloud:
    """(N, 3) float points with a parallel integer label per point."""

    points: np.ndarray
    labels: np.ndarray
    alphabet: LabelAlphabet

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.points) != len(self.labels):
            raise ValueError("points and labels must have equal length")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("point coordinates must be finite")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.alphabet)):
            raise ValueError("label id outside alphabet")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class KeypointSet:
    """Unique indices into a LabeledPointCloud."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if len(np.unique(idx)) != len(idx):
            raise ValueError("keypoint indices must be unique")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)


class SpatialIndex:
    """Read-only radius-query structure over a fixed point sequence.

    Contract: a radius query returns exactly the indices a linear scan over the
    same points would, in ascending order.
    """

    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise ValueError("points must be finite")
        self._points = points
        self._tree = cKDTree(points) if len(points) else None

    @property
    def points(self) -> np.ndarray:
        return self._points

    def radius_neighbors(self, center, r: float) -> np.ndarray:
        if r < 0:
            raise ValueError(f"radius must be non-negative, got {r}")
        if self._tree is None:
            return np.empty(0, dtype=np.int64)
        center = np.asarray(center, dtype=np.float64).reshape(3)
        idx = self._tree.query_ball_point(center, r)
        return np.sort(np.asarray(idx, dtype=np.int64))

    def radius_neighbors_batch(self, centers: np.ndarray, r: float) -> list[np.ndarray]:
        if r < 0:
            raise ValueError(f"radius must be non-negative, got {r}")
        centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
        if self._tree is None:
            return [np.empty(0, dtype=np.int64) for _ in range(len(centers))]
        out = self._tree.query_ball_point(centers, r)
        return [np.sort(np.asarray(ix, dtype=np.int64)) for ix in out]


def build_spatial_index(points: np.ndarray) -> SpatialIndex:
    return SpatialIndex(points)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation; rotation must be a proper orthonormal matrix."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.abs(R.T @ R - np.eye(3)).max() > _ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)


def apply_transform(transform: RigidTransform, cloud: LabeledPointCloud) -> LabeledPointCloud:
    return LabeledPointCloud(transform.apply(cloud.points), cloud.labels.copy(), cloud.alphabet)


def kabsch(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares rigid alignment mapping src onto dst (reflection excluded).

    Raises DegenerateInputError for < 3 pairs or a rank-deficient (e.g. collinear)
    configuration, detected via the cross-covariance singular-value spread.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if src.shape != dst.shape:
        raise ValueError("src and dst must have the same shape")
    if len(src) < 3:
        raise DegenerateInputError(f"need at least 3 point pairs, got {len(src)}")

    c_src = src.mean(axis=0)
    c_dst = dst.mean(axis=0)
    H = (src - c_src).T @ (dst - c_dst)
    U, S, Vt = np.linalg.svd(H)
    # Rank-2 cross-covariance still yields a unique rotation; rank < 2 does not.
    if S[1] < 1e-12 * max(S[0], 1e-300):
        raise DegenerateInputError("degenerate point configuration (collinear or coincident)")
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    # Re-orthonormalize to keep the invariant tight under accumulated rounding.
    Ur, _, Vtr = np.linalg.svd(R)
    R = Ur @ Vtr
    if np.linalg.det(R) < 0:
        R = Ur @ np.diag([1.0, 1.0, -1.0]) @ Vtr
    t = c_dst - R @ c_src
    return RigidTransform(R, t)


def rotation_about_axis(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle_rad) * K + (1 - np.cos(angle_rad)) * (K @ K)


def random_rigid_transform(rng: np.random.Generator, max_translation: float = 10.0) -> RigidTransform:
    """Uniform random rotation (QR of a gaussian matrix) plus a bounded translation."""
    A = rng.standard_normal((3, 3))
    Q, Rm = np.linalg.qr(A)
    Q = Q @ np.diag(np.sign(np.diag(Rm)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    t = rng.uniform(-max_translation, max_translation, 3)
    return RigidTransform(Q, t)
