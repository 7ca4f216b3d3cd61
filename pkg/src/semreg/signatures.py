"""Local semantic signatures, landmark clustering, ring signatures and saliency.

A local signature is the set of labels occurring within ``r_local`` of a
keypoint. A ring signature is a binary |S| x N matrix marking which landmark
categories fall into which concentric distance ring around a keypoint; it
depends only on distances and is therefore rotation invariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geometry import LabeledPointCloud, SpatialIndex

LocalSignature = frozenset  # set of label ids


@dataclass(frozen=True)
class BmrConfig:
    """Ring layout: ``n_rings`` rings of width ``ring_width``; ring k (1-based)
    spans the half-open interval [(k-1)*width, k*width)."""

    n_rings: int = 33
    ring_width: float = 1.5

    def __post_init__(self):
        if self.n_rings < 1:
            raise ValueError("n_rings must be >= 1")
        if self.ring_width <= 0:
            raise ValueError("ring_width must be positive")

    @property
    def max_radius(self) -> float:
        return self.n_rings * self.ring_width


@dataclass
class LandmarkSet:
    """Cluster centroids with their category labels and member counts."""

    centers: np.ndarray
    labels: np.ndarray
    cluster_sizes: np.ndarray

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 3)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.cluster_sizes = np.asarray(self.cluster_sizes, dtype=np.int64).reshape(-1)
        if not (len(self.centers) == len(self.labels) == len(self.cluster_sizes)):
            raise ValueError("landmark fields must be parallel")

    def __len__(self) -> int:
        return len(self.centers)

    def restrict_to(self, categories) -> "LandmarkSet":
        keep = np.isin(self.labels, np.fromiter(categories, dtype=np.int64))
        return LandmarkSet(self.centers[keep], self.labels[keep], self.cluster_sizes[keep])


@dataclass(frozen=True)
class ClusterParams:
    """Per-category euclidean clustering radius (by category name) and the
    minimum member count for a cluster to become a landmark."""

    radii: dict = field(default_factory=lambda: {
        "pole": 0.5, "traffic-sign": 0.5, "trunk": 0.5, "car": 1.0, "truck": 1.0,
    })
    default_radius: float = 0.5
    min_cluster_size: int = 10

    def radius_for(self, name: str) -> float:
        return self.radii.get(name, self.default_radius)


def compute_local_ss(cloud: LabeledPointCloud, index: SpatialIndex,
                     keypoint, r_local: float) -> LocalSignature:
    """Labels of all cloud points within ``r_local`` (closed ball) of the keypoint."""
    if r_local <= 0:
        raise ValueError(f"r_local must be positive, got {r_local}")
    neigh = index.radius_neighbors(keypoint, r_local)
    return frozenset(np.unique(cloud.labels[neigh]).tolist())


def compute_local_ss_batch(cloud: LabeledPointCloud, index: SpatialIndex,
                           keypoints: np.ndarray, r_local: float) -> list[LocalSignature]:
    if r_local <= 0:
        raise ValueError(f"r_local must be positive, got {r_local}")
    out = []
    for neigh in index.radius_neighbors_batch(keypoints, r_local):
        out.append(frozenset(np.unique(cloud.labels[neigh]).tolist()))
    return out


def ls_consistent(a: LocalSignature, b: LocalSignature) -> bool:
    """Two keypoints are locally consistent iff their signatures intersect."""
    return not a.isdisjoint(b)


def cluster_landmarks(cloud: LabeledPointCloud, params: ClusterParams,
                      categories) -> LandmarkSet:
    """Connected components of each per-category subcloud under that category's
    radius graph; components with >= min_cluster_size points become landmarks
    at their centroid."""
    centers, labels, sizes = [], [], []
    for cat in sorted(categories):
        radius = params.radius_for(cloud.alphabet.names[cat])
        if radius <= 0:
            raise ValueError("clustering radius must be positive")
        mask = cloud.labels == cat
        pts = cloud.points[mask]
        if len(pts) == 0:
            continue
        tree = cKDTree(pts)
        pairs = tree.query_pairs(radius, output_type="ndarray")
        n = len(pts)
        adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        n_comp, comp = connected_components(adj, directed=False)
        counts = np.bincount(comp, minlength=n_comp)
        for c in range(n_comp):
            if counts[c] >= params.min_cluster_size:
                centers.append(pts[comp == c].mean(axis=0))
                labels.append(cat)
                sizes.append(counts[c])
    if not centers:
        return LandmarkSet(np.empty((0, 3)), np.empty(0, dtype=np.int64),
                           np.empty(0, dtype=np.int64))
    return LandmarkSet(np.array(centers), np.array(labels), np.array(sizes))


def voxel_downsample_landmarks(cloud: LabeledPointCloud, voxel: float) -> LandmarkSet:
    """Indoor-mode landmarks: one centroid per occupied voxel, majority label."""
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    if len(cloud) == 0:
        return LandmarkSet(np.empty((0, 3)), np.empty(0, dtype=np.int64),
                           np.empty(0, dtype=np.int64))
    keys = np.floor(cloud.points / voxel).astype(np.int64)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    n_vox = len(counts)
    centers = np.zeros((n_vox, 3))
    np.add.at(centers, inv, cloud.points)
    centers /= counts[:, None]
    n_lab = len(cloud.alphabet)
    hist = np.zeros((n_vox, n_lab), dtype=np.int64)
    np.add.at(hist, (inv, cloud.labels), 1)
    labels = hist.argmax(axis=1)
    return LandmarkSet(centers, labels, counts)


def ring_index(distance: float, cfg: BmrConfig) -> int | None:
    """1-based ring number for a distance, or None beyond the outermost ring."""
    if distance < 0:
        raise ValueError("distance must be non-negative")
    k = int(np.floor(distance / cfg.ring_width)) + 1
    return k if k <= cfg.n_rings else None


def compute_bmr_ss(keypoint, landmarks: LandmarkSet, cfg: BmrConfig,
                   alphabet_size: int) -> np.ndarray:
    """Binary (|S|, N) matrix: bit (t, k) set iff some landmark of category t
    lies in ring k+1 of the keypoint. Landmarks at or beyond N*L are ignored."""
    bits = np.zeros((alphabet_size, cfg.n_rings), dtype=bool)
    if len(landmarks) == 0:
        return bits
    keypoint = np.asarray(keypoint, dtype=np.float64).reshape(3)
    d = np.linalg.norm(landmarks.centers - keypoint, axis=1)
    rings = np.floor(d / cfg.ring_width).astype(np.int64)
    in_range = rings < cfg.n_rings
    bits[landmarks.labels[in_range], rings[in_range]] = True
    return bits


def compute_bmr_ss_batch(keypoints: np.ndarray, landmarks: LandmarkSet,
                         cfg: BmrConfig, alphabet_size: int) -> np.ndarray:
    """Stacked signatures, shape (n_keypoints, |S|, N)."""
    kps = np.asarray(keypoints, dtype=np.float64).reshape(-1, 3)
    out = np.zeros((len(kps), alphabet_size, cfg.n_rings), dtype=bool)
    if len(landmarks) == 0:
        return out
    d = np.linalg.norm(kps[:, None, :] - landmarks.centers[None, :, :], axis=2)
    rings = np.floor(d / cfg.ring_width).astype(np.int64)
    ii, jj = np.nonzero(rings < cfg.n_rings)
    out[ii, landmarks.labels[jj], rings[ii, jj]] = True
    return out


def scene_similarity(a: np.ndarray, b: np.ndarray) -> int:
    """Popcount of the elementwise AND of two binary ring signatures."""
    if a.shape != b.shape:
        raise ValueError(f"signature shapes differ: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(np.logical_and(a, b)))


def scene_similarity_matrix(src_sigs: np.ndarray, dst_sigs: np.ndarray) -> np.ndarray:
    """(|P|, |Q|) integer matrix of pairwise similarities from stacked signatures."""
    if src_sigs.shape[1:] != dst_sigs.shape[1:]:
        raise ValueError("signature dimensions differ")
    a = src_sigs.reshape(len(src_sigs), -1).astype(np.int64)
    b = dst_sigs.reshape(len(dst_sigs), -1).astype(np.int64)
    return a @ b.T


def rws_consistent(a: np.ndarray, b: np.ndarray, t: int, k: int) -> bool:
    """Ring-wise consistency: both signatures carry category t in ring k (1-based)."""
    if a.shape != b.shape:
        raise ValueError("signature shapes differ")
    if not (0 <= t < a.shape[0]):
        raise ValueError(f"label id {t} out of range")
    if not (1 <= k <= a.shape[1]):
        raise ValueError(f"ring {k} out of range")
    return bool(a[t, k - 1] and b[t, k - 1])


def compute_saliency(cloud: LabeledPointCloud, landmarks: LandmarkSet,
                     cfg: BmrConfig) -> np.ndarray:
    """(|S|, N) matrix; entry (t, k) is one minus the fraction of cloud points
    covered by the union of ring-(k+1) shells of the category-t landmarks.

    Dense, frequently-occurring categories cover most of the cloud from any
    ring and score near zero; rare isolated ones score near one.
    """
    if len(cloud) == 0:
        raise ValueError("saliency is undefined for an empty cloud")
    n_lab = len(cloud.alphabet)
    W = np.ones((n_lab, cfg.n_rings))
    if len(landmarks) == 0:
        return W
    tree = cKDTree(cloud.points)
    covered = {}  # (t, k) -> boolean mask over cloud points
    for center, t in zip(landmarks.centers, landmarks.labels):
        idx = np.asarray(tree.query_ball_point(center, cfg.max_radius), dtype=np.int64)
        if len(idx) == 0:
            continue
        d = np.linalg.norm(cloud.points[idx] - center, axis=1)
        rings = np.floor(d / cfg.ring_width).astype(np.int64)
        keep = rings < cfg.n_rings
        for k in np.unique(rings[keep]):
            key = (int(t), int(k))
            if key not in covered:
                covered[key] = np.zeros(len(cloud), dtype=bool)
            covered[key][idx[rings == k]] = True
    for (t, k), mask in covered.items():
        W[t, k] = 1.0 - np.count_nonzero(mask) / len(cloud)
    return W


def select_landmark_categories(cloud: LabeledPointCloud, landmarks: LandmarkSet,
                               cfg: BmrConfig, saliency_threshold: float = 0.5) -> set[int]:
    """Categories whose mean saliency over all rings reaches the threshold,
    minus dynamic-flagged categories."""
    if not (0.0 <= saliency_threshold <= 1.0):
        raise ValueError("saliency_threshold must lie in [0, 1]")
    W = compute_saliency(cloud, landmarks, cfg)
    mean_sal = W.mean(axis=1)
    return {t for t in range(len(cloud.alphabet))
            if mean_sal[t] >= saliency_threshold and not cloud.alphabet.dynamic[t]}
