"""Descriptors, score matrices, baseline matchers, group matching and mask matching.

The full pipeline restricts matching to label-sharing groups (suppressing
inter-class mismatches) and, within each group, gates the descriptor score
matrix by a per-row top-K mask over ring-signature scene similarity
(suppressing intra-class mismatches).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import (KeypointSet, LabeledPointCloud, SpatialIndex,
                       build_spatial_index)
from .signatures import (BmrConfig, ClusterParams, LandmarkSet, LocalSignature,
                         cluster_landmarks, compute_bmr_ss_batch,
                         compute_local_ss_batch, scene_similarity_matrix,
                         select_landmark_categories, voxel_downsample_landmarks)

MIN_DESCRIPTOR_NEIGHBORS = 5


@dataclass
class DescriptorSet:
    """L2-normalized descriptor rows; ``degenerate`` marks keypoints with too
    few neighbors whose rows are zero and never matched."""

    values: np.ndarray
    degenerate: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.degenerate = np.asarray(self.degenerate, dtype=bool).reshape(-1)
        if self.values.ndim != 2 or len(self.values) != len(self.degenerate):
            raise ValueError("values must be (n, d) with parallel degenerate flags")

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Correspondence:
    src_index: int
    dst_index: int
    score: float
    group_label: Optional[int] = None


@dataclass
class CorrespondenceSet:
    """Deduplicated (src, dst) pairs with scores and group provenance."""

    items: tuple

    def __post_init__(self):
        pairs = [(c.src_index, c.dst_index) for c in self.items]
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate (src, dst) pairs")
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.items:
            z = np.empty(0, dtype=np.int64)
            return z, z.copy(), np.empty(0)
        src = np.array([c.src_index for c in self.items], dtype=np.int64)
        dst = np.array([c.dst_index for c in self.items], dtype=np.int64)
        sc = np.array([c.score for c in self.items])
        return src, dst, sc


Matcher = Callable[[np.ndarray], CorrespondenceSet]


def _pca_normals(points: np.ndarray, index: SpatialIndex, queries: np.ndarray,
                 radius: float) -> np.ndarray:
    """Smallest-eigenvector normals, oriented away from the local centroid."""
    normals = np.zeros((len(queries), 3))
    for i, neigh in enumerate(index.radius_neighbors_batch(queries, radius)):
        if len(neigh) < 3:
            normals[i] = (0.0, 0.0, 1.0)
            continue
        nb = points[neigh]
        centered = nb - nb.mean(axis=0)
        cov = centered.T @ centered
        w, v = np.linalg.eigh(cov)
        n = v[:, 0]
        # Deterministic, rotation-covariant orientation.
        if n @ (nb.mean(axis=0) - queries[i]) > 0:
            n = -n
        normals[i] = n
    return normals


def compute_fpfh(cloud: LabeledPointCloud, keypoints: KeypointSet,
                 normal_radius: float, feature_radius: float,
                 index: Optional[SpatialIndex] = None) -> DescriptorSet:
    """Simplified 33-D point-feature histograms at the keypoints.

    Per keypoint: PCA normals in ``normal_radius`` neighborhoods, then the
    standard Darboux angle triple (alpha, phi, theta) against every neighbor
    within ``feature_radius``, binned 11 ways per angle with 1/distance
    weights and concatenated. Keypoints with fewer than 5 neighbors get a
    zero row flagged degenerate.
    """
    if normal_radius <= 0 or feature_radius <= 0:
        raise ValueError("descriptor radii must be positive")
    if len(cloud) == 0:
        raise ValueError("cloud must be nonempty")
    if index is None:
        index = build_spatial_index(cloud.points)
    pts = cloud.points
    kp_xyz = pts[keypoints.indices]

    neighborhoods = index.radius_neighbors_batch(kp_xyz, feature_radius)
    needed = sorted({j for neigh in neighborhoods for j in neigh.tolist()}
                    | set(keypoints.indices.tolist()))
    needed_pos = {j: i for i, j in enumerate(needed)}
    normals = _pca_normals(pts, index, pts[np.array(needed, dtype=np.int64)], normal_radius)

    n_bins = 11
    values = np.zeros((len(keypoints), 3 * n_bins))
    degenerate = np.zeros(len(keypoints), dtype=bool)
    for i, (kp_idx, neigh) in enumerate(zip(keypoints.indices, neighborhoods)):
        neigh = neigh[neigh != kp_idx]
        if len(neigh) < MIN_DESCRIPTOR_NEIGHBORS:
            degenerate[i] = True
            continue
        p = pts[kp_idx]
        ns = normals[needed_pos[int(kp_idx)]]
        q = pts[neigh]
        nt = normals[[needed_pos[int(j)] for j in neigh]]
        diff = q - p
        d = np.linalg.norm(diff, axis=1)
        valid = d > 1e-12
        diff, d, nt = diff[valid], d[valid], nt[valid]
        if len(d) < MIN_DESCRIPTOR_NEIGHBORS:
            degenerate[i] = True
            continue
        u = ns
        dn = diff / d[:, None]
        v = np.cross(dn, np.broadcast_to(u, dn.shape))
        vnorm = np.linalg.norm(v, axis=1)
        vnorm[vnorm < 1e-12] = 1.0
        v = v / vnorm[:, None]
        w = np.cross(np.broadcast_to(u, v.shape), v)
        alpha = np.einsum("ij,ij->i", v, nt)
        phi = dn @ u
        theta = np.arctan2(np.einsum("ij,ij->i", w, nt), nt @ u)
        weights = 1.0 / d
        hist = np.concatenate([
            np.histogram(alpha, bins=n_bins, range=(-1.0, 1.0), weights=weights)[0],
            np.histogram(phi, bins=n_bins, range=(-1.0, 1.0), weights=weights)[0],
            np.histogram(theta, bins=n_bins, range=(-np.pi, np.pi), weights=weights)[0],
        ])
        norm = np.linalg.norm(hist)
        if norm > 0:
            values[i] = hist / norm
        else:
            degenerate[i] = True
    return DescriptorSet(values, degenerate)


def score_matrix(src: DescriptorSet, dst: DescriptorSet) -> np.ndarray:
    """Cosine similarity mapped to [0, 1]; degenerate rows/columns score zero."""
    if src.dimension != dst.dimension:
        raise ValueError(f"descriptor dimensions differ: {src.dimension} vs {dst.dimension}")
    scores = np.clip((1.0 + src.values @ dst.values.T) / 2.0, 0.0, 1.0)
    scores[src.degenerate, :] = 0.0
    scores[:, dst.degenerate] = 0.0
    return scores


def select_nn(scores: np.ndarray, group_label: Optional[int] = None) -> CorrespondenceSet:
    """Per-row argmax, ties to the lowest column index; rows with no positive
    surviving score yield no correspondence."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        return CorrespondenceSet(())
    cols = scores.argmax(axis=1)
    best = scores[np.arange(len(scores)), cols]
    items = [Correspondence(i, int(j), float(s), group_label)
             for i, (j, s) in enumerate(zip(cols, best)) if s > 0.0]
    return CorrespondenceSet(tuple(items))


def select_mnn(scores: np.ndarray, group_label: Optional[int] = None) -> CorrespondenceSet:
    """Mutual nearest neighbor: keep (i, j) when j is row i's argmax and i is
    column j's argmax."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        return CorrespondenceSet(())
    row_best = scores.argmax(axis=1)
    col_best = scores.argmax(axis=0)
    items = []
    for i, j in enumerate(row_best):
        s = scores[i, j]
        if s > 0.0 and col_best[j] == i:
            items.append(Correspondence(i, int(j), float(s), group_label))
    return CorrespondenceSet(tuple(items))


@dataclass(frozen=True)
class MatchingGroup:
    """Source/target keypoint subsets whose local signatures share one label."""

    anchor_label: int
    src_indices: np.ndarray
    dst_indices: np.ndarray


def build_matching_groups(src_sigs: Sequence[LocalSignature],
                          dst_sigs: Sequence[LocalSignature],
                          alphabet) -> list[MatchingGroup]:
    """One group per label containing every keypoint whose signature holds it;
    groups empty on either side are dropped."""
    groups = []
    for t in range(len(alphabet)):
        src = np.array([i for i, s in enumerate(src_sigs) if t in s], dtype=np.int64)
        dst = np.array([j for j, s in enumerate(dst_sigs) if t in s], dtype=np.int64)
        if len(src) and len(dst):
            groups.append(MatchingGroup(t, src, dst))
    return groups


def _dedup_max_score(items) -> CorrespondenceSet:
    best: dict[tuple[int, int], Correspondence] = {}
    for c in items:
        key = (c.src_index, c.dst_index)
        if key not in best or c.score > best[key].score:
            best[key] = c
    ordered = sorted(best.values(), key=lambda c: (c.src_index, c.dst_index))
    return CorrespondenceSet(tuple(ordered))


def group_match(groups: Sequence[MatchingGroup], scores: np.ndarray,
                matcher: Matcher = select_nn) -> CorrespondenceSet:
    """Run the matcher on each group's score submatrix and merge, keeping the
    highest-scoring instance of any repeated pair."""
    collected = []
    for g in groups:
        sub = scores[np.ix_(g.src_indices, g.dst_indices)]
        for c in matcher(sub):
            collected.append(Correspondence(int(g.src_indices[c.src_index]),
                                            int(g.dst_indices[c.dst_index]),
                                            c.score, g.anchor_label))
    return _dedup_max_score(collected)


def topk_mask(sim: np.ndarray, k: int) -> np.ndarray:
    """Binary mask keeping the K largest entries of each row (ties at the
    cutoff go to the lowest column index); short rows are fully kept."""
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    sim = np.asarray(sim)
    mask = np.zeros(sim.shape, dtype=bool)
    if sim.size == 0:
        return mask
    if k >= sim.shape[1]:
        mask[:] = True
        return mask
    order = np.argsort(-sim, axis=1, kind="stable")
    np.put_along_axis(mask, order[:, :k], True, axis=1)
    return mask


def mask_match(scores: np.ndarray, src_bmr: np.ndarray, dst_bmr: np.ndarray,
               k: int, matcher: Matcher = select_nn,
               group_label: Optional[int] = None) -> CorrespondenceSet:
    """Gate the score matrix by the per-row top-K scene-similarity mask, then
    run the matcher on the masked scores."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (len(src_bmr), len(dst_bmr)):
        raise ValueError("score matrix shape inconsistent with signature counts")
    sim = scene_similarity_matrix(src_bmr, dst_bmr)
    mask = topk_mask(sim, k)
    return matcher(scores * mask) if group_label is None else \
        _relabel(matcher(scores * mask), group_label)


def _relabel(cs: CorrespondenceSet, label: int) -> CorrespondenceSet:
    return CorrespondenceSet(tuple(
        Correspondence(c.src_index, c.dst_index, c.score, label) for c in cs))


def strict_category_match(scores: np.ndarray, src_labels: np.ndarray,
                          dst_labels: np.ndarray, matcher: Matcher = select_nn) -> CorrespondenceSet:
    """Match-in-same-category baseline: only keypoints with equal point labels
    may match (the brittle alternative group matching relaxes)."""
    same = src_labels[:, None] == dst_labels[None, :]
    return matcher(np.asarray(scores, dtype=np.float64) * same)


@dataclass
class PipelineParams:
    """Tunables for the full semantic matching pipeline."""

    r_local: float = 0.8
    bmr: BmrConfig = field(default_factory=BmrConfig)
    top_k: int = 2
    cluster: ClusterParams = field(default_factory=ClusterParams)
    saliency_threshold: float = 0.5
    normal_radius: float = 1.0
    feature_radius: float = 1.5
    indoor_mode: bool = False
    indoor_voxel: float = 0.25
    apply_saliency_selection: bool = True


def build_landmarks(cloud: LabeledPointCloud, params: PipelineParams) -> LandmarkSet:
    """Outdoor: euclidean clusters of the configured landmark categories,
    optionally pruned by saliency. Indoor: voxel-downsampled full cloud."""
    if params.indoor_mode:
        return voxel_downsample_landmarks(cloud, params.indoor_voxel)
    names = cloud.alphabet.names
    categories = sorted(names.index(n) for n in params.cluster.radii if n in names)
    if not categories:
        categories = [t for t in range(len(names)) if not cloud.alphabet.dynamic[t]]
    landmarks = cluster_landmarks(cloud, params.cluster, categories)
    if params.apply_saliency_selection and len(landmarks):
        keep = select_landmark_categories(cloud, landmarks, params.bmr,
                                          params.saliency_threshold)
        landmarks = landmarks.restrict_to(keep & set(categories))
    return landmarks


def ml_semreg_pipeline(src_cloud: LabeledPointCloud, dst_cloud: LabeledPointCloud,
                       src_kp: KeypointSet, dst_kp: KeypointSet,
                       params: PipelineParams,
                       matcher: Matcher = select_nn,
                       descriptors: Optional[tuple[DescriptorSet, DescriptorSet]] = None
                       ) -> CorrespondenceSet:
    """Full pipeline: local signatures -> matching groups; landmarks ->
    ring signatures; descriptor scores gated per group by the scene mask;
    union of the per-group matches with max-score deduplication."""
    if src_cloud.alphabet != dst_cloud.alphabet:
        raise ValueError("both clouds must share one label alphabet")
    src_index = build_spatial_index(src_cloud.points)
    dst_index = build_spatial_index(dst_cloud.points)
    src_xyz = src_cloud.points[src_kp.indices]
    dst_xyz = dst_cloud.points[dst_kp.indices]

    src_sigs = compute_local_ss_batch(src_cloud, src_index, src_xyz, params.r_local)
    dst_sigs = compute_local_ss_batch(dst_cloud, dst_index, dst_xyz, params.r_local)
    groups = build_matching_groups(src_sigs, dst_sigs, src_cloud.alphabet)
    if not groups:
        return CorrespondenceSet(())

    src_marks = build_landmarks(src_cloud, params)
    dst_marks = build_landmarks(dst_cloud, params)
    alphabet_size = len(src_cloud.alphabet)
    src_bmr = compute_bmr_ss_batch(src_xyz, src_marks, params.bmr, alphabet_size)
    dst_bmr = compute_bmr_ss_batch(dst_xyz, dst_marks, params.bmr, alphabet_size)

    if descriptors is None:
        src_desc = compute_fpfh(src_cloud, src_kp, params.normal_radius,
                                params.feature_radius, src_index)
        dst_desc = compute_fpfh(dst_cloud, dst_kp, params.normal_radius,
                                params.feature_radius, dst_index)
    else:
        src_desc, dst_desc = descriptors
    scores = score_matrix(src_desc, dst_desc)

    collected = []
    for g in groups:
        sub = scores[np.ix_(g.src_indices, g.dst_indices)]
        matched = mask_match(sub, src_bmr[g.src_indices], dst_bmr[g.dst_indices],
                             params.top_k, matcher, group_label=g.anchor_label)
        for c in matched:
            collected.append(Correspondence(int(g.src_indices[c.src_index]),
                                            int(g.dst_indices[c.dst_index]),
                                            c.score, g.anchor_label))
    return _dedup_max_score(collected)
