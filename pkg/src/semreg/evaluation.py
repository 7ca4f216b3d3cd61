"""Correspondence and registration metrics, label degradation, parameter sweeps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import (KeypointSet, LabeledPointCloud, RigidTransform,
                       build_spatial_index)
from .matching import (CorrespondenceSet, Matcher, PipelineParams,
                       ml_semreg_pipeline, select_nn)


@dataclass(frozen=True)
class EvalThresholds:
    inlier_threshold: float = 0.5
    re_max_deg: float = 5.0
    te_max: float = 0.6

    def __post_init__(self):
        if min(self.inlier_threshold, self.re_max_deg, self.te_max) <= 0:
            raise ValueError("thresholds must be positive")


@dataclass
class PairMetrics:
    inlier_count: int
    inlier_ratio: float
    rotation_error_deg: float
    translation_error: float
    registered: bool


def classify_inlier(p: np.ndarray, q: np.ndarray, T_gt: RigidTransform,
                    inlier_threshold: float) -> bool:
    """A pair is an inlier iff the reprojection residual is within the
    threshold (boundary inclusive)."""
    if inlier_threshold <= 0:
        raise ValueError("inlier threshold must be positive")
    residual = np.linalg.norm(np.asarray(p, dtype=np.float64) - T_gt.apply(q))
    return bool(residual <= inlier_threshold)


def correspondence_residuals(corr: CorrespondenceSet, src_xyz: np.ndarray,
                             dst_xyz: np.ndarray, T_gt: RigidTransform) -> np.ndarray:
    src_idx, dst_idx, _ = corr.as_arrays()
    if len(src_idx) == 0:
        return np.empty(0)
    return np.linalg.norm(src_xyz[src_idx] - T_gt.apply(dst_xyz[dst_idx]), axis=1)


def correspondence_metrics(corr: CorrespondenceSet, src_xyz: np.ndarray,
                           dst_xyz: np.ndarray, T_gt: RigidTransform,
                           inlier_threshold: float) -> tuple[int, float]:
    """(inlier count, inlier ratio); the ratio is 0 for an empty set."""
    r = correspondence_residuals(corr, src_xyz, dst_xyz, T_gt)
    if len(r) == 0:
        return 0, 0.0
    inliers = int(np.count_nonzero(r <= inlier_threshold))
    return inliers, inliers / len(r)


def registration_errors(T_est: RigidTransform, T_gt: RigidTransform) -> tuple[float, float]:
    """(rotation error in degrees via the trace identity, translation error in
    meters). The trace argument is clamped against rounding at 0/180 degrees."""
    cos_angle = (np.trace(T_gt.rotation.T @ T_est.rotation) - 1.0) / 2.0
    re = float(np.degrees(np.arccos(np.clip(cos_angle, -1.0, 1.0))))
    te = float(np.linalg.norm(T_est.translation - T_gt.translation))
    return re, te


def registration_recall(results: Sequence[tuple[float, float]],
                        thresholds: EvalThresholds) -> float:
    """Fraction of (RE, TE) pairs passing both error thresholds."""
    if len(results) == 0:
        raise ValueError("registration recall needs at least one pair")
    ok = sum(1 for re, te in results
             if re <= thresholds.re_max_deg and te <= thresholds.te_max)
    return ok / len(results)


def blur_labels(cloud: LabeledPointCloud, blur_radius: float, prob: float,
                seed: int = 0) -> LabeledPointCloud:
    """Degrade labels at category boundaries.

    A boundary point has at least one differently-labeled neighbor within the
    blur radius. Each boundary point is independently relabeled with the given
    probability to a uniformly random *other* label present in its
    neighborhood. Deterministic under the seed.
    """
    if blur_radius < 0:
        raise ValueError("blur radius must be non-negative")
    if not (0.0 <= prob <= 1.0):
        raise ValueError("probability must lie in [0, 1]")
    if blur_radius == 0 or prob == 0 or len(cloud) == 0:
        return LabeledPointCloud(cloud.points.copy(), cloud.labels.copy(), cloud.alphabet)

    index = build_spatial_index(cloud.points)
    rng = np.random.default_rng(seed)
    new_labels = cloud.labels.copy()
    neighborhoods = index.radius_neighbors_batch(cloud.points, blur_radius)
    flips = rng.random(len(cloud)) < prob
    for i, neigh in enumerate(neighborhoods):
        other = np.unique(cloud.labels[neigh])
        other = other[other != cloud.labels[i]]
        if len(other) == 0:
            continue  # not a boundary point
        if flips[i]:
            new_labels[i] = rng.choice(other)
    return LabeledPointCloud(cloud.points.copy(), new_labels, cloud.alphabet)


def sweep_r_local(scene_pairs, r_values: Sequence[float], params: PipelineParams,
                  inlier_threshold: float,
                  matcher: Matcher = select_nn) -> list[dict]:
    """Run the full pipeline per radius over (src, dst, src_kp, dst_kp, T_gt)
    tuples and tabulate mean IN/IR per radius."""
    if len(r_values) == 0 or min(r_values) <= 0:
        raise ValueError("r_values must be nonempty and positive")
    from dataclasses import replace
    rows = []
    for r in r_values:
        p = replace(params, r_local=float(r))
        ins, irs = [], []
        for src_cloud, dst_cloud, src_kp, dst_kp, T_gt in scene_pairs:
            corr = ml_semreg_pipeline(src_cloud, dst_cloud, src_kp, dst_kp, p, matcher)
            inlier_count, ratio = correspondence_metrics(
                corr, src_cloud.points[src_kp.indices],
                dst_cloud.points[dst_kp.indices], T_gt, inlier_threshold)
            ins.append(inlier_count)
            irs.append(ratio)
        rows.append({"r_local": float(r),
                     "mean_in": float(np.mean(ins)),
                     "mean_ir": float(np.mean(irs)),
                     "per_pair_in": ins, "per_pair_ir": irs})
    return rows
