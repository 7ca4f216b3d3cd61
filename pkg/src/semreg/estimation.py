"""Robust rigid-transform estimation: RANSAC over correspondence triples with
Kabsch minimal solves and full-consensus refinement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .geometry import RigidTransform, kabsch
from .matching import CorrespondenceSet

_COLLINEAR_EPS = 1e-6


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 10_000
    inlier_threshold: float = 0.5
    sample_size: int = 3
    seed: int = 0
    confidence: float = 0.999

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if self.sample_size < 3:
            raise ValueError("sample_size must be >= 3")
        if not (0.0 < self.confidence < 1.0):
            raise ValueError("confidence must lie in (0, 1)")


@dataclass
class RegistrationResult:
    transform: RigidTransform
    inlier_indices: np.ndarray
    iterations_used: int
    converged: bool
    degraded: bool = False


def _is_near_collinear(pts: np.ndarray) -> bool:
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    return s[1] <= _COLLINEAR_EPS * max(s[0], 1e-300)


def _residuals(T: RigidTransform, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    return np.linalg.norm(T.apply(src) - dst, axis=1)


def refine_transform(src: np.ndarray, dst: np.ndarray, inliers: np.ndarray,
                     threshold: float, rounds: int = 5
                     ) -> tuple[RigidTransform, np.ndarray, bool]:
    """Iterated kabsch-and-regate until the inlier set fixes or rounds run out.

    Returns (transform, final inlier indices, degraded flag). Degradation
    means a round hit a rank-deficient configuration; the last valid
    transform is returned.
    """
    inliers = np.asarray(inliers, dtype=np.int64)
    if len(inliers) < 3:
        raise DegenerateInputError("refinement needs at least 3 inliers")
    T = kabsch(src[inliers], dst[inliers])
    for _ in range(rounds):
        r = _residuals(T, src, dst)
        new_inliers = np.flatnonzero(r <= threshold)
        if len(new_inliers) < 3 or np.array_equal(new_inliers, inliers):
            break
        try:
            T = kabsch(src[new_inliers], dst[new_inliers])
        except DegenerateInputError:
            return T, inliers, True
        inliers = new_inliers
    return T, inliers, False


def ransac_register(src_points: np.ndarray, dst_points: np.ndarray,
                    corr: CorrespondenceSet, cfg: RansacConfig) -> RegistrationResult:
    """Best-consensus rigid transform from scored correspondences.

    Hypotheses come from uniformly sampled correspondence triples (near-
    collinear samples are skipped); consensus is the count of residuals within
    the threshold; the winner is refined by kabsch over its full consensus
    set. Deterministic under a fixed seed. Early exit follows the standard
    confidence bound on the iteration count.
    """
    src_idx, dst_idx, _ = corr.as_arrays()
    n = len(corr)
    if n < cfg.sample_size:
        raise DegenerateInputError(
            f"need at least {cfg.sample_size} correspondences, got {n}")
    src = np.asarray(src_points, dtype=np.float64)[src_idx]
    dst = np.asarray(dst_points, dtype=np.float64)[dst_idx]

    rng = np.random.default_rng(cfg.seed)
    best_T: RigidTransform | None = None
    best_inliers = np.empty(0, dtype=np.int64)
    iterations = 0
    needed = cfg.max_iterations
    while iterations < min(needed, cfg.max_iterations):
        iterations += 1
        sample = rng.choice(n, size=cfg.sample_size, replace=False)
        if _is_near_collinear(src[sample]) or _is_near_collinear(dst[sample]):
            continue
        try:
            T = kabsch(src[sample], dst[sample])
        except DegenerateInputError:
            continue
        inliers = np.flatnonzero(_residuals(T, src, dst) <= cfg.inlier_threshold)
        if len(inliers) > len(best_inliers):
            best_T, best_inliers = T, inliers
            w = len(inliers) / n
            if 0.0 < w < 1.0:
                bound = np.log(1.0 - cfg.confidence) / np.log(1.0 - w ** cfg.sample_size)
                needed = int(np.ceil(bound))
            elif w >= 1.0:
                needed = iterations

    if best_T is None or len(best_inliers) < cfg.sample_size:
        T = best_T if best_T is not None else RigidTransform.identity()
        return RegistrationResult(T, best_inliers, iterations, converged=False)

    T, inliers, degraded = refine_transform(src, dst, best_inliers,
                                            cfg.inlier_threshold)
    # Keep the invariant: reported inliers pass the gate for the reported T.
    inliers = np.flatnonzero(_residuals(T, src, dst) <= cfg.inlier_threshold)
    if len(inliers) < len(best_inliers):
        T, inliers = best_T, best_inliers
    return RegistrationResult(T, inliers, iterations, converged=True, degraded=degraded)
