"""Deterministic synthetic semantic scenes: labeled scan pairs with exact
ground-truth transforms, tunable overlap, repeated structures and noise.

A world is a set of labeled surface primitives (ground, border walls,
vegetation blobs, cars/trucks as boxes, poles/trunks as cylinders, sign
panels, and optional repeated right-angle corner structures that create
geometric ambiguity). Both scans share one surface sampling of the world;
per-scan range limits, dropout and gaussian noise make them differ. The
target scan lives in its own sensor frame; the returned transform maps
target-frame points back into the source frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (KeypointSet, LabelAlphabet, LabeledPointCloud,
                       RigidTransform, rotation_about_axis)

DEFAULT_ALPHABET = LabelAlphabet(
    names=("ground", "building", "vegetation", "car", "truck", "pole",
           "trunk", "traffic-sign"),
)


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    extent: float = 50.0
    n_poles: int = 6
    n_cars: int = 4
    n_trucks: int = 1
    n_trunks: int = 4
    n_signs: int = 4
    n_vegetation: int = 3
    n_walls: int = 4
    repeated_structures: int = 0
    density: float = 20.0
    sigma: float = 0.02
    overlap_offset: float = 0.0
    dropout: float = 0.0
    sensor_range_factor: float = 0.75

    def __post_init__(self):
        if min(self.n_poles, self.n_cars, self.n_trucks, self.n_trunks,
               self.n_signs, self.n_vegetation, self.n_walls,
               self.repeated_structures) < 0:
            raise ValueError("object counts must be non-negative")
        if self.density <= 0:
            raise ValueError("density must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must lie in [0, 1)")


@dataclass
class ScenePair:
    src_cloud: LabeledPointCloud
    dst_cloud: LabeledPointCloud
    transform: RigidTransform  # maps dst-frame points into the src frame
    spec: SceneSpec


def _sample_rect(rng, origin, edge_u, edge_v, density):
    """Uniform samples on a parallelogram patch."""
    area = np.linalg.norm(np.cross(edge_u, edge_v))
    n = max(1, rng.poisson(area * density))
    a = rng.random((n, 1))
    b = rng.random((n, 1))
    return origin + a * edge_u + b * edge_v


def _sample_cylinder(rng, center_xy, radius, height, density):
    area = 2 * np.pi * radius * height
    n = max(1, rng.poisson(area * density))
    ang = rng.uniform(0, 2 * np.pi, n)
    z = rng.uniform(0, height, n)
    return np.column_stack([center_xy[0] + radius * np.cos(ang),
                            center_xy[1] + radius * np.sin(ang), z])


def _sample_box(rng, center_xy, yaw, dims, density):
    """Axis box (lx, ly, lz) at yaw; four sides plus top, no bottom face."""
    lx, ly, lz = dims
    R = rotation_about_axis((0, 0, 1), yaw)
    faces = [
        (np.array([-lx / 2, -ly / 2, 0.0]), np.array([lx, 0, 0]), np.array([0, 0, lz])),
        (np.array([-lx / 2, ly / 2, 0.0]), np.array([lx, 0, 0]), np.array([0, 0, lz])),
        (np.array([-lx / 2, -ly / 2, 0.0]), np.array([0, ly, 0]), np.array([0, 0, lz])),
        (np.array([lx / 2, -ly / 2, 0.0]), np.array([0, ly, 0]), np.array([0, 0, lz])),
        (np.array([-lx / 2, -ly / 2, lz]), np.array([lx, 0, 0]), np.array([0, ly, 0])),
    ]
    parts = [_sample_rect(rng, o, u, v, density) for o, u, v in faces]
    pts = np.vstack(parts)
    pts = pts @ R.T
    pts[:, 0] += center_xy[0]
    pts[:, 1] += center_xy[1]
    return pts


def _sample_sphere(rng, center, radius, density):
    area = 4 * np.pi * radius ** 2
    n = max(1, rng.poisson(area * density))
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return center + radius * v


def _sample_corner(rng, center_xy, yaw, density):
    """Two perpendicular wall panels forming an identical right-angle corner."""
    R = rotation_about_axis((0, 0, 1), yaw)
    a = _sample_rect(rng, np.array([0.0, 0.0, 0.0]), np.array([2.0, 0, 0]),
                     np.array([0, 0, 2.0]), density)
    b = _sample_rect(rng, np.array([0.0, 0.0, 0.0]), np.array([0, 2.0, 0]),
                     np.array([0, 0, 2.0]), density)
    pts = np.vstack([a, b]) @ R.T
    pts[:, 0] += center_xy[0]
    pts[:, 1] += center_xy[1]
    return pts


def _build_world(spec: SceneSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    """Sampled world surface with one label per point."""
    half = spec.extent / 2
    lab = DEFAULT_ALPHABET
    chunks: list[np.ndarray] = []
    labels: list[np.ndarray] = []

    def add(points, name):
        chunks.append(points)
        labels.append(np.full(len(points), lab.index(name), dtype=np.int64))

    # Ground plane over the full extent.
    add(_sample_rect(rng, np.array([-half, -half, 0.0]),
                     np.array([spec.extent, 0, 0]), np.array([0, spec.extent, 0]),
                     spec.density), "ground")

    def rand_xy(margin=2.0):
        return rng.uniform(-half + margin, half - margin, 2)

    # Border wall segments (buildings).
    for i in range(spec.n_walls):
        side = i % 4
        length = rng.uniform(6.0, 12.0)
        offset = rng.uniform(-half + length, half - 1.0)
        height = rng.uniform(3.0, 6.0)
        if side == 0:
            origin = np.array([offset - length, -half + 0.5, 0.0])
            u = np.array([length, 0, 0])
        elif side == 1:
            origin = np.array([offset - length, half - 0.5, 0.0])
            u = np.array([length, 0, 0])
        elif side == 2:
            origin = np.array([-half + 0.5, offset - length, 0.0])
            u = np.array([0, length, 0])
        else:
            origin = np.array([half - 0.5, offset - length, 0.0])
            u = np.array([0, length, 0])
        add(_sample_rect(rng, origin, u, np.array([0, 0, height]), spec.density),
            "building")

    for _ in range(spec.n_vegetation):
        xy = rand_xy()
        add(_sample_sphere(rng, np.array([xy[0], xy[1], 1.8]),
                           rng.uniform(0.8, 1.4), spec.density), "vegetation")
    for _ in range(spec.n_cars):
        add(_sample_box(rng, rand_xy(3.0), rng.uniform(0, 2 * np.pi),
                        (4.0, 1.8, 1.5), spec.density), "car")
    for _ in range(spec.n_trucks):
        add(_sample_box(rng, rand_xy(5.0), rng.uniform(0, 2 * np.pi),
                        (8.0, 2.5, 3.0), spec.density), "truck")
    for _ in range(spec.n_poles):
        add(_sample_cylinder(rng, rand_xy(), 0.08, 4.0, spec.density * 4), "pole")
    for _ in range(spec.n_trunks):
        add(_sample_cylinder(rng, rand_xy(), 0.25, 3.0, spec.density * 2), "trunk")
    for _ in range(spec.n_signs):
        xy = rand_xy()
        add(np.vstack([
            _sample_cylinder(rng, xy, 0.05, 2.0, spec.density * 4),
            _sample_rect(rng, np.array([xy[0] - 0.3, xy[1], 2.0]),
                         np.array([0.6, 0, 0]), np.array([0, 0, 0.6]),
                         spec.density * 2),
        ]), "traffic-sign")
    # Identical right-angle corners: strong local-geometry ambiguity.
    for _ in range(spec.repeated_structures):
        add(_sample_corner(rng, rand_xy(3.0), rng.uniform(0, 2 * np.pi),
                           spec.density), "building")

    points = np.vstack(chunks) if chunks else np.empty((0, 3))
    labs = np.concatenate(labels) if labels else np.empty(0, dtype=np.int64)
    return points, labs


def generate_scene_pair(spec: SceneSpec) -> ScenePair:
    """Render a labeled scan pair from one world sampling.

    Each scan keeps points within its sensor range of its pose, drops a
    ``dropout`` fraction independently, and adds independent gaussian noise.
    The target scan is expressed in its own sensor frame (offset position,
    random yaw); the returned transform is the exact dst-to-src map.
    """
    rng = np.random.default_rng(spec.seed)
    world_pts, world_labels = _build_world(spec, rng)
    if len(world_pts) == 0:
        raise ValueError("spec yields an empty world")

    src_pos = np.zeros(3)
    dst_pos = np.array([spec.overlap_offset, 0.0, 0.0])
    yaw = rng.uniform(0, 2 * np.pi)
    R = rotation_about_axis((0, 0, 1), yaw)
    T_gt = RigidTransform(R, dst_pos)

    sensor_range = spec.sensor_range_factor * spec.extent

    def render(pos):
        d = np.linalg.norm(world_pts[:, :2] - pos[None, :2], axis=1)
        keep = d <= sensor_range
        pts = world_pts[keep]
        labs = world_labels[keep]
        if spec.dropout > 0 and len(pts):
            keep2 = rng.random(len(pts)) >= spec.dropout
            pts, labs = pts[keep2], labs[keep2]
        if spec.sigma > 0 and len(pts):
            pts = pts + rng.normal(0.0, spec.sigma, pts.shape)
        else:
            pts = pts.copy()
        return pts, labs

    src_pts, src_labels = render(src_pos)
    dst_world_pts, dst_labels = render(dst_pos)
    if len(src_pts) == 0 or len(dst_world_pts) == 0:
        raise ValueError("spec yields an empty scan")
    # Express the target scan in its sensor frame: q = R^T (x - t).
    dst_pts = (dst_world_pts - dst_pos) @ R

    return ScenePair(
        LabeledPointCloud(src_pts, src_labels, DEFAULT_ALPHABET),
        LabeledPointCloud(dst_pts, dst_labels, DEFAULT_ALPHABET),
        T_gt, spec)


def keypoint_sample(cloud: LabeledPointCloud, count: int, seed: int = 0) -> KeypointSet:
    """Uniform sample of keypoint indices without replacement."""
    if count > len(cloud):
        raise ValueError(f"cannot sample {count} keypoints from {len(cloud)} points")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(cloud), size=count, replace=False)
    return KeypointSet(np.sort(idx))
