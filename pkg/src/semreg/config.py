"""Pipeline configuration: one flat key=value surface over every module tunable.

File format: one ``key=value`` per line, ``#`` comments, dotted keys for
nesting (e.g. ``bmr.N=33``). Unknown keys are rejected. ``serialize(parse(t))``
is idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .estimation import RansacConfig
from .evaluation import EvalThresholds
from .matching import PipelineParams
from .signatures import BmrConfig, ClusterParams

_DEFAULT_RADII = {"pole": 0.5, "traffic-sign": 0.5, "trunk": 0.5,
                  "car": 1.0, "truck": 1.0}


@dataclass
class PipelineConfig:
    mode: str = "outdoor"
    keypoints: int = 500
    keypoint_seed: int = 0
    matcher: str = "nn"
    pipeline: PipelineParams = field(default_factory=PipelineParams)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    eval: EvalThresholds = field(default_factory=EvalThresholds)

    @staticmethod
    def default(mode: str = "outdoor") -> "PipelineConfig":
        if mode == "outdoor":
            return PipelineConfig()
        if mode == "indoor":
            return PipelineConfig(
                mode="indoor",
                pipeline=PipelineParams(
                    r_local=0.05, bmr=BmrConfig(10, 0.2), top_k=3,
                    normal_radius=0.1, feature_radius=0.15,
                    indoor_mode=True),
                ransac=RansacConfig(inlier_threshold=0.1),
                eval=EvalThresholds(inlier_threshold=0.1, re_max_deg=15.0, te_max=0.3),
            )
        raise ValueError(f"unknown mode {mode!r}")


def _parse_scalar(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    if value in ("true", "false"):
        return value == "true"
    return value


def parse_config(text: str) -> PipelineConfig:
    """Parse key=value text; validation happens through the dataclasses."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key] = _parse_scalar(value)

    cfg = PipelineConfig.default(str(entries.pop("mode", "outdoor")))
    p, r, e = cfg.pipeline, cfg.ransac, cfg.eval
    bmr_kw = {"n_rings": p.bmr.n_rings, "ring_width": p.bmr.ring_width}
    radii = dict(p.cluster.radii)
    cl_kw = {"min_cluster_size": p.cluster.min_cluster_size,
             "default_radius": p.cluster.default_radius}
    p_kw, r_kw, e_kw, top = {}, {}, {}, {}

    simple = {
        "keypoints": ("top", "keypoints"), "keypoint_seed": ("top", "keypoint_seed"),
        "matcher": ("top", "matcher"),
        "r_local": ("p", "r_local"), "K": ("p", "top_k"),
        "saliency_threshold": ("p", "saliency_threshold"),
        "indoor_voxel": ("p", "indoor_voxel"),
        "apply_saliency_selection": ("p", "apply_saliency_selection"),
        "descriptor.normal_radius": ("p", "normal_radius"),
        "descriptor.feature_radius": ("p", "feature_radius"),
        "bmr.N": ("bmr", "n_rings"), "bmr.L": ("bmr", "ring_width"),
        "cluster.min_size": ("cl", "min_cluster_size"),
        "cluster.default_radius": ("cl", "default_radius"),
        "ransac.max_iterations": ("r", "max_iterations"),
        "ransac.inlier_threshold": ("r", "inlier_threshold"),
        "ransac.sample_size": ("r", "sample_size"),
        "ransac.seed": ("r", "seed"), "ransac.confidence": ("r", "confidence"),
        "eval.inlier_threshold": ("e", "inlier_threshold"),
        "eval.re_max": ("e", "re_max_deg"), "eval.te_max": ("e", "te_max"),
    }
    sinks = {"top": top, "p": p_kw, "bmr": bmr_kw, "cl": cl_kw, "r": r_kw, "e": e_kw}
    for key, value in entries.items():
        if key.startswith("cluster.radius."):
            radii[key[len("cluster.radius."):]] = float(value)
            continue
        if key not in simple:
            raise ValueError(f"unknown config key {key!r}")
        sink, attr = simple[key]
        sinks[sink][attr] = value

    try:
        bmr = BmrConfig(**bmr_kw)
        cluster = ClusterParams(radii=radii, **cl_kw)
        pipeline = replace(p, bmr=bmr, cluster=cluster, **p_kw)
        ransac = replace(r, **r_kw)
        ev = replace(e, **e_kw) if e_kw else e
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid config value: {exc}") from exc
    if top.get("matcher", cfg.matcher) not in ("nn", "mnn"):
        raise ValueError("matcher must be 'nn' or 'mnn'")
    if int(top.get("keypoints", cfg.keypoints)) < 1:
        raise ValueError("keypoints must be >= 1")
    return PipelineConfig(mode=cfg.mode,
                          keypoints=int(top.get("keypoints", cfg.keypoints)),
                          keypoint_seed=int(top.get("keypoint_seed", cfg.keypoint_seed)),
                          matcher=str(top.get("matcher", cfg.matcher)),
                          pipeline=pipeline, ransac=ransac, eval=ev)


def serialize_config(cfg: PipelineConfig) -> str:
    p, r, e = cfg.pipeline, cfg.ransac, cfg.eval
    lines = [
        f"mode={cfg.mode}",
        f"keypoints={cfg.keypoints}",
        f"keypoint_seed={cfg.keypoint_seed}",
        f"matcher={cfg.matcher}",
        f"r_local={p.r_local:g}",
        f"K={p.top_k}",
        f"bmr.N={p.bmr.n_rings}",
        f"bmr.L={p.bmr.ring_width:g}",
        f"saliency_threshold={p.saliency_threshold:g}",
        f"apply_saliency_selection={'true' if p.apply_saliency_selection else 'false'}",
        f"indoor_voxel={p.indoor_voxel:g}",
        f"descriptor.normal_radius={p.normal_radius:g}",
        f"descriptor.feature_radius={p.feature_radius:g}",
        f"cluster.min_size={p.cluster.min_cluster_size}",
        f"cluster.default_radius={p.cluster.default_radius:g}",
    ]
    for name in sorted(p.cluster.radii):
        lines.append(f"cluster.radius.{name}={p.cluster.radii[name]:g}")
    lines += [
        f"ransac.max_iterations={r.max_iterations}",
        f"ransac.inlier_threshold={r.inlier_threshold:g}",
        f"ransac.sample_size={r.sample_size}",
        f"ransac.seed={r.seed}",
        f"ransac.confidence={r.confidence:g}",
        f"eval.inlier_threshold={e.inlier_threshold:g}",
        f"eval.re_max={e.re_max_deg:g}",
        f"eval.te_max={e.te_max:g}",
    ]
    return "\n".join(lines) + "\n"
