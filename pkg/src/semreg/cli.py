"""Command line interface.

Subcommands: synth, match, register, bench, sweep, saliency, blur.
Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import PipelineConfig, parse_config, serialize_config
from .errors import DegenerateInputError, ParseError
from .estimation import ransac_register
from .evaluation import correspondence_metrics, registration_errors, sweep_r_local
from .fileio import (ReportRow, read_labeled_cloud, read_transforms,
                     report_to_csv, report_to_json, write_labeled_cloud,
                     write_transform)
from .matching import (CorrespondenceSet, compute_fpfh, ml_semreg_pipeline,
                       score_matrix, select_mnn, select_nn)
from .evaluation import blur_labels as _blur_labels
from .signatures import compute_saliency
from .matching import build_landmarks
from .synth import SceneSpec, generate_scene_pair, keypoint_sample


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return parse_config(Path(args.config).read_text())
    return PipelineConfig.default(getattr(args, "mode", "outdoor"))


def _matcher_fn(name: str):
    return select_mnn if name == "mnn" else select_nn


def _match_pair(src_cloud, dst_cloud, cfg: PipelineConfig,
                baseline: bool) -> tuple[CorrespondenceSet, np.ndarray, np.ndarray]:
    n_src = min(cfg.keypoints, len(src_cloud))
    n_dst = min(cfg.keypoints, len(dst_cloud))
    src_kp = keypoint_sample(src_cloud, n_src, cfg.keypoint_seed)
    dst_kp = keypoint_sample(dst_cloud, n_dst, cfg.keypoint_seed + 1)
    matcher = _matcher_fn(cfg.matcher)
    p = cfg.pipeline
    if baseline:
        src_desc = compute_fpfh(src_cloud, src_kp, p.normal_radius, p.feature_radius)
        dst_desc = compute_fpfh(dst_cloud, dst_kp, p.normal_radius, p.feature_radius)
        corr = matcher(score_matrix(src_desc, dst_desc))
    else:
        corr = ml_semreg_pipeline(src_cloud, dst_cloud, src_kp, dst_kp, p, matcher)
    return corr, src_cloud.points[src_kp.indices], dst_cloud.points[dst_kp.indices]


def _cmd_synth(args) -> int:
    spec = SceneSpec(seed=args.seed, extent=args.extent,
                     overlap_offset=args.offset, sigma=args.sigma,
                     dropout=args.dropout, density=args.density,
                     repeated_structures=args.repeated)
    pair = generate_scene_pair(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_labeled_cloud(out / "a.ply", pair.src_cloud, binary=args.binary)
    write_labeled_cloud(out / "b.ply", pair.dst_cloud, binary=args.binary)
    write_transform(out / "gt.txt", pair.transform)
    print(f"wrote {out}/a.ply ({len(pair.src_cloud)} pts), "
          f"{out}/b.ply ({len(pair.dst_cloud)} pts), {out}/gt.txt")
    return 0


def _cmd_match(args) -> int:
    cfg = _load_config(args)
    src = read_labeled_cloud(args.src)
    dst = read_labeled_cloud(args.dst)
    t0 = time.perf_counter()
    corr, src_xyz, dst_xyz = _match_pair(src, dst, cfg, args.baseline)
    elapsed = (time.perf_counter() - t0) * 1e3
    print(f"correspondences={len(corr)} time_ms={elapsed:.1f}")
    if args.gt:
        T_gt = read_transforms(args.gt)[0]
        inliers, ratio = correspondence_metrics(
            corr, src_xyz, dst_xyz, T_gt, cfg.eval.inlier_threshold)
        print(f"IN={inliers} IR={ratio:.9g}")
    if args.out:
        lines = ["src_index,dst_index,score,group_label"]
        for c in corr:
            lines.append(f"{c.src_index},{c.dst_index},{c.score:.9g},"
                         f"{'' if c.group_label is None else c.group_label}")
        Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def _cmd_register(args) -> int:
    cfg = _load_config(args)
    src = read_labeled_cloud(args.src)
    dst = read_labeled_cloud(args.dst)
    corr, src_xyz, dst_xyz = _match_pair(src, dst, cfg, args.baseline)
    result = ransac_register(dst_xyz, src_xyz, _swap(corr), cfg.ransac)
    M = np.column_stack([result.transform.rotation, result.transform.translation])
    print("transform: " + " ".join(f"{v:.9g}" for v in M.reshape(-1)))
    print(f"inliers={len(result.inlier_indices)} iterations={result.iterations_used} "
          f"converged={result.converged}")
    if args.out:
        write_transform(args.out, result.transform)
    if args.gt:
        T_gt = read_transforms(args.gt)[0]
        re, te = registration_errors(result.transform, T_gt)
        ok = re <= cfg.eval.re_max_deg and te <= cfg.eval.te_max
        print(f"RE_deg={re:.9g} TE_m={te:.9g} registered={int(ok)}")
    return 0


def _swap(corr: CorrespondenceSet) -> CorrespondenceSet:
    """Flip correspondence direction so RANSAC maps dst keypoints onto src."""
    from .matching import Correspondence
    return CorrespondenceSet(tuple(
        Correspondence(c.dst_index, c.src_index, c.score, c.group_label)
        for c in corr))


def _bench_one(pair_dir: Path, cfg: PipelineConfig, baseline: bool) -> ReportRow:
    src = read_labeled_cloud(pair_dir / "a.ply")
    dst = read_labeled_cloud(pair_dir / "b.ply")
    T_gt = read_transforms(pair_dir / "gt.txt")[0]
    t0 = time.perf_counter()
    corr, src_xyz, dst_xyz = _match_pair(src, dst, cfg, baseline)
    inliers, ratio = correspondence_metrics(corr, src_xyz, dst_xyz, T_gt,
                                            cfg.eval.inlier_threshold)
    if len(corr) >= cfg.ransac.sample_size:
        result = ransac_register(dst_xyz, src_xyz, _swap(corr), cfg.ransac)
        re, te = registration_errors(result.transform, T_gt)
        registered = (result.converged and re <= cfg.eval.re_max_deg
                      and te <= cfg.eval.te_max)
    else:
        re, te, registered = float("inf"), float("inf"), False
    elapsed = (time.perf_counter() - t0) * 1e3
    matcher_name = cfg.matcher + ("" if baseline else "+semreg")
    return ReportRow(pair_dir.name, matcher_name, inliers, ratio, re, te,
                     registered, elapsed)


def _cmd_bench(args) -> int:
    cfg = _load_config(args)
    root = Path(args.dir)
    pair_dirs = sorted(d for d in root.iterdir()
                       if d.is_dir() and (d / "a.ply").exists())
    if not pair_dirs:
        raise ParseError(f"{root}: no pair directories (expecting a.ply/b.ply/gt.txt)")
    workers = int(os.environ.get("SEMREG_THREADS", "0")) or min(8, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda d: _bench_one(d, cfg, args.baseline), pair_dirs))
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.csv").write_text(report_to_csv(rows))
    Path(f"{prefix}.json").write_text(report_to_json(rows, serialize_config(cfg)))
    recall = sum(r.registered for r in rows) / len(rows)
    print(f"pairs={len(rows)} RR={recall:.9g} -> {prefix}.csv {prefix}.json")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    src = read_labeled_cloud(args.src)
    dst = read_labeled_cloud(args.dst)
    T_gt = read_transforms(args.gt)[0]
    n_src = min(cfg.keypoints, len(src))
    n_dst = min(cfg.keypoints, len(dst))
    src_kp = keypoint_sample(src, n_src, cfg.keypoint_seed)
    dst_kp = keypoint_sample(dst, n_dst, cfg.keypoint_seed + 1)
    values = [float(v) for v in args.values.split(",")]
    matcher = _matcher_fn(cfg.matcher)
    pairs = [(src, dst, src_kp, dst_kp, T_gt)]

    print(f"{args.param},mean_IN,mean_IR")
    rows = []
    for v in values:
        p = cfg.pipeline
        if args.param == "r_local":
            p = replace(p, r_local=v)
        elif args.param == "K":
            p = replace(p, top_k=int(v))
        elif args.param == "N":
            p = replace(p, bmr=replace(p.bmr, n_rings=int(v)))
        elif args.param == "L":
            p = replace(p, bmr=replace(p.bmr, ring_width=v))
        else:
            raise _UsageError(f"unknown sweep parameter {args.param!r}")
        table = sweep_r_local(pairs, [p.r_local], p, cfg.eval.inlier_threshold,
                              matcher=matcher)[0]
        rows.append((v, table["mean_in"], table["mean_ir"]))
        print(f"{v:.9g},{table['mean_in']:.9g},{table['mean_ir']:.9g}")
    if args.out:
        lines = [f"{args.param},mean_IN,mean_IR"] + [
            f"{v:.9g},{i:.9g},{r:.9g}" for v, i, r in rows]
        Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def _cmd_saliency(args) -> int:
    cfg = _load_config(args)
    cloud = read_labeled_cloud(args.cloud)
    p = replace(cfg.pipeline, apply_saliency_selection=False)
    landmarks = build_landmarks(cloud, p)
    W = compute_saliency(cloud, landmarks, cfg.pipeline.bmr)
    lines = ["category," + ",".join(f"ring_{k + 1}" for k in range(W.shape[1]))]
    for t, name in enumerate(cloud.alphabet.names):
        lines.append(name + "," + ",".join(f"{v:.9g}" for v in W[t]))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_blur(args) -> int:
    cloud = read_labeled_cloud(args.cloud)
    degraded = _blur_labels(cloud, args.br, args.prob, args.seed)
    write_labeled_cloud(args.out, degraded, binary=args.binary)
    changed = int(np.count_nonzero(degraded.labels != cloud.labels))
    print(f"relabeled {changed} of {len(cloud)} points -> {args.out}")
    return 0


def _build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(prog="semreg")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--mode", default="outdoor", choices=["outdoor", "indoor"])
        p.add_argument("--baseline", action="store_true",
                       help="plain descriptor matching, no semantic modules")

    p = sub.add_parser("synth", help="generate a synthetic labeled scan pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--extent", type=float, default=50.0)
    p.add_argument("--offset", type=float, default=10.0)
    p.add_argument("--sigma", type=float, default=0.02)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--density", type=float, default=20.0)
    p.add_argument("--repeated", type=int, default=0)
    p.add_argument("--binary", action="store_true")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("match", help="match a pair, report IN/IR")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("--gt")
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=_cmd_match)

    p = sub.add_parser("register", help="match and estimate the rigid transform")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("--gt")
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=_cmd_register)

    p = sub.add_parser("bench", help="evaluate a directory of pairs")
    p.add_argument("--dir", required=True)
    p.add_argument("--out-prefix", required=True)
    common(p)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("sweep", help="sweep r_local, K, N or L on one pair")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--param", required=True, choices=["r_local", "K", "N", "L"])
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("saliency", help="per-category ring saliency of a cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--out")
    common(p)
    p.set_defaults(fn=_cmd_saliency)

    p = sub.add_parser("blur", help="degrade labels at category boundaries")
    p.add_argument("--cloud", required=True)
    p.add_argument("--br", type=float, required=True)
    p.add_argument("--prob", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--binary", action="store_true")
    p.set_defaults(fn=_cmd_blur)
    return parser


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.fn(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, DegenerateInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
