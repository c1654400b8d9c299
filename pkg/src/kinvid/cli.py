"""Command-line interface.

Pipeline stages communicate only through files (frame directories, feature
JSON, pair CSV, score CSV), so every stage can run and be tested in
isolation.  Exit codes: 0 success, 1 validation error, 2 runtime error.
Diagnostics go to stderr; results go to files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import deep_net, eval_protocol, face_align, media_io, synth, texture_coders
from .features import FeatureVector, load_feature, save_feature
from .kin_classifier import fuse_scores, load_scores, save_model, save_scores, svm_train
from .kin_classifier import pair_combine
from .top_features import extract_top_multiscale
from .texture_coders import LbpParams


class UsageError(ValueError):
    """Bad command line or failed pre-flight validation (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_seed() -> int:
    return int(os.environ.get("KINVID_SEED", "0"))


def _require(path: str | Path, kind: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{kind} not found: {p}")
    return p


def _parse_lbp_scales(text: str, mapping: str) -> list[LbpParams]:
    scales = []
    for part in text.split(","):
        p, _, r = part.partition(":")
        if not r:
            raise UsageError(f"bad LBP scale {part!r}, expected P:R")
        scales.append(LbpParams(int(p), float(r), mapping=mapping))
    return scales


def _load_aligned(manifest: media_io.VideoManifest) -> media_io.FaceVideo:
    return media_io.load_video(manifest.frames_dir)


def _cmd_synth(args) -> int:
    config = synth.SynthConfig(
        families=args.families,
        videos_per_subject=args.videos_per_subject,
        frames=args.frames,
        size=args.size,
        alpha=args.alpha,
        seed=args.seed,
        relations=tuple(args.relations.split(",")) if args.relations else synth.RELATIONS,
        dynamics_only=args.dynamics_only,
    )
    manifests, pair_list = synth.synth_generate(args.out, config)
    print(f"wrote {len(manifests)} videos, {len(pair_list.entries)} positive pairs "
          f"under {args.out}", file=sys.stderr)
    return 0


def _cmd_align(args) -> int:
    manifest_path = _require(args.manifest, "manifest")
    manifests = media_io.load_manifest(manifest_path)
    for m in manifests:
        _require(m.frames_dir, f"{m.video_id}: frames dir")
        _require(m.landmarks, f"{m.video_id}: landmark file")
    template = (face_align.deep_template() if args.template == "deep"
                else face_align.texture_template(args.size))
    out = Path(args.out)
    (out / "videos").mkdir(parents=True, exist_ok=True)
    (out / "landmarks").mkdir(parents=True, exist_ok=True)
    new_manifests = []
    for m in manifests:
        video = media_io.load_video(m.frames_dir)
        annotations = face_align.load_annotations(m.landmarks)
        aligned = face_align.align_crop(video, annotations, template)
        frames_dir = out / "videos" / m.video_id
        media_io.save_video(aligned, frames_dir)
        landmark_path = out / "landmarks" / f"{m.video_id}.csv"
        face_align.save_annotations(
            [face_align.EyeAnnotation(t, template.left_eye, template.right_eye)
             for t in range(aligned.frames)],
            landmark_path,
        )
        new_manifests.append(media_io.VideoManifest(
            video_id=m.video_id, frames_dir=f"videos/{m.video_id}",
            landmarks=f"landmarks/{m.video_id}.csv", subject_id=m.subject_id,
            smile_type=m.smile_type))
    media_io.save_manifest(new_manifests, out / "manifest.json")
    print(f"aligned {len(new_manifests)} videos to {template.size}x{template.size}",
          file=sys.stderr)
    return 0


def _extract_one(manifest, args, scales) -> FeatureVector:
    video = _load_aligned(manifest)
    if args.descriptor == "lbptop":
        return extract_top_multiscale(video, "LBP", scales).as_feature_vector()
    if args.descriptor == "lpqtop":
        return extract_top_multiscale(video, "LPQ", scales).as_feature_vector()
    if args.descriptor == "bsiftop":
        return extract_top_multiscale(video, "BSIF", scales).as_feature_vector()
    # deep: grayscale sources get their intensity replicated onto 3 channels
    rgb = video.rgb
    if rgb is None:
        rgb = np.repeat(video.gray[..., None], 3, axis=3)
    video = media_io.FaceVideo(gray=video.gray, rgb=rgb, fps=video.fps)
    return deep_net.extract_fc7_video(video, args._weights,
                                      frame_stride=args.frame_stride)


def _cmd_extract(args) -> int:
    manifest_path = _require(args.manifest, "manifest")
    manifests = media_io.load_manifest(manifest_path)
    for m in manifests:
        _require(m.frames_dir, f"{m.video_id}: frames dir")
    if args.descriptor == "lbptop":
        scales = _parse_lbp_scales(args.scales, args.mapping)
    elif args.descriptor == "lpqtop":
        scales = [int(w) for w in args.windows.split(",")]
    elif args.descriptor == "bsiftop":
        if not args.filters:
            raise UsageError("bsiftop requires --filters")
        paths = []
        for part in args.filters.split(","):
            p = _require(part, "filter bank")
            paths.extend(sorted(p.glob("*.bsif")) if p.is_dir() else [p])
        if not paths:
            raise UsageError(f"no .bsif banks found under {args.filters}")
        scales = [texture_coders.load_filter_bank(p) for p in paths]
    elif args.descriptor == "deep":
        weights_path = _require(args.weights, "weight file")
        args._weights = deep_net.load_weights(weights_path)
        scales = None
    else:  # pragma: no cover - argparse choices guard this
        raise UsageError(f"unknown descriptor {args.descriptor}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def work(m):
        feature = _extract_one(m, args, scales)
        save_feature(feature, m.video_id, out / f"{m.video_id}.json")
        return m.video_id, len(feature)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(work, manifests))
    else:
        results = [work(m) for m in manifests]
    for video_id, length in results:
        print(f"{video_id}: {length} values", file=sys.stderr)
    return 0


def _cmd_learn_filters(args) -> int:
    manifest_path = _require(args.manifest, "manifest")
    manifests = media_io.load_manifest(manifest_path)
    rng = np.random.default_rng(args.seed)
    patches = []
    needed = args.samples
    per_video = max(1, needed // max(1, len(manifests)) + 1)
    for m in manifests:
        video = media_io.load_video(m.frames_dir)
        t_idx = rng.integers(0, video.frames, per_video)
        y_idx = rng.integers(0, video.height - args.size + 1, per_video)
        x_idx = rng.integers(0, video.width - args.size + 1, per_video)
        for t, y, x in zip(t_idx, y_idx, x_idx):
            patches.append(video.gray[t, y:y + args.size, x:x + args.size])
    patches = np.stack(patches[:needed]) if len(patches) >= needed else np.stack(patches)
    bank = texture_coders.learn_bsif_filters(patches, f=args.count, seed=args.seed)
    texture_coders.save_filter_bank(bank, args.out)
    print(f"learned {bank.f} filters of size {bank.W} from {len(patches)} patches",
          file=sys.stderr)
    return 0


def _cmd_pairs(args) -> int:
    positives_path = _require(args.positives, "positives file")
    positives = eval_protocol.load_pairs(positives_path)
    full = eval_protocol.generate_negatives(positives, seed=args.seed)
    eval_protocol.save_pairs(full, args.out)
    print(f"{len(full.positives())} positives + {len(full.negatives())} negatives "
          f"-> {args.out}", file=sys.stderr)
    return 0


def _load_method_features(pairs: eval_protocol.KinPairList,
                          directory: Path) -> dict[str, FeatureVector]:
    needed = pairs.video_ids()
    missing = [v for v in needed if not (directory / f"{v}.json").exists()]
    if missing:
        raise UsageError(
            f"missing feature files under {directory}: {', '.join(missing)}"
        )
    feats = {}
    for v in needed:
        video_id, feature = load_feature(directory / f"{v}.json")
        feats[video_id] = feature
    return feats


def _cmd_train(args) -> int:
    pairs = eval_protocol.load_pairs(_require(args.pairs, "pairs file"))
    feats = _load_method_features(pairs, _require(args.features, "features dir"))
    X = np.stack([pair_combine(feats[e.video_a].values, feats[e.video_b].values)
                  for e in pairs.entries])
    y = np.array([e.label for e in pairs.entries])
    model = svm_train(X, y, C=args.C)
    descriptor = next(iter(feats.values())).descriptor
    save_model(model, descriptor, args.out)
    print(f"trained on {len(y)} pairs: objective {model.objective:.6g}, "
          f"{model.n_iter} updates", file=sys.stderr)
    return 0


def _cmd_evaluate(args) -> int:
    pairs = eval_protocol.load_pairs(_require(args.pairs, "pairs file"))
    methods: dict[str, dict[str, FeatureVector]] = {}
    for spec in args.features:
        name, _, directory = spec.partition("=")
        if not directory:
            raise UsageError(f"bad --features {spec!r}, expected NAME=DIR")
        methods[name] = _load_method_features(pairs, _require(directory, "features dir"))
    report = eval_protocol.evaluate_all(methods, pairs, C=args.C, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eval_protocol.save_report(report, out / "report.json", out / "report.txt")
    pair_ids = [e.pair_id for e in pairs.entries]
    labels = [e.label for e in pairs.entries]
    for m in report.methods:
        eval_protocol.save_roc_csv(m.roc, out / f"roc_{m.name}.csv")
        save_scores(pair_ids, labels, m.whole_scores, out / f"scores_{m.name}.csv")
    print((out / "report.txt").read_text(), file=sys.stderr)
    return 0


def _cmd_fuse(args) -> int:
    loaded = [load_scores(_require(p, "scores file")) for p in args.scores]
    pair_ids, labels, _ = loaded[0]
    for ids, lbs, _ in loaded[1:]:
        if ids != pair_ids or not np.array_equal(lbs, labels):
            raise UsageError("score files disagree on pair ids or labels")
    fused = fuse_scores([s for _, _, s in loaded])
    save_scores(pair_ids, labels, fused, args.out)
    return 0


def _cmd_roc(args) -> int:
    _, labels, scores = load_scores(_require(args.scores, "scores file"))
    curve = eval_protocol.roc_auc(scores, labels)
    eval_protocol.save_roc_csv(curve, args.out)
    print(f"AUC {curve.auc:.6f}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kinvid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic kinship dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--families", type=int, default=14)
    p.add_argument("--videos-per-subject", type=int, default=2)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--relations", default="")
    p.add_argument("--dynamics-only", action="store_true")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("align", help="crop and register faces to a template")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--template", choices=["texture", "deep"], default="texture")
    p.add_argument("--size", type=int, default=64)
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("extract", help="extract per-video feature files")
    p.add_argument("--manifest", required=True)
    p.add_argument("--descriptor", required=True,
                   choices=["lbptop", "lpqtop", "bsiftop", "deep"])
    p.add_argument("--out", required=True)
    p.add_argument("--scales", default="8:1,16:2,24:3")
    p.add_argument("--mapping", choices=["uniform", "full"], default="uniform")
    p.add_argument("--windows", default="3,5,7,9,11,13,15,17")
    p.add_argument("--filters", default="")
    p.add_argument("--weights", default="")
    p.add_argument("--frame-stride", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("learn-filters", help="learn a BSIF bank by ICA")
    p.add_argument("--manifest", required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_learn_filters)

    p = sub.add_parser("pairs", help="append generated negatives to positives")
    p.add_argument("--positives", required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pairs)

    p = sub.add_parser("train", help="train one SVM on a full pair list")
    p.add_argument("--features", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="leave-one-out evaluation and report")
    p.add_argument("--pairs", required=True)
    p.add_argument("--features", action="append", required=True,
                   metavar="NAME=DIR")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("fuse", help="sum aligned score files")
    p.add_argument("scores", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("roc", help="ROC curve CSV from a scores file")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_roc)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"kinvid: {err}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as err:
        print(f"kinvid: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"kinvid: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
