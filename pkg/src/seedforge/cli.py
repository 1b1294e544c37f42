"""Command-line front end.

Subcommands: slic, mecp, refine, acm, eval, pipeline, fixtures.
Exit codes: 0 success, 2 configuration/argument error, 3 data error.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .acm import AcmParams, apply_acm
from .cam_refine import (
    CamStack,
    affinity_from_qk,
    average_affinity,
    clamp_negative,
    compute_cam,
    multiscale_aggregate,
    refine_cam,
    strip_class_token,
)
from .errors import ConfigError, SeedforgeError
from .evaluation import accumulate, confusion_matrix, miou
from .fixtures import FixtureSpec, generate_fixtures
from .mecp import EstimationSchedule, mecp_for_epoch
from .pipeline import dump_default_config, load_config, run_pipeline, write_metrics_csv
from .slic import SlicParams, slic_segment
from .tensor_io import read_png, read_tensor, write_png, write_tensor

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _int_list(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


def cmd_slic(args) -> int:
    img = read_png(args.input)
    params = SlicParams(k=args.k, compactness=args.compactness, max_iters=args.iters)
    labeling = slic_segment(img, params)
    if labeling.num_segments > 255:
        # ids no longer fit 8-bit PNG; fall back to the tensor container
        write_tensor(labeling.labels.astype(np.float32), args.output)
    else:
        write_png(labeling.labels.astype(np.uint8), args.output)
    print(f"{args.input}: {labeling.num_segments} segments -> {args.output}")
    return EXIT_OK


def cmd_mecp(args) -> int:
    img = read_png(args.input)
    schedule = EstimationSchedule(ks=_int_list(args.schedule), hide_prob=args.hide_prob)
    image_id = os.path.splitext(os.path.basename(args.input))[0]
    pair = mecp_for_epoch(img, schedule, args.epoch, args.seed, image_id=image_id)
    write_png(pair.cp, args.out_cp)
    write_png(pair.cp_bar, args.out_cpbar)
    print(f"epoch {args.epoch}: k={schedule.ks[args.epoch % len(schedule.ks)]} -> {args.out_cp}, {args.out_cpbar}")
    return EXIT_OK


def cmd_refine(args) -> int:
    if len(args.features) != len(args.qk):
        raise ConfigError("need one --qk group per --features tensor")
    weights = read_tensor(args.weights)
    class_ids = _int_list(args.classes) if args.classes else tuple(range(weights.shape[0]))
    stacks = []
    for feat_path, qk_arg in zip(args.features, args.qk):
        feats = read_tensor(feat_path)
        cam = compute_cam(feats, weights, class_ids)
        names = qk_arg.split(",")
        if len(names) < 2 or len(names) % 2:
            raise ConfigError(f"--qk needs Q,K pairs, got {qk_arg!r}")
        blocks = [
            affinity_from_qk(read_tensor(names[i]), read_tensor(names[i + 1]))
            for i in range(0, len(names), 2)
        ]
        a_star = strip_class_token(average_affinity(blocks))
        stacks.append(clamp_negative(refine_cam(cam, a_star, cam_first=args.cam_first)))
    if args.target:
        h, w = (int(t) for t in args.target.lower().split("x"))
        target = (h, w)
    else:
        target = max((s.maps.shape[1], s.maps.shape[2]) for s in stacks)
    seeds = multiscale_aggregate(stacks, target, normalize_per_scale=args.normalize_per_scale)
    write_tensor(seeds.maps.astype(np.float32), args.out)
    print(f"seeds {seeds.maps.shape} -> {args.out}")
    return EXIT_OK


def cmd_acm(args) -> int:
    maps = read_tensor(args.seeds).astype(np.float64)
    class_ids = _int_list(args.classes)
    seeds = CamStack(maps=maps, class_ids=class_ids)
    saliency = read_png(args.saliency) if args.saliency else None
    params = AcmParams(
        conflict_rate=args.conflict_rate, bg_threshold=args.tbg, seed_bg_alpha=args.alpha
    )
    labels = apply_acm(seeds, saliency, params)
    write_png(labels, args.out)
    ignored = int((labels == 255).sum())
    print(f"{args.out}: {ignored} ignored pixels of {labels.size}")
    return EXIT_OK


def cmd_eval(args) -> int:
    preds = sorted(p for p in os.listdir(args.pred_dir) if p.endswith(".png"))
    if not preds:
        raise SeedforgeError(f"no predictions under {args.pred_dir}")
    cm = confusion_matrix(args.classes)
    for name in preds:
        gt_path = os.path.join(args.gt_dir, name)
        if not os.path.exists(gt_path):
            raise SeedforgeError(f"missing ground truth for {name}")
        cm = accumulate(cm, read_png(os.path.join(args.pred_dir, name)), read_png(gt_path))
    per_class, mean = miou(cm, args.count_ignored_as_error)
    for c, v in enumerate(per_class):
        print(f"class {c}: {'undefined' if np.isnan(v) else format(v, '.6f')}")
    print(f"mean IoU: {'undefined' if np.isnan(mean) else format(mean, '.6f')}")
    if args.csv:
        write_metrics_csv(args.csv, per_class, mean)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    if args.dump_config:
        print(dump_default_config(), end="")
        return EXIT_OK
    if not args.config:
        raise ConfigError("pipeline needs --config (or --dump-config)")
    manifest = run_pipeline(load_config(args.config))
    metrics = manifest.get("metrics")
    if metrics:
        print(f"mean IoU: {metrics['mean_iou']}")
    print(f"manifest: {len(manifest['images'])} images")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    spec = FixtureSpec(
        num_images=args.images,
        image_size=args.size,
        num_classes=args.classes,
        noise=args.noise,
        overlap=args.overlap,
        scales=_int_list(args.scales),
        blocks=args.blocks,
    )
    manifest = generate_fixtures(args.seed, spec, args.out_dir)
    print(json.dumps({"images": len(manifest["images"]), "out_dir": args.out_dir}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seedforge")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("slic", help="superpixel segmentation")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_slic)

    p = sub.add_parser("mecp", help="complementary patch pair for an epoch")
    p.add_argument("--epoch", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schedule", default="200,250,300,350,400")
    p.add_argument("--hide-prob", type=float, default=0.5)
    p.add_argument("input")
    p.add_argument("out_cp")
    p.add_argument("out_cpbar")
    p.set_defaults(func=cmd_mecp)

    p = sub.add_parser("refine", help="CAM + affinity refinement to seeds")
    p.add_argument("--features", action="append", required=True,
                   help="feature tensor; repeat once per scale")
    p.add_argument("--weights", required=True)
    p.add_argument("--qk", action="append", required=True,
                   help="comma list Q1,K1[,Q2,K2...]; repeat once per scale")
    p.add_argument("--classes", default="", help="class ids, default 0..B-1")
    p.add_argument("--scales", default="", help="informational scale list")
    p.add_argument("--target", default="", help="output HxW, default largest input")
    p.add_argument("--normalize-per-scale", action="store_true")
    p.add_argument("--cam-first", action="store_true",
                   help="transposed refinement operand order")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("acm", help="conflict-aware pseudo labels from seeds")
    p.add_argument("--seeds", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--saliency", default="")
    p.add_argument("--conflict-rate", type=float, default=0.9)
    p.add_argument("--tbg", type=int, default=128)
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_acm)

    p = sub.add_parser("eval", help="mean IoU over prediction/GT directories")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--classes", type=int, required=True, help="class count incl. background")
    p.add_argument("--count-ignored-as-error", action="store_true")
    p.add_argument("--csv", default="")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="refine -> acm -> eval over a directory")
    p.add_argument("--config", default="")
    p.add_argument("--dump-config", action="store_true")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("fixtures", help="generate synthetic test fixtures")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--images", type=int, default=1)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--overlap", action="store_true")
    p.add_argument("--scales", default="8,16")
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SeedforgeError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
