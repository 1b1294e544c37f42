"""Directory-level refine -> acm -> eval pipeline with a reproducibility
manifest.

The input tree follows the fixture layout (images/, labels/, saliency/,
features/{id}_s{N}.tns, qk/{id}_s{N}_b{J}_{q,k}.tns, weights.tns). Every
image is processed independently, so a worker pool of any size produces
byte-identical outputs; the metric reduction sums integer confusion matrices
in sorted image order. The manifest records config, input hashes, output
hashes and metrics with sorted keys and no timestamps: identical config and
inputs give an identical manifest.
"""

import configparser
import glob
import hashlib
import io
import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .acm import AcmParams, apply_acm
from .cam_refine import (
    CamStack,
    average_affinity,
    affinity_from_qk,
    clamp_negative,
    compute_cam,
    multiscale_aggregate,
    refine_cam,
    strip_class_token,
)
from .errors import ConfigError, SeedforgeError, ShapeMismatch
from .evaluation import accumulate, confusion_matrix, miou
from .tensor_io import read_png, read_tensor, write_png, write_tensor

THREADS_ENV = "SEEDFORGE_THREADS"


@dataclass
class PipelineConfig:
    input_dir: str = ""
    output_dir: str = ""
    class_ids: tuple = ()  # empty = read from fixture.json
    global_seed: int = 0
    threads: int = 0  # 0 = cpu count; SEEDFORGE_THREADS caps either way
    normalize_per_scale: bool = False
    cam_first: bool = False
    acm: AcmParams = field(default_factory=AcmParams)
    use_saliency: bool = True
    eval_enabled: bool = True
    count_ignored_as_error: bool = False
    csv: str = ""


DEFAULT_CONFIG = """\
[pipeline]
input_dir =
output_dir =
# comma-separated foreground class ids; empty reads fixture.json
class_ids =
global_seed = 0
# 0 = one worker per cpu; SEEDFORGE_THREADS caps either value
threads = 0

[refine]
normalize_per_scale = false
cam_first = false

[acm]
conflict_rate = 0.9
bg_threshold = 128
seed_bg_alpha = 0.3
use_saliency = true

[eval]
enabled = true
count_ignored_as_error = false
# write per-class IoU rows here (relative to output_dir); empty disables
csv = metrics.csv
"""


def dump_default_config() -> str:
    """The full config schema with every default spelled out."""
    return DEFAULT_CONFIG


def load_config(path) -> PipelineConfig:
    """Parse and range-check an INI config; raises ConfigError on any problem."""
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    try:
        pl = parser["pipeline"]
        ids = tuple(
            int(t) for t in pl.get("class_ids", "").replace(",", " ").split()
        )
        cfg = PipelineConfig(
            input_dir=pl.get("input_dir", ""),
            output_dir=pl.get("output_dir", ""),
            class_ids=ids,
            global_seed=pl.getint("global_seed", 0),
            threads=pl.getint("threads", 0),
            normalize_per_scale=parser.getboolean("refine", "normalize_per_scale", fallback=False),
            cam_first=parser.getboolean("refine", "cam_first", fallback=False),
            acm=AcmParams(
                conflict_rate=parser.getfloat("acm", "conflict_rate", fallback=0.9),
                bg_threshold=parser.getint("acm", "bg_threshold", fallback=128),
                seed_bg_alpha=parser.getfloat("acm", "seed_bg_alpha", fallback=0.3),
            ),
            use_saliency=parser.getboolean("acm", "use_saliency", fallback=True),
            eval_enabled=parser.getboolean("eval", "enabled", fallback=True),
            count_ignored_as_error=parser.getboolean(
                "eval", "count_ignored_as_error", fallback=False
            ),
            csv=parser.get("eval", "csv", fallback=""),
        )
    except (KeyError, ValueError, configparser.Error) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: PipelineConfig) -> None:
    if not cfg.input_dir or not os.path.isdir(cfg.input_dir):
        raise ConfigError(f"input_dir not found: {cfg.input_dir!r}")
    if not cfg.output_dir:
        raise ConfigError("output_dir is required")
    if cfg.threads < 0:
        raise ConfigError("threads must be >= 0")
    try:
        AcmParams(
            conflict_rate=cfg.acm.conflict_rate,
            bg_threshold=cfg.acm.bg_threshold,
            seed_bg_alpha=cfg.acm.seed_bg_alpha,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _worker_count(cfg: PipelineConfig) -> int:
    workers = cfg.threads or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer: {cap!r}") from exc
    return max(1, workers)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _discover_images(input_dir):
    pattern = os.path.join(input_dir, "features", "*_s*.tns")
    ids = sorted({re.sub(r"_s\d+$", "", os.path.splitext(os.path.basename(p))[0])
                  for p in glob.glob(pattern)})
    if not ids:
        raise ConfigError(f"no feature tensors under {input_dir}/features")
    return ids


def _scales_for(input_dir, image_id):
    paths = sorted(glob.glob(os.path.join(input_dir, "features", f"{image_id}_s*.tns")))
    scales = sorted(int(re.search(r"_s(\d+)\.tns$", p).group(1)) for p in paths)
    return scales


def refine_image(input_dir, image_id, class_ids, normalize_per_scale=False, cam_first=False):
    """Seeds for one image: per-scale CAM + affinity refinement, aggregated
    to the image's pixel size. Returns (seeds CamStack, list of input paths)."""
    weights_path = os.path.join(input_dir, "weights.tns")
    weights = read_tensor(weights_path)
    inputs = [weights_path]
    image_png = os.path.join(input_dir, "images", f"{image_id}.png")
    label_png = os.path.join(input_dir, "labels", f"{image_id}.png")
    if os.path.exists(image_png):
        target = read_png(image_png).shape[:2]
        inputs.append(image_png)
    elif os.path.exists(label_png):
        target = read_png(label_png).shape[:2]
    else:
        raise SeedforgeError(f"{image_id}: no image or label file to size the output")

    stacks = []
    for scale in _scales_for(input_dir, image_id):
        fpath = os.path.join(input_dir, "features", f"{image_id}_s{scale}.tns")
        feats = read_tensor(fpath)
        inputs.append(fpath)
        cam = compute_cam(feats, weights, class_ids)
        qpaths = sorted(
            glob.glob(os.path.join(input_dir, "qk", f"{image_id}_s{scale}_b*_q.tns"))
        )
        if not qpaths:
            raise SeedforgeError(f"{image_id}: no q/k tensors for scale {scale}")
        blocks = []
        for qpath in qpaths:
            kpath = qpath[: -len("_q.tns")] + "_k.tns"
            blocks.append(affinity_from_qk(read_tensor(qpath), read_tensor(kpath)))
            inputs.extend([qpath, kpath])
        a_star = strip_class_token(average_affinity(blocks))
        stacks.append(clamp_negative(refine_cam(cam, a_star, cam_first=cam_first)))
    seeds = multiscale_aggregate(stacks, target, normalize_per_scale=normalize_per_scale)
    return seeds, inputs


def _process_image(cfg: PipelineConfig, image_id: str, class_ids):
    seeds, inputs = refine_image(
        cfg.input_dir,
        image_id,
        class_ids,
        normalize_per_scale=cfg.normalize_per_scale,
        cam_first=cfg.cam_first,
    )
    seeds_path = os.path.join(cfg.output_dir, "seeds", f"{image_id}.tns")
    write_tensor(seeds.maps.astype(np.float32), seeds_path)

    saliency = None
    sal_path = os.path.join(cfg.input_dir, "saliency", f"{image_id}.png")
    if cfg.use_saliency and os.path.exists(sal_path):
        saliency = read_png(sal_path)
        if saliency.ndim != 2:
            raise ShapeMismatch(f"{image_id}: saliency must be grayscale")
        inputs.append(sal_path)
    pred = apply_acm(seeds, saliency, cfg.acm)
    pred_path = os.path.join(cfg.output_dir, "pred", f"{image_id}.png")
    write_png(pred, pred_path)

    record = {
        "inputs": {os.path.relpath(p, cfg.input_dir): _sha256(p) for p in sorted(set(inputs))},
        "outputs": {
            os.path.relpath(seeds_path, cfg.output_dir): _sha256(seeds_path),
            os.path.relpath(pred_path, cfg.output_dir): _sha256(pred_path),
        },
    }

    cm = None
    gt_path = os.path.join(cfg.input_dir, "labels", f"{image_id}.png")
    if cfg.eval_enabled and os.path.exists(gt_path):
        gt = read_png(gt_path)
        if gt.ndim != 2:
            raise ShapeMismatch(f"{image_id}: ground truth must be grayscale")
        record["inputs"][os.path.relpath(gt_path, cfg.input_dir)] = _sha256(gt_path)
        cm = accumulate(confusion_matrix(max(class_ids) + 1), pred, gt)
    return image_id, record, cm


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage over the input directory; returns the manifest."""
    validate_config(cfg)
    class_ids = cfg.class_ids
    if not class_ids:
        fixture_json = os.path.join(cfg.input_dir, "fixture.json")
        if not os.path.exists(fixture_json):
            raise ConfigError("class_ids empty and no fixture.json to read them from")
        with open(fixture_json) as fh:
            class_ids = tuple(json.load(fh)["class_ids"])

    image_ids = _discover_images(cfg.input_dir)
    for sub in ("seeds", "pred"):
        os.makedirs(os.path.join(cfg.output_dir, sub), exist_ok=True)

    workers = _worker_count(cfg)
    if workers == 1:
        results = [_process_image(cfg, i, class_ids) for i in image_ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: _process_image(cfg, i, class_ids), image_ids))
    results.sort(key=lambda r: r[0])

    manifest = {
        "config": {
            "class_ids": list(class_ids),
            "global_seed": cfg.global_seed,
            "normalize_per_scale": cfg.normalize_per_scale,
            "cam_first": cfg.cam_first,
            "acm": {
                "conflict_rate": cfg.acm.conflict_rate,
                "bg_threshold": cfg.acm.bg_threshold,
                "seed_bg_alpha": cfg.acm.seed_bg_alpha,
                "use_saliency": cfg.use_saliency,
            },
            "eval": {
                "enabled": cfg.eval_enabled,
                "count_ignored_as_error": cfg.count_ignored_as_error,
            },
        },
        "images": {image_id: record for image_id, record, _ in results},
    }

    matrices = [cm for _, _, cm in results if cm is not None]
    if matrices:
        total = matrices[0]
        for cm in matrices[1:]:
            total = total + cm
        per_class, mean = miou(total, cfg.count_ignored_as_error)
        manifest["metrics"] = {
            "per_class_iou": {
                str(c): (None if np.isnan(v) else round(float(v), 10))
                for c, v in enumerate(per_class)
            },
            "mean_iou": None if np.isnan(mean) else round(float(mean), 10),
            "scored_pixels": int(total.counts.sum()),
        }
        if cfg.csv:
            write_metrics_csv(os.path.join(cfg.output_dir, cfg.csv), per_class, mean)

    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    with open(os.path.join(cfg.output_dir, "manifest.json"), "w") as fh:
        fh.write(text)
    return manifest


def write_metrics_csv(path, per_class, mean):
    buf = io.StringIO()
    buf.write("class_id,iou\n")
    for c, v in enumerate(per_class):
        buf.write(f"{c},{'' if np.isnan(v) else format(v, '.10f')}\n")
    buf.write(f"mean,{'' if np.isnan(mean) else format(mean, '.10f')}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
