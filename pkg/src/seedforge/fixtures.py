"""Deterministic synthetic fixtures: blob images with matching network-output
files, sized so the full refine -> acm -> eval chain recovers the ground
truth at desk scale.

Construction: rectangular class blobs snapped to the coarsest feature grid,
so per-scale feature channels are exact blob indicators (+1 inside, -0.25
outside, optional Gaussian noise). Classifier weights select one channel per
class. Query/key tensors embed each patch as a one-hot region signature
(background / each blob / each overlap), scaled so the softmax affinity is
effectively block-diagonal: refinement then preserves indicators, the
negative background clamps to zero, and thresholding the upsampled seeds
reproduces the blob rectangles. Overlapping blobs yield genuinely
conflicting seeds (both near 1), which ACM must mark 255; the overlap is
also 255 in the ground truth. Everything derives from one Philox stream per
image, so identical (seed, spec) always produce identical bytes.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .mecp import derive_seed
from .tensor_io import write_png, write_tensor

_PALETTE = np.array(
    [[200, 60, 50], [60, 160, 220], [90, 190, 90], [230, 190, 60], [170, 90, 200]],
    dtype=np.int64,
)
_BG_COLOR = np.array([40, 40, 40], dtype=np.int64)
_BG_FEATURE = -0.25
_LOGIT_SCALE = 16.0  # within-region logit after the sqrt(D) division


@dataclass(frozen=True)
class FixtureSpec:
    num_images: int = 1
    image_size: int = 64
    num_classes: int = 2
    noise: float = 0.0
    overlap: bool = False
    scales: tuple = (8, 16)  # feature grid side lengths
    blocks: int = 2

    def __post_init__(self):
        if self.num_images < 1 or self.num_classes < 1 or self.image_size < 8:
            raise ValueError("need >= 1 image, >= 1 class, size >= 8")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        coarse = min(self.scales)
        if any(s < 1 or self.image_size % s for s in self.scales):
            raise ValueError("every scale must divide the image size")
        if any(s % coarse for s in self.scales):
            raise ValueError("scales must be multiples of the coarsest grid")


def _place_blobs(rng, cells: int, num_classes: int, overlap: bool):
    """Blob rectangles in coarse-cell coords: list of (r0, r1, c0, c1), end-exclusive."""
    if overlap:
        # two side-by-side rectangles sharing a vertical strip
        height = max(2, cells // 2)
        r0 = int(rng.integers(0, cells - height + 1))
        width = max(3, cells // 2)
        shift = max(1, width - max(1, cells // 8) - 1)
        c0 = max(0, (cells - width - shift) // 2)
        rects = [(r0, r0 + height, c0, c0 + width), (r0, r0 + height, c0 + shift, min(cells, c0 + shift + width))]
        return rects[: max(2, num_classes)]
    rects = []
    occupied = np.zeros((cells, cells), dtype=bool)
    for b in range(num_classes):
        placed = False
        for _ in range(64):
            h = int(rng.integers(2, max(3, cells // 2)))
            w = int(rng.integers(2, max(3, cells // 2)))
            r0 = int(rng.integers(0, cells - h + 1))
            c0 = int(rng.integers(0, cells - w + 1))
            pad_r0, pad_c0 = max(0, r0 - 1), max(0, c0 - 1)
            if not occupied[pad_r0 : r0 + h + 1, pad_c0 : c0 + w + 1].any():
                rects.append((r0, r0 + h, c0, c0 + w))
                occupied[r0 : r0 + h, c0 : c0 + w] = True
                placed = True
                break
        if not placed:
            # deterministic fallback: stack 2x2 blobs along the diagonal
            r0 = (2 * b) % (cells - 1)
            rects.append((r0, r0 + 2, r0, r0 + 2))
            occupied[r0 : r0 + 2, r0 : r0 + 2] = True
    return rects


def _cell_masks(rects, cells: int, num_classes: int):
    masks = np.zeros((num_classes, cells, cells), dtype=bool)
    for b, (r0, r1, c0, c1) in enumerate(rects[:num_classes]):
        masks[b, r0:r1, c0:c1] = True
    return masks


def _region_index(masks: np.ndarray) -> np.ndarray:
    """Distinct id per combination of covering blobs; 0 is pure background."""
    weights = 1 << np.arange(masks.shape[0], dtype=np.int64)
    codes = (masks * weights[:, None, None]).sum(axis=0)
    _, index = np.unique(codes, return_inverse=True)
    return index.reshape(codes.shape)


def generate_fixtures(seed: int, spec: FixtureSpec, out_dir) -> dict:
    """Write the fixture tree under ``out_dir`` and return its manifest."""
    size = spec.image_size
    cells = size // min(spec.scales)
    cell_px = size // cells
    class_ids = tuple(range(1, spec.num_classes + 1))

    for sub in ("images", "labels", "saliency", "features", "qk"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)

    # shared classifier weights: one-hot rows over B+2 feature channels
    weights = np.zeros((spec.num_classes, spec.num_classes + 2), dtype=np.float32)
    weights[np.arange(spec.num_classes), np.arange(spec.num_classes)] = 1.0
    write_tensor(weights, os.path.join(out_dir, "weights.tns"))

    image_ids = [f"img_{i:04d}" for i in range(spec.num_images)]
    for idx, image_id in enumerate(image_ids):
        rng = np.random.Generator(np.random.Philox(key=derive_seed(seed, image_id, idx)))
        rects = _place_blobs(rng, cells, spec.num_classes, spec.overlap)
        masks = _cell_masks(rects, cells, spec.num_classes)

        # ground truth: class id per blob, 255 where blobs overlap
        pix_masks = np.kron(masks, np.ones((cell_px, cell_px), dtype=bool))
        gt = np.zeros((size, size), dtype=np.uint8)
        for b in range(spec.num_classes):
            gt[pix_masks[b]] = class_ids[b]
        overlap_px = pix_masks.sum(axis=0) > 1
        gt[overlap_px] = 255
        write_png(gt, os.path.join(out_dir, "labels", f"{image_id}.png"))

        # RGB image: palette blobs over dark background plus mild speckle
        img = np.tile(_BG_COLOR, (size, size, 1))
        for b in range(spec.num_classes):
            img[pix_masks[b]] = _PALETTE[b % len(_PALETTE)]
        speckle = rng.integers(-12, 13, size=(size, size, 1))
        img = np.clip(img + speckle, 0, 255).astype(np.uint8)
        write_png(img, os.path.join(out_dir, "images", f"{image_id}.png"))

        # saliency: union of blobs dilated by one coarse cell
        fg = pix_masks.any(axis=0)
        sal = ndimage.binary_dilation(fg, iterations=cell_px)
        write_png((sal * np.uint8(255)), os.path.join(out_dir, "saliency", f"{image_id}.png"))

        region = _region_index(masks)
        n_regions = int(region.max()) + 1
        for scale in spec.scales:
            rep = scale // cells
            fine_masks = np.kron(masks, np.ones((rep, rep), dtype=bool))
            feats = np.where(fine_masks, 1.0, _BG_FEATURE)
            distract = np.zeros((2, scale, scale))
            feats = np.concatenate([feats, distract], axis=0)
            if spec.noise > 0:
                feats = feats + spec.noise * rng.standard_normal(feats.shape)
            write_tensor(
                feats.astype(np.float32),
                os.path.join(out_dir, "features", f"{image_id}_s{scale}.tns"),
            )

            fine_region = np.kron(region, np.ones((rep, rep), dtype=np.int64))
            tokens = scale * scale + 1
            dim = n_regions + 1
            tau = np.sqrt(_LOGIT_SCALE * np.sqrt(dim))
            embed = np.zeros((tokens, dim))
            embed[0, 0] = tau  # class token slot, stripped downstream
            embed[np.arange(1, tokens), fine_region.ravel() + 1] = tau
            for blk in range(spec.blocks):
                q = embed.copy()
                k = embed.copy()
                if spec.noise > 0:
                    q = q + 0.1 * spec.noise * rng.standard_normal(q.shape)
                    k = k + 0.1 * spec.noise * rng.standard_normal(k.shape)
                base = os.path.join(out_dir, "qk", f"{image_id}_s{scale}_b{blk}")
                write_tensor(q.astype(np.float32), base + "_q.tns")
                write_tensor(k.astype(np.float32), base + "_k.tns")

    manifest = {
        "seed": seed,
        "image_size": spec.image_size,
        "num_classes": spec.num_classes,
        "class_ids": list(class_ids),
        "noise": spec.noise,
        "overlap": spec.overlap,
        "scales": list(spec.scales),
        "blocks": spec.blocks,
        "images": image_ids,
        "recommended_acm": {"conflict_rate": 0.9, "bg_threshold": 128, "seed_bg_alpha": 0.5},
    }
    with open(os.path.join(out_dir, "fixture.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
