"""Conflict-aware pseudo-label construction from normalized class seeds.

The initial label is the argmax class wherever its seed value clears the
background threshold ``seed_bg_alpha``, else background 0. Two rules then
convert unreliable pixels to the ignore value 255:

  rule one   a pixel where more than one class's seed exceeds
             conflict_rate * (per-pixel max seed), strict inequality;
  rule two   a pixel the saliency map calls foreground (S >= bg_threshold)
             but the post-rule-one label calls background.

Rule two only runs when a saliency map is supplied. Neither rule ever
rewrites a label to a different class: pixels either keep their label or
become 255.
"""

from dataclasses import dataclass

import numpy as np

from .cam_refine import CamStack
from .errors import ShapeMismatch

IGNORE_LABEL = 255


@dataclass(frozen=True)
class AcmParams:
    conflict_rate: float = 0.9
    bg_threshold: int = 128
    seed_bg_alpha: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.conflict_rate <= 1.0:
            raise ValueError("conflict_rate must be in [0, 1]")
        if not 0 <= self.bg_threshold <= 255:
            raise ValueError("bg_threshold must be in [0, 255]")
        if not 0.0 <= self.seed_bg_alpha <= 1.0:
            raise ValueError("seed_bg_alpha must be in [0, 1]")


@dataclass(frozen=True)
class ConflictField:
    """Per-pixel outcomes of the two rules."""

    e_fir: np.ndarray  # (H, W) uint32 count of classes above the conflict bar
    e_sec: np.ndarray  # (H, W) bool saliency-vs-background disagreement


def _check_class_ids(class_ids):
    for cid in class_ids:
        if not 1 <= cid <= 254:
            raise ValueError(f"class id {cid} collides with background 0 or ignore 255")


def initial_pseudo_label(
    seeds: CamStack, params: AcmParams, saliency: np.ndarray = None
) -> np.ndarray:
    """Argmax-plus-threshold labeling of normalized seeds.

    Returns (H, W) uint8 with values in {0} | class_ids. The saliency map is
    only shape-checked here: a sub-threshold seed is already background, and
    saliency never overrides a confident seed, so it cannot change this
    stage's output. It participates through rule two instead.
    """
    maps = seeds.maps
    _check_class_ids(seeds.class_ids)
    if saliency is not None and saliency.shape != maps.shape[1:]:
        raise ShapeMismatch(f"saliency {saliency.shape} vs seeds {maps.shape[1:]}")
    winner = maps.argmax(axis=0)  # ties: lowest stack index
    confidence = np.take_along_axis(maps, winner[None], axis=0)[0]
    ids = np.asarray(seeds.class_ids, dtype=np.uint8)
    labels = np.where(confidence >= params.seed_bg_alpha, ids[winner], 0)
    return labels.astype(np.uint8)


def conflict_count(seeds: CamStack, conflict_rate: float) -> np.ndarray:
    """Rule-one counts: per pixel, how many classes exceed
    conflict_rate * max seed (strictly)."""
    maps = seeds.maps
    peak = maps.max(axis=0)
    return (maps > conflict_rate * peak).sum(axis=0).astype(np.uint32)


def saliency_conflict(
    saliency: np.ndarray, labels_after_fir: np.ndarray, bg_threshold: int
) -> np.ndarray:
    """Rule-two mask: saliency says foreground while the label says background.

    255 pixels fail the background test, so they always yield False.
    """
    if saliency.shape != labels_after_fir.shape:
        raise ShapeMismatch(f"saliency {saliency.shape} vs labels {labels_after_fir.shape}")
    return (saliency >= bg_threshold) & (labels_after_fir == 0)


def apply_acm(seeds: CamStack, saliency: np.ndarray = None, params: AcmParams = None) -> np.ndarray:
    """Initial label, then rule one, then (with saliency) rule two.

    Deterministic and stable: rerunning on the same inputs reproduces the
    same map, and no non-255 label ever changes class.
    """
    params = params or AcmParams()
    labels = initial_pseudo_label(seeds, params, saliency)
    e_fir = conflict_count(seeds, params.conflict_rate)
    labels[e_fir > 1] = IGNORE_LABEL
    if saliency is not None:
        e_sec = saliency_conflict(saliency, labels, params.bg_threshold)
        labels[e_sec] = IGNORE_LABEL
    return labels


def conflict_fields(seeds: CamStack, saliency: np.ndarray, params: AcmParams) -> ConflictField:
    """Both rule outcomes for inspection; rule two against the post-rule-one labels."""
    labels = initial_pseudo_label(seeds, params, saliency)
    e_fir = conflict_count(seeds, params.conflict_rate)
    labels[e_fir > 1] = IGNORE_LABEL
    if saliency is None:
        e_sec = np.zeros(labels.shape, dtype=bool)
    else:
        e_sec = saliency_conflict(saliency, labels, params.bg_threshold)
    return ConflictField(e_fir=e_fir, e_sec=e_sec)
