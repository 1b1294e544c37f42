"""Complementary patch pairs over superpixels, with a per-epoch k schedule.

An image is split into two images whose elementwise sum is the original:
every superpixel is hidden (zeroed) in one of the two with probability
``hide_prob``. The superpixel count k rotates through the schedule by
``epoch mod len(ks)``, so epochs sharing a schedule slot produce identical
pairs. All randomness flows through a counter-based Philox generator keyed
by (global seed, image id, schedule slot), which makes results independent
of processing order.
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch
from .slic import SlicParams, SuperpixelLabeling, slic_segment

DEFAULT_KS = (200, 250, 300, 350, 400)


@dataclass(frozen=True)
class EstimationSchedule:
    """Ordered k values, one per epoch slot, plus the per-patch hide probability."""

    ks: tuple = DEFAULT_KS
    hide_prob: float = 0.5

    def __post_init__(self):
        if len(self.ks) == 0:
            raise ValueError("schedule needs at least one k")
        if any(k < 1 for k in self.ks):
            raise ValueError("every k must be >= 1")
        if not 0.0 <= self.hide_prob <= 1.0:
            raise ValueError("hide_prob must be in [0, 1]")


@dataclass(frozen=True)
class HideMask:
    """Boolean hide decisions, constant within each superpixel."""

    hidden: np.ndarray  # (H, W) bool
    hidden_patch_ids: frozenset


@dataclass(frozen=True)
class ComplementaryPair:
    """cp keeps the visible patches, cp_bar the hidden ones; cp + cp_bar == image."""

    cp: np.ndarray
    cp_bar: np.ndarray


def k_for_epoch(schedule: EstimationSchedule, epoch: int) -> int:
    """Schedule lookup: ks[epoch mod len(ks)]."""
    return schedule.ks[epoch % len(schedule.ks)]


def derive_seed(global_seed: int, image_id: str, slot: int) -> int:
    """Stable 64-bit stream key from (global seed, image id, schedule slot)."""
    h = hashlib.sha256()
    h.update(struct.pack("<Q", global_seed & 0xFFFFFFFFFFFFFFFF))
    h.update(image_id.encode("utf-8"))
    h.update(b"\x00")
    h.update(struct.pack("<Q", slot))
    return int.from_bytes(h.digest()[:8], "little")


def generate_hide_mask(labeling: SuperpixelLabeling, hide_prob: float, seed: int) -> HideMask:
    """Hide each segment independently with probability hide_prob (Philox-keyed)."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    draws = rng.random(labeling.num_segments)
    hidden_per_segment = draws < hide_prob
    hidden = hidden_per_segment[labeling.labels]
    ids = frozenset(int(i) for i in np.nonzero(hidden_per_segment)[0])
    return HideMask(hidden=hidden, hidden_patch_ids=ids)


def apply_complementary(img: np.ndarray, mask: HideMask) -> ComplementaryPair:
    """Split the image into (visible, hidden) halves; the sum is exact."""
    img = np.asarray(img)
    if img.shape[:2] != mask.hidden.shape:
        raise DimMismatch(f"image {img.shape[:2]} vs mask {mask.hidden.shape}")
    keep = ~mask.hidden
    if img.ndim == 3:
        keep = keep[..., None]
        hide = mask.hidden[..., None]
    else:
        hide = mask.hidden
    return ComplementaryPair(cp=img * keep, cp_bar=img * hide)


def mecp_for_epoch(
    img: np.ndarray,
    schedule: EstimationSchedule,
    epoch: int,
    seed: int,
    image_id: str = "",
    compactness: float = 10.0,
    max_iters: int = 10,
    min_segment_ratio: float = 0.25,
) -> ComplementaryPair:
    """Full per-epoch transform: pick k, segment, draw the mask, split."""
    slot = epoch % len(schedule.ks)
    params = SlicParams(
        k=schedule.ks[slot],
        compactness=compactness,
        max_iters=max_iters,
        min_segment_ratio=min_segment_ratio,
    )
    labeling = slic_segment(img, params)
    mask = generate_hide_mask(labeling, schedule.hide_prob, derive_seed(seed, image_id, slot))
    return apply_complementary(img, mask)
