"""Class activation maps and their refinement with attention affinity.

A CAM stack holds one spatial evidence map per image-level class. Affinity
matrices come from attention query/key products: rowwise softmax of
Q K^T / sqrt(D), averaged over blocks, with the class token (sequence
index 0) stripped before use. Refinement multiplies the affinity into the
flattened map, spreading evidence along patch-to-patch similarity.

Resampling convention, fixed for the whole pipeline: bilinear with
half-pixel centers (x_src = (x_dst + 0.5) * W_src / W_dst - 0.5) and
edge-clamped coordinates.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ClassMismatch, DimMismatch, EmptyList, ShapeMismatch, SizeMismatch, TooSmall

DEFAULT_SCALES = (256, 512, 768)


@dataclass(frozen=True)
class CamStack:
    """Per-class activation maps (B, h, w) and their dataset class ids."""

    maps: np.ndarray
    class_ids: tuple

    def __post_init__(self):
        if self.maps.ndim != 3:
            raise ShapeMismatch(f"expected (B, h, w) maps, got {self.maps.shape}")
        if len(self.class_ids) != self.maps.shape[0]:
            raise ShapeMismatch(
                f"{self.maps.shape[0]} maps but {len(self.class_ids)} class ids"
            )


def compute_cam(features: np.ndarray, weights: np.ndarray, class_ids=None) -> CamStack:
    """maps[b] = sum_c weights[b, c] * features[c].

    Accumulates channels in index order in float64, so the result is
    reproducible bit-for-bit regardless of array layout.
    """
    features = np.asarray(features, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if features.ndim != 3 or weights.ndim != 2:
        raise ShapeMismatch(
            f"expected (C, h, w) features and (B, C) weights, got {features.shape}, {weights.shape}"
        )
    if features.shape[0] != weights.shape[1]:
        raise DimMismatch(
            f"feature channels {features.shape[0]} vs weight columns {weights.shape[1]}"
        )
    nb = weights.shape[0]
    maps = np.zeros((nb, *features.shape[1:]))
    for c in range(features.shape[0]):
        maps += weights[:, c, None, None] * features[c]
    if class_ids is None:
        class_ids = tuple(range(nb))
    return CamStack(maps=maps, class_ids=tuple(class_ids))


def affinity_from_qk(q: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Row-stochastic affinity: softmax over rows of Q K^T / sqrt(D).

    Softmax subtracts the per-row max first; the result is invariant under
    per-row constant shifts of the logits.
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if q.ndim != 2 or q.shape != k.shape:
        raise DimMismatch(f"Q {q.shape} and K {k.shape} must both be (tokens, D)")
    if q.shape[1] < 1:
        raise DimMismatch("key dimension must be >= 1")
    logits = q @ k.T / np.sqrt(q.shape[1])
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def average_affinity(blocks) -> np.ndarray:
    """Elementwise mean of per-block affinity maps (row-stochasticity survives)."""
    blocks = list(blocks)
    if not blocks:
        raise EmptyList("need at least one affinity map")
    first = np.asarray(blocks[0], dtype=np.float64)
    acc = first.copy()
    for b in blocks[1:]:
        b = np.asarray(b, dtype=np.float64)
        if b.shape != first.shape:
            raise SizeMismatch(f"affinity sizes differ: {first.shape} vs {b.shape}")
        acc += b
    return acc / len(blocks)


def strip_class_token(a: np.ndarray) -> np.ndarray:
    """Drop row 0 and column 0 (the class token slot). Rows are no longer
    stochastic afterwards; refinement does not require them to be."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got {a.shape}")
    if a.shape[0] < 2:
        raise TooSmall("cannot strip the class token from a 1x1 map")
    return a[1:, 1:].copy()


def refine_cam(cam: CamStack, a_star: np.ndarray, cam_first: bool = False) -> CamStack:
    """Spread each class map along the affinity: out = A* @ flatten(map).

    The published formula's operand order does not type-check as written;
    this orientation (affinity rows aggregate CAM values) is the default,
    and ``cam_first=True`` selects the transposed alternative
    (flatten(map)^T @ A*) for A/B comparison.
    """
    a_star = np.asarray(a_star, dtype=np.float64)
    nb, fh, fw = cam.maps.shape
    if a_star.ndim != 2 or a_star.shape[0] != a_star.shape[1]:
        raise ShapeMismatch(f"affinity must be square, got {a_star.shape}")
    if fh * fw != a_star.shape[0]:
        raise ShapeMismatch(f"maps are {fh}x{fw} but affinity is {a_star.shape[0]}x{a_star.shape[0]}")
    if fh != fw:
        raise ShapeMismatch(f"maps must be square to round-trip the flatten, got {fh}x{fw}")
    mat = a_star.T if cam_first else a_star
    flat = cam.maps.reshape(nb, fh * fw)
    refined = flat @ mat.T  # row b is mat @ flat[b]
    return CamStack(maps=refined.reshape(nb, fh, fw), class_ids=cam.class_ids)


def clamp_negative(cam: CamStack) -> CamStack:
    """Zero out negative activations (applied after refinement, before
    normalization: maps are treated as non-negative evidence)."""
    return CamStack(maps=np.maximum(cam.maps, 0.0), class_ids=cam.class_ids)


def normalize_cam(cam: CamStack) -> CamStack:
    """Min-max normalize each class map to [0, 1]; constant maps become zeros."""
    maps = np.asarray(cam.maps, dtype=np.float64)
    lo = maps.min(axis=(1, 2), keepdims=True)
    hi = maps.max(axis=(1, 2), keepdims=True)
    span = hi - lo
    flatmask = (span == 0.0)[:, 0, 0]
    out = np.where(flatmask[:, None, None], 0.0, (maps - lo) / np.where(span == 0, 1.0, span))
    return CamStack(maps=out, class_ids=cam.class_ids)


def resample_bilinear(maps: np.ndarray, target) -> np.ndarray:
    """Resample (..., h, w) maps to (..., ht, wt); see module docstring for
    the coordinate convention."""
    maps = np.asarray(maps, dtype=np.float64)
    hs, ws = maps.shape[-2:]
    ht, wt = target
    if ht < 1 or wt < 1:
        raise ShapeMismatch(f"target must be positive, got {target}")
    ys = np.clip((np.arange(ht) + 0.5) * (hs / ht) - 0.5, 0.0, hs - 1.0)
    xs = np.clip((np.arange(wt) + 0.5) * (ws / wt) - 0.5, 0.0, ws - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, hs - 1)
    x1 = np.minimum(x0 + 1, ws - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    tl = maps[..., y0[:, None], x0[None, :]]
    tr = maps[..., y0[:, None], x1[None, :]]
    bl = maps[..., y1[:, None], x0[None, :]]
    br = maps[..., y1[:, None], x1[None, :]]
    return (
        tl * (1 - fy) * (1 - fx)
        + tr * (1 - fy) * fx
        + bl * fy * (1 - fx)
        + br * fy * fx
    )


def multiscale_aggregate(stacks, target, normalize_per_scale: bool = False) -> CamStack:
    """Resample per-scale stacks to ``target`` (h, w), average them in list
    order, then min-max normalize. ``normalize_per_scale`` normalizes each
    stack before averaging instead of only once at the end."""
    stacks = list(stacks)
    if not stacks:
        raise EmptyList("need at least one stack")
    ids = stacks[0].class_ids
    for s in stacks[1:]:
        if s.class_ids != ids:
            raise ClassMismatch(f"class ids differ: {ids} vs {s.class_ids}")
    acc = np.zeros((len(ids), *target))
    for s in stacks:
        s = normalize_cam(s) if normalize_per_scale else s
        acc += resample_bilinear(s.maps, target)
    return normalize_cam(CamStack(maps=acc / len(stacks), class_ids=ids))
