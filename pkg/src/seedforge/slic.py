"""SLIC superpixel clustering in CIELAB + xy space.

Localized k-means over 5-vectors (L, a, b, x, y). The combined distance is

    D^2 = dL^2 + da^2 + db^2 + (m/g)^2 * (dx^2 + dy^2)

with compactness m and grid interval g = sqrt(G/k) for G total pixels.
Each center only competes for pixels inside its window |dx| <= g, |dy| <= g;
a pixel keeps its previous assignment when no window reaches it. Ties go to
the lowest center index, so the labeling is fully deterministic. Iteration
stops early once no pixel changes assignment.

The per-iteration clustering energy sum(D^2) is non-increasing: the update
step moves each center to the mean of its pixels (the minimizer of the
squared objective) and the assignment step never raises any pixel's distance.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import KTooLarge, ShapeMismatch

# sRGB -> XYZ (IEC 61966-2-1 primaries, D65). The white point is taken as the
# row sums so that pure white maps to exactly (L=100, a=0, b=0).
_SRGB_TO_XYZ = np.array(
    [
        [0.4123907992659595, 0.35758433938387796, 0.18048078840183429],
        [0.21263900587151036, 0.7151686787677559, 0.07219231536073371],
        [0.01933081871559185, 0.11919477979462599, 0.9505321522496607],
    ]
)
_WHITE = _SRGB_TO_XYZ.sum(axis=1)
_DELTA3 = (6.0 / 29.0) ** 3


@dataclass(frozen=True)
class SlicParams:
    """Clustering knobs: target count k, spatial weight m, iteration cap."""

    k: int
    compactness: float = 10.0
    max_iters: int = 10
    min_segment_ratio: float = 0.25

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.compactness <= 0:
            raise ValueError("compactness must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.min_segment_ratio <= 1:
            raise ValueError("min_segment_ratio must be in (0, 1]")


@dataclass(frozen=True)
class SuperpixelLabeling:
    """Per-pixel cluster ids in [0, num_segments), each segment 4-connected."""

    labels: np.ndarray  # (H, W) uint32
    num_segments: int

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass
class SlicInfo:
    """Diagnostics from one clustering run."""

    grid_interval: float
    energies: list = field(default_factory=list)  # sum(D^2) after each assignment
    iterations: int = 0
    converged: bool = False
    raw_labels: np.ndarray = None  # assignment before connectivity enforcement
    centers: np.ndarray = None  # (K, 5) rows [L, a, b, x, y]


def rgb_to_lab(img: np.ndarray) -> np.ndarray:
    """Convert (H, W, 3) uint8 sRGB to float64 CIELAB (D65, 2 degree observer)."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeMismatch(f"expected (H, W, 3) RGB, got {img.shape}")
    c = img.astype(np.float64) / 255.0
    lin = np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)
    xyz = lin @ _SRGB_TO_XYZ.T
    t = xyz / _WHITE
    f = np.where(t > _DELTA3, np.cbrt(t), t / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def _gradient_map(lab: np.ndarray) -> np.ndarray:
    """Squared Lab gradient magnitude with replicated borders."""
    padded = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    return (gx * gx).sum(axis=2) + (gy * gy).sum(axis=2)


def init_centers(lab: np.ndarray, k: int) -> np.ndarray:
    """Place ~k centers on a regular grid, then nudge each one to the
    strictly lowest-gradient pixel in its 3x3 neighborhood (seeding on an
    edge would lock a center to a boundary).

    Returns (K, 5) float64 rows [L, a, b, x, y]; index order is row-major
    over the grid. Unperturbed centers keep their fractional grid position.
    """
    h, w = lab.shape[:2]
    g = math.sqrt(h * w / k)
    ny = min(k, max(1, int(round(h / g))))
    nx = max(1, int(round(k / ny)))
    grad = _gradient_map(lab)
    centers = np.empty((ny * nx, 5))
    for j in range(ny):
        for i in range(nx):
            cx = (i + 0.5) * w / nx - 0.5
            cy = (j + 0.5) * h / ny - 0.5
            px = min(max(int(math.floor(cx + 0.5)), 0), w - 1)
            py = min(max(int(math.floor(cy + 0.5)), 0), h - 1)
            best = grad[py, px]
            bx, by, moved = px, py, False
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    qx, qy = px + dx, py + dy
                    if 0 <= qx < w and 0 <= qy < h and grad[qy, qx] < best:
                        best, bx, by, moved = grad[qy, qx], qx, qy, True
            if moved:
                cx, cy, px, py = float(bx), float(by), bx, by
            centers[j * nx + i] = (*lab[py, px], cx, cy)
    return centers


def assignment_step(
    lab: np.ndarray,
    centers: np.ndarray,
    grid_interval: float,
    compactness: float,
    labels: np.ndarray,
) -> np.ndarray:
    """One assignment sweep. ``labels`` is the previous assignment (-1 where
    unassigned); a pixel switches centers only for a strictly smaller D^2, or
    an equal D^2 from a lower center index. Pixels outside every window fall
    back to the globally nearest center (only possible before the first
    sweep or on extreme aspect ratios).
    """
    h, w = lab.shape[:2]
    sw = (compactness / grid_interval) ** 2
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    new_labels = labels.astype(np.int64, copy=True)

    best = np.full((h, w), np.inf)
    assigned = new_labels >= 0
    if assigned.any():
        cen = centers[new_labels[assigned]]
        pix = lab[assigned]
        py, px = np.nonzero(assigned)
        dl = pix[:, 0] - cen[:, 0]
        da = pix[:, 1] - cen[:, 1]
        db = pix[:, 2] - cen[:, 2]
        dx = px - cen[:, 3]
        dy = py - cen[:, 4]
        best[assigned] = (dl * dl + da * da + db * db) + sw * (dx * dx + dy * dy)

    g = grid_interval
    for ci in range(len(centers)):
        cl, ca, cb, cx, cy = centers[ci]
        x0 = max(0, int(math.ceil(cx - g)))
        x1 = min(w - 1, int(math.floor(cx + g)))
        y0 = max(0, int(math.ceil(cy - g)))
        y1 = min(h - 1, int(math.floor(cy + g)))
        if x0 > x1 or y0 > y1:
            continue
        win = lab[y0 : y1 + 1, x0 : x1 + 1]
        dl = win[..., 0] - cl
        da = win[..., 1] - ca
        db = win[..., 2] - cb
        dx = xs[x0 : x1 + 1] - cx
        dy = ys[y0 : y1 + 1] - cy
        d2 = (dl * dl + da * da + db * db) + sw * (
            dx * dx + (dy * dy)[:, None]
        )
        bwin = best[y0 : y1 + 1, x0 : x1 + 1]
        lwin = new_labels[y0 : y1 + 1, x0 : x1 + 1]
        take = (d2 < bwin) | ((d2 == bwin) & (ci < lwin))
        bwin[take] = d2[take]
        lwin[take] = ci

    orphan = new_labels < 0
    if orphan.any():
        py, px = np.nonzero(orphan)
        pix = lab[orphan]
        dl = pix[:, None, 0] - centers[None, :, 0]
        da = pix[:, None, 1] - centers[None, :, 1]
        db = pix[:, None, 2] - centers[None, :, 2]
        dx = px[:, None] - centers[None, :, 3]
        dy = py[:, None] - centers[None, :, 4]
        d2 = (dl * dl + da * da + db * db) + sw * (dx * dx + dy * dy)
        new_labels[orphan] = d2.argmin(axis=1)  # argmin takes the lowest index on ties
        best[orphan] = d2.min(axis=1)
    return new_labels


def update_step(lab: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Move every non-empty center to the mean (L, a, b, x, y) of its pixels."""
    h, w = lab.shape[:2]
    k = len(centers)
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=k).astype(np.float64)
    new = centers.copy()
    nonempty = counts > 0
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    for dim, values in enumerate(
        (lab[..., 0], lab[..., 1], lab[..., 2], xs, ys)
    ):
        sums = np.bincount(flat, weights=values.ravel(), minlength=k)
        new[nonempty, dim] = sums[nonempty] / counts[nonempty]
    return new


def clustering_energy(
    lab: np.ndarray,
    labels: np.ndarray,
    centers: np.ndarray,
    grid_interval: float,
    compactness: float,
) -> float:
    """Total squared combined distance sum_p D^2(p, center[label(p)])."""
    sw = (compactness / grid_interval) ** 2
    h, w = lab.shape[:2]
    cen = centers[labels.ravel()]
    pix = lab.reshape(-1, 3)
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dl = pix[:, 0] - cen[:, 0]
    da = pix[:, 1] - cen[:, 1]
    db = pix[:, 2] - cen[:, 2]
    dx = xs.ravel() - cen[:, 3]
    dy = ys.ravel() - cen[:, 4]
    return float(((dl * dl + da * da + db * db) + sw * (dx * dx + dy * dy)).sum())


def enforce_connectivity(raw_labels: np.ndarray, min_segment_ratio: float) -> SuperpixelLabeling:
    """Split the raw assignment into 4-connected components and absorb every
    component smaller than min_segment_ratio * g^2 into its largest
    4-neighboring component (ties to the lowest component id).

    g^2 is estimated as G / (number of distinct raw labels). Components are
    discovered and processed in row-major order of their first pixel; merged
    components keep growing, so later absorptions see updated sizes. Final
    ids are compacted to [0, num_segments) in row-major first-occurrence
    order.
    """
    raw = np.asarray(raw_labels)
    if raw.ndim != 2:
        raise ShapeMismatch(f"expected (H, W) labels, got {raw.shape}")
    h, w = raw.shape
    total = h * w
    distinct = np.unique(raw)
    min_size = min_segment_ratio * total / len(distinct)

    comp = np.full((h, w), -1, dtype=np.int64)
    next_id = 0
    for value in distinct:
        marked, n = ndimage.label(raw == value)
        mask = marked > 0
        comp[mask] = marked[mask] + (next_id - 1)
        next_id += n
    # renumber components in row-major discovery order
    _, first, inverse = np.unique(comp.ravel(), return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    comp = order[inverse].reshape(h, w)
    n_comp = next_id

    sizes = np.bincount(comp.ravel(), minlength=n_comp).tolist()
    neighbors = [set() for _ in range(n_comp)]
    for a, b in ((comp[:, :-1], comp[:, 1:]), (comp[:-1, :], comp[1:, :])):
        diff = a != b
        for u, v in zip(a[diff].tolist(), b[diff].tolist()):
            neighbors[u].add(v)
            neighbors[v].add(u)

    parent = list(range(n_comp))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for cid in range(n_comp):
        root = find(cid)
        if sizes[root] >= min_size:
            continue
        nbr_roots = sorted({find(n) for n in neighbors[root]} - {root})
        if not nbr_roots:
            continue
        target = max(nbr_roots, key=lambda r: (sizes[r], -r))
        parent[root] = target
        sizes[target] += sizes[root]
        merged = (neighbors[target] | neighbors[root]) - {target, root}
        neighbors[target] = merged

    roots = np.array([find(c) for c in range(n_comp)])
    root_map = roots[comp]
    _, first, inverse = np.unique(root_map.ravel(), return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    final = order[inverse].reshape(h, w)
    return SuperpixelLabeling(labels=final.astype(np.uint32), num_segments=int(final.max()) + 1)


def slic_segment_with_info(img: np.ndarray, params: SlicParams):
    """Run the full SLIC loop; returns (SuperpixelLabeling, SlicInfo)."""
    img = np.asarray(img)
    h, w = img.shape[:2]
    if params.k > h * w:
        raise KTooLarge(f"k={params.k} exceeds pixel count {h * w}")
    lab = rgb_to_lab(img)
    g = math.sqrt(h * w / params.k)
    centers = init_centers(lab, params.k)
    info = SlicInfo(grid_interval=g)

    labels = np.full((h, w), -1, dtype=np.int64)
    for _ in range(params.max_iters):
        new_labels = assignment_step(lab, centers, g, params.compactness, labels)
        info.energies.append(
            clustering_energy(lab, new_labels, centers, g, params.compactness)
        )
        info.iterations += 1
        if (new_labels == labels).all():
            info.converged = True
            break
        labels = new_labels
        centers = update_step(lab, labels, centers)

    info.raw_labels = labels.copy()
    info.centers = centers
    labeling = enforce_connectivity(labels, params.min_segment_ratio)
    return labeling, info


def slic_segment(img: np.ndarray, params: SlicParams) -> SuperpixelLabeling:
    """Segment an RGB image into ~k compact superpixels (deterministic)."""
    labeling, _ = slic_segment_with_info(img, params)
    return labeling
