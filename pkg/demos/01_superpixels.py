"""Superpixel segmentation walkthrough.

Builds a small synthetic scene, clusters it at a few different k values, and
saves label maps plus boundary overlays so you can see how the patch size
tracks k. Outputs land in demos/output/.
"""

import os

import numpy as np

from seedforge import SlicParams, slic_segment, write_png

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

# a scene with two colored shapes on a gradient background
rng = np.random.default_rng(7)
h = w = 96
yy, xx = np.mgrid[0:h, 0:w]
img = np.stack([30 + xx * 120 // w, 30 + yy * 120 // h, np.full((h, w), 60)], axis=-1)
img[20:56, 12:44] = (210, 70, 60)
disk = (yy - 60) ** 2 + (xx - 68) ** 2 < 18**2
img[disk] = (60, 150, 220)
img = np.clip(img + rng.integers(-8, 9, (h, w, 1)), 0, 255).astype(np.uint8)
write_png(img, os.path.join(OUT, "scene.png"))

for k in (16, 48, 120):
    labeling = slic_segment(img, SlicParams(k=k, compactness=10.0))
    print(f"k={k:4d}: requested {k}, got {labeling.num_segments} segments")

    # boundary overlay: mark pixels whose right/down neighbor has another label
    lab = labeling.labels
    edge = np.zeros((h, w), bool)
    edge[:, :-1] |= lab[:, :-1] != lab[:, 1:]
    edge[:-1, :] |= lab[:-1, :] != lab[1:, :]
    overlay = img.copy()
    overlay[edge] = (255, 255, 0)
    write_png(overlay, os.path.join(OUT, f"superpixels_k{k}.png"))

    # label map stretched to full gray range for viewing
    viz = (lab * (255 // max(1, labeling.num_segments - 1))).astype(np.uint8)
    write_png(viz, os.path.join(OUT, f"labels_k{k}.png"))

print(f"wrote scene + overlays to {OUT}")
