"""From feature maps to refined seeds, step by step on desk-scale tensors.

A 4x4 feature grid holds a bright 2x2 patch for one class. The raw CAM only
fires on those cells. The attention affinity links the whole left half of
the grid together, so refinement drags evidence into cells the classifier
missed; normalization then puts everything on [0, 1].
"""

import numpy as np

from seedforge import (
    CamStack,
    affinity_from_qk,
    average_affinity,
    clamp_negative,
    compute_cam,
    multiscale_aggregate,
    normalize_cam,
    refine_cam,
    strip_class_token,
)

np.set_printoptions(precision=3, suppress=True)

# one feature channel fires on a 2x2 patch in the top-left
features = np.zeros((1, 4, 4))
features[0, :2, :2] = 1.0
weights = np.array([[1.0]])
cam = compute_cam(features, weights, class_ids=(1,))
print("raw CAM:")
print(cam.maps[0])

# attention: the left half (columns 0-1) of the grid forms one group,
# the right half another; token 0 is the class token
group = np.zeros((17, 2))
group[0] = (0.0, 0.0)
for idx in range(16):
    col = idx % 4
    group[idx + 1, 0 if col < 2 else 1] = 6.0
blocks = [affinity_from_qk(group, group) for _ in range(2)]
a_star = strip_class_token(average_affinity(blocks))
print("\naffinity row sums after stripping the class token (no longer 1):")
print(a_star.sum(axis=1)[:4])

refined = refine_cam(cam, a_star)
print("\nrefined CAM (left half filled in by affinity):")
print(refined.maps[0])

seeds = normalize_cam(clamp_negative(refined))
print("\nnormalized seeds:")
print(seeds.maps[0])

# multi-scale aggregation: same stack at its own size and upsampled
seeds8 = multiscale_aggregate([seeds], (8, 8))
print("\nupsampled to 8x8, max:", seeds8.maps.max(), "min:", seeds8.maps.min())
print("class ids carried through:", seeds8.class_ids)
