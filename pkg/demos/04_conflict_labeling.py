"""Conflict-aware pseudo labels: both ignore rules in action.

Two class seeds overlap in a vertical strip where both stay near their peak,
so rule one marks the strip 255. A saliency map that extends past both blobs
triggers rule two on the ring the argmax called background. Lowering the
conflict rate floods more pixels with 255, which is exactly the sweep that
motivates keeping the rate high.
"""

import numpy as np

from seedforge import AcmParams, CamStack, apply_acm, conflict_count

h = w = 24
yy, xx = np.mgrid[0:h, 0:w]
# broad smooth bumps, one per class, peaking at columns 10 and 13
seeds = np.stack(
    [
        np.exp(-(((yy - 12) / 9.0) ** 2 + ((xx - 10) / 9.0) ** 2)),
        0.95 * np.exp(-(((yy - 12) / 9.0) ** 2 + ((xx - 13) / 9.0) ** 2)),
    ]
)
stack = CamStack(maps=seeds, class_ids=(1, 2))

saliency = np.zeros((h, w), np.uint8)
saliency[2:22, 0:24] = 255  # generously too large on purpose

params = AcmParams(conflict_rate=0.9, bg_threshold=128, seed_bg_alpha=0.3)
labels = apply_acm(stack, saliency, params)

counts = {v: int((labels == v).sum()) for v in np.unique(labels)}
print("label histogram (0=background, 255=ignore):", counts)
strip = labels[10, 8:16]
print("row 10, columns 8-15:", strip, " <- 255 in the overlap")

no_sal = apply_acm(stack, None, params)
print("without saliency, ignore pixels:", int((no_sal == 255).sum()),
      "(rule two skipped)")

print("\nconflict-rate sweep (rule-one ignore pixels):")
for rate in (1.0, 0.9, 0.7, 0.5, 0.3, 0.0):
    flagged = int((conflict_count(stack, rate) > 1).sum())
    print(f"  rate {rate:.1f}: {flagged:4d} pixels flagged")
print("rate 1.0 flags nothing; lower rates only ever add pixels.")
