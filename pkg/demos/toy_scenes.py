"""Look at the procedural two-domain data.

Writes toy_scenes.png next to this script: RGB, sparse input, dense target
and validity mask for one synthetic and one pseudo-real sample.
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from depthduet import toy_sample

syn = toy_sample(3, "synthetic")
real = toy_sample(3, "real")

for s in (syn, real):
    frac = np.count_nonzero(s.sparse_gt) / s.sparse_gt.size
    print(f"{s.domain:9s} sparse density {frac:.3f}, dense coverage {s.dense_mask.mean():.2f}, "
          f"depth range {s.dense_gt[s.dense_gt > 0].min():.1f}-{s.dense_gt.max():.1f} m")

# the real-domain target is semi-dense: the upper band and random blobs are missing
fig, ax = plt.subplots(2, 4, figsize=(11, 5.5))
for row, s in enumerate((syn, real)):
    ax[row, 0].imshow(s.rgb)
    ax[row, 1].imshow(np.ma.masked_equal(s.sparse_gt, 0), cmap="magma_r", vmin=0, vmax=80)
    ax[row, 2].imshow(np.ma.masked_equal(s.dense_gt, 0), cmap="magma_r", vmin=0, vmax=80)
    ax[row, 3].imshow(s.dense_mask, cmap="gray")
    ax[row, 0].set_ylabel(s.domain)
for a, title in zip(ax[0], ("rgb", "sparse input", "dense target", "mask")):
    a.set_title(title)
for a in ax.ravel():
    a.set_xticks([])
    a.set_yticks([])
fig.tight_layout()
out = Path(__file__).with_name("toy_scenes.png")
fig.savefig(out, dpi=100)
print("saved", out)
