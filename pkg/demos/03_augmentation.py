"""Seeded augmentation: each sample id always gets the same transforms.

Saves a before/after grid to augment.png.

    python demos/03_augmentation.py [out_dir]
"""
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from evgap.augment import TRANSFORMS, AugmentConfig, augment_sample, fired_transforms
from evgap.preprocess import prepare_frame
from evgap.synth import synth_aps_frame

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/augment")
out.mkdir(parents=True, exist_ok=True)

frame = prepare_frame(synth_aps_frame(np.random.default_rng(0), "DAY"))
config = AugmentConfig(seed=7)

fig, axes = plt.subplots(2, 4, figsize=(10, 5))
for ax, sid in zip(axes.ravel(), [f"sample-{i}" for i in range(8)]):
    aug = augment_sample(frame, sid, config)
    assert np.array_equal(aug, augment_sample(frame, sid, config))
    fired = [n for n, on in zip(TRANSFORMS, fired_transforms(sid, config)) if on]
    ax.imshow(aug, cmap="gray", vmin=0, vmax=1)
    ax.set_title(f"{sid}\n{', '.join(fired) or 'none'}", fontsize=8)
    ax.axis("off")
fig.tight_layout()
fig.savefig(out / "augment.png", dpi=80)
print(f"wrote {out / 'augment.png'}")

rates = np.mean([fired_transforms(f"id{i}", config) for i in range(20_000)], axis=0)
for name, p, r in zip(TRANSFORMS, config.probabilities(), rates):
    print(f"{name:6s} configured {p:.2f}  observed {r:.3f}")
