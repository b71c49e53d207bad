"""Train a narrow model for a couple of thousand steps and compare it with the baseline.

Takes two or three minutes on one CPU core. Raise STEPS for a better fit.
"""
import time

import numpy as np

from depthduet import TrainConfig, evaluate, infer_estimate, nearest_neighbor_complete, toy_dataset, train

STEPS = 2000

train_set = toy_dataset(32, synthetic_ratio=0.5, seed=1)
test_set = toy_dataset(8, synthetic_ratio=0.5, seed=2)

cfg = TrainConfig(steps=STEPS, base_width=8, seed=0)
t0 = time.perf_counter()
state, trace = train(cfg, train_set)
print(f"{STEPS} steps in {time.perf_counter() - t0:.0f}s")

for lo in range(0, STEPS, max(1, STEPS // 5)):
    chunk = trace[lo:lo + STEPS // 5]
    print(f"steps {lo:4d}+  rec_sg {np.mean([r.rec_sg for r in chunk]):.4f}  "
          f"rec_dg {np.mean([r.rec_dg for r in chunk]):.4f}  adv_g {np.mean([r.adv_g for r in chunk]):.3f}")

est = evaluate(state, test_set, "estimation").aggregate
print("estimation:", {k: round(v, 3) for k, v in est.items()})

model = evaluate(state, test_set, "completion").aggregate["rmse_mm"]
base = evaluate(nearest_neighbor_complete, test_set, "completion").aggregate["rmse_mm"]
print(f"completion RMSE {model:.0f} mm, nearest neighbour {base:.0f} mm")

# the dense generator on its own takes any sparse map in meters
dense = infer_estimate(state, test_set[0].rgb)
print("estimated depth range:", dense.min().round(1), dense.max().round(1))
