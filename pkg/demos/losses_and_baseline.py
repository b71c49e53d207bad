"""Small numeric tour of the objectives and the completion baseline."""
import numpy as np
import torch

from depthduet import losses, nearest_neighbor_complete, completion_metrics, toy_dataset

# masked reconstruction only looks at pixels the target actually covers
pred = torch.tensor([[[[0.5, 0.5]]]])
target = torch.tensor([[[[0.3, 0.0]]]])
mask = torch.tensor([[[[1.0, 0.0]]]])
print("masked L1:", losses.rec_dg_loss_real(pred, target, mask).item())  # 0.2

# a critic that cannot tell real from fake sits at 2 ln 2
half = torch.tensor([0.5])
print("critic loss at chance:", losses.d_loss_from_probs(half, half).item(), 2 * np.log(2))

# smoothing is cheaper where the image itself has an edge
depth = torch.zeros(1, 1, 8, 8)
depth[..., 4:] = 1.0
edge_img = depth.expand(1, 3, 8, 8)
flat_img = torch.zeros(1, 3, 8, 8)
print("smoothness, step on an image edge:", losses.smoothness_loss(depth, edge_img).item())
print("smoothness, step on a flat image: ", losses.smoothness_loss(depth, flat_img).item())

# weighted total with the default weights
report = losses.total_loss({"rec_sg": 0.1, "rec_dg": 0.2, "adv_g": 0.3, "smooth": 0.4})
print("total:", report.total)

# nearest-neighbour fill of the 4% sparse input
for s in toy_dataset(4, seed=11):
    gt = np.where(s.dense_mask, s.dense_gt, 0.0)
    m = completion_metrics(nearest_neighbor_complete(s.sparse_gt), gt)
    print(f"{s.domain:9s} nearest-neighbour RMSE {m.rmse_mm:7.0f} mm  MAE {m.mae_mm:7.0f} mm")
