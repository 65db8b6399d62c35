"""
Iterated reconstruction and its fixed point
============================================

Feeding reconstructions back into a trained machine moves an ensemble
through configuration space. Tracking the energy thermometer along the way
shows where the iteration settles.
"""

import numpy as np

from rbmflow.flow import find_fixed_point, flow_from_temperature, run_flow
from rbmflow.rbm import TrainConfig, train
from rbmflow.sampler import generate_dataset
from rbmflow.thermometer import calibrate

ds = generate_dataset(6, 30, base_seed=3, n_conf=200)
curve = calibrate(ds)
model = train(ds, 9, TrainConfig(learning_rate=0.01, epochs=300, seed=2)).model

# %%
# Flows from the coldest and hottest test blocks.
for label, k in (("T=0", 0), ("T_max", ds.n_temp - 1)):
    traj = flow_from_temperature(model, ds, curve, k, max_iters=100, seed=k)
    fp = find_fixed_point(traj)
    print(f"start {label:5s}  T_est {np.round(traj.temperature[[0, 1, 5, 20, 100]], 2)}"
          f"  -> T* {fp.temperature:.2f} (converged: {fp.converged})")

# %%
# The pooled test half, the ensemble used to quote one fixed point.
fp = find_fixed_point(run_flow(model, ds.test(), curve, max_iters=100, seed=9))
print(f"pooled fixed point E* = {fp.energy:.3f}, T* = {fp.temperature:.2f}")
