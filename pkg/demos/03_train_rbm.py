"""
Training a restricted Boltzmann machine with CD-1
==================================================

Units take values +-1. Training uses one-step contrastive divergence with
momentum. On a 3x3 machine the exact KL divergence is available by
enumeration and can be watched directly.
"""

import numpy as np

from rbmflow.rbm import TrainConfig, exact_kl, fit_rbm, reconstruct, train
from rbmflow.sampler import generate_dataset

# %%
# Two modes: all up and all down.
up = np.ones((100, 9), dtype=np.int8)
data = np.concatenate([up, -up])
for epochs in (1, 100, 500, 2000):
    model = fit_rbm(data, None, 4, TrainConfig(epochs=epochs, seed=0)).model
    print(f"{epochs:5d} epochs  KL = {exact_kl(model, data):.4f}")

# %%
# Reconstructions of the two modes after training.
print(reconstruct(model, data[[0, -1]], np.random.default_rng(0)))

# %%
# An Ising dataset, trained on its even-indexed half and monitored on the rest.
ds = generate_dataset(5, 20, base_seed=2, n_conf=100)
report = train(ds, 9, TrainConfig(learning_rate=0.01, epochs=200, seed=1, monitor_every=50))
print("train error", np.round(report.train_err[::50], 4))
print("test error ", np.round(report.test_err[np.isfinite(report.test_err)], 4))
