"""
Reading temperatures off energies
=================================

The mean energy per site of a dataset is a monotone function of T once
smoothed. Inverting it turns any ensemble of configurations into a
temperature estimate.
"""

import numpy as np

from rbmflow.lattice import energy_per_site
from rbmflow.sampler import generate_dataset
from rbmflow.thermometer import calibrate, estimate_temperature

ds = generate_dataset(7, 30, base_seed=1, n_conf=400)
curve = calibrate(ds)

# %%
# The raw means are noisy at low T; the isotonic curve is not.
for t, raw, smooth in zip(curve.temperatures[::3], curve.raw_mean_energy[::3],
                          curve.mean_energy[::3]):
    print(f"T={t:.1f}  raw {raw:+.3f}  smoothed {smooth:+.3f}")

# %%
# Held-out configurations from three grid temperatures.
_, test = ds.split()
for k in (10, 20, 29):
    e = energy_per_site(test[k])
    per_config, spread = estimate_temperature(curve, e)
    pooled, _ = estimate_temperature(curve, e, method="mean-energy")
    print(f"true T={ds.temperatures[k]:.1f}  per-config {per_config:.2f} +- {spread:.2f}"
          f"  from mean energy {pooled:.2f}")
