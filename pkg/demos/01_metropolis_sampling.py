"""
Metropolis sampling of the periodic Ising lattice
==================================================

A long chain on a 3x3 torus is compared with the exact Boltzmann weights of
all 512 configurations, then a small multi-temperature dataset is built.
"""

import itertools

import numpy as np

from rbmflow.lattice import energy_per_site
from rbmflow.sampler import energy_trace, generate_dataset

# %%
# Exact level populations of the 3x3 torus at T = 2.27.
T = 2.27
states = np.array(list(itertools.product((-1, 1), repeat=9)), dtype=np.int8)
e_exact = np.rint(energy_per_site(states) * 9).astype(int)
levels, degeneracy = np.unique(e_exact, return_counts=True)
weights = degeneracy * np.exp(-(levels - levels.min()) / T)
exact = weights / weights.sum()

# %%
# One chain of 200 000 sweeps, recorded every 10th sweep.
trace = np.rint(energy_trace(3, T, 200_000, seed=1, thin=10) * 9).astype(int)
sampled = np.array([np.mean(trace == lvl) for lvl in levels])
for lvl, p, q in zip(levels, exact, sampled):
    print(f"E={lvl:+4d}  exact {p:.4f}  sampled {q:.4f}")

# %%
# A dataset: 20 temperatures 0, 0.1, ..., 1.9 with 100 independent chains each.
ds = generate_dataset(6, 20, base_seed=0, n_conf=100)
print(ds.configs.shape, "mean energy per temperature:")
print(np.round(energy_per_site(ds.configs).mean(axis=1), 3))
