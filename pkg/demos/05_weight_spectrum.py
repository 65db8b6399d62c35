"""
What the weights learned: eigenvectors of W W^T
================================================

W W^T does not depend on how hidden units are labelled, so its eigenvectors
are a basis-free view of the learned features. Each eigenvector is scored by
its nearest-neighbor autocorrelation on the lattice and written out as a PGM
image.
"""

from pathlib import Path

import numpy as np

from rbmflow import formats
from rbmflow.rbm import RbmModel, TrainConfig, train
from rbmflow.sampler import generate_dataset
from rbmflow.spectral import (classify, eigenvalue_gap_profile, nonrandom_ratio, null_threshold,
                              weight_spectrum)

ds = generate_dataset(6, 30, base_seed=4, n_conf=200)
model = train(ds, 9, TrainConfig(learning_rate=0.01, epochs=300, seed=3)).model
report = classify(weight_spectrum(model))

print(f"rank {report.rank()} of {report.n_visible}; |S| threshold {null_threshold(6):.3f}")
for k in range(report.n_hidden):
    print(f"{k + 1:2d}  lambda={report.eigenvalues[k]:8.3f}  S={report.statistics[k]:+.3f}"
          f"  {report.classes[k]}")
print("non-random ratio", nonrandom_ratio(report))
print("largest gap after eigenvalue", eigenvalue_gap_profile(report, 9).largest_gap + 1)

# %%
# A random machine for comparison.
rng = np.random.default_rng(0)
noise = RbmModel(rng.normal(size=(36, 36)), np.zeros(36), np.zeros(36))
print("random-weight ratio", nonrandom_ratio(classify(weight_spectrum(noise))))

# %%
out = Path("spectrum_images")
for k in range(report.n_hidden):
    formats.write_pgm(out / f"eig{k + 1:03d}.pgm", report.image(k))
print("images in", out.resolve())
