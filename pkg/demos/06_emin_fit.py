"""
The minimum fixed-point energy against grid density
====================================================

``E_min = -2 exp(-a N_temp^b)`` becomes a straight line after a double log,
which makes the fit an ordinary least-squares problem.
"""

import numpy as np

from rbmflow.fitkit import emin_law, extrapolate, fit_emin_law, parameter_trend

n_temp = np.array([100, 200, 300, 400, 500, 600, 700])
rng = np.random.default_rng(0)
fits = []
for n_v, a, b in ((49, 0.10, 0.35), (100, 0.13, 0.32), (400, 0.15, 0.30)):
    e = emin_law(n_temp, a, b) * (1 + rng.normal(0, 0.01, n_temp.size))
    res = fit_emin_law(np.column_stack([n_temp, e]))
    fits.append((n_v, res))
    print(f"N_v={n_v:4d}  a={res.a:.4f}  b={res.b:.4f}  rss={res.rss:.2e}"
          f"  E_min(N_temp=10^4)={extrapolate(res, 1e4):.4f}")

trend = parameter_trend(fits)
print("a is", trend.a_trend, "and b is", trend.b_trend, "with lattice size")
