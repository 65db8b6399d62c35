"""Acceptance suite: one test per criterion, each at its stated tolerance.

A summary line per criterion is printed at the end of the run. The N_h sweep
(criteria 5-7) trains seven machines for 10^4 epochs and takes about an hour
on one core; set ``RBMFLOW_ACCEPTANCE_CACHE`` to a directory to reuse the
trained sweep between runs.
"""

import os
import pickle
from pathlib import Path

import numpy as np
import pytest
import yaml
from scipy.stats import chisquare

from oracles import exact_energy_levels
from rbmflow import cli
from rbmflow.fitkit import FitResult, emin_law, extrapolate, fit_emin_law
from rbmflow.flow import FlowConfig, find_fixed_point, flow_from_temperature, nh_grid, sweep_nh
from rbmflow.lattice import energy_per_site
from rbmflow.rbm import (RbmModel, TrainConfig, exact_cd1_update, exact_kl, exact_loglik_gradient,
                         fit_rbm, _spawn)
from rbmflow.sampler import energy_trace, generate_dataset
from rbmflow.spectral import classify, nonrandom_ratio, weight_spectrum
from rbmflow.thermometer import calibrate

pytestmark = pytest.mark.slow

DESK_L, DESK_NTEMP, DESK_EPOCHS = 7, 30, 10_000
# the T_max flow of a 7x7 machine drifts for a few hundred iterations
DESK_FLOW = FlowConfig(max_iters=400, window=5, tolerance=0.01, seed=31)
DESK_TRAIN = TrainConfig(epochs=DESK_EPOCHS, seed=17, monitor_every=500)


def criterion(number, title):
    def mark(fn):
        fn.criterion, fn.title = number, title
        return fn
    return mark


def chi2_pvalue(observed, expected, min_expected=5.0):
    """Pearson test after pooling the sparsest bins until each expects >= 5."""
    order = np.argsort(expected)
    obs, exp = list(observed[order]), list(expected[order])
    while len(exp) > 2 and exp[0] < min_expected:
        e, o = exp.pop(0), obs.pop(0)
        exp[0] += e
        obs[0] += o
    return float(chisquare(obs, exp).pvalue)


# --- shared desk-scale experiment ----------------------------------------------------------

@pytest.fixture(scope="session")
def desk():
    ds = generate_dataset(DESK_L, DESK_NTEMP, base_seed=2024)
    curve = calibrate(ds)
    cache = os.environ.get("RBMFLOW_ACCEPTANCE_CACHE")
    key = f"sweep_L{DESK_L}_T{DESK_NTEMP}_E{DESK_EPOCHS}_{DESK_TRAIN.seed}_{DESK_FLOW}.pkl"
    path = Path(cache) / key.replace(" ", "") if cache else None
    if path is not None and path.exists():
        result = pickle.loads(path.read_bytes())
    else:
        result = sweep_nh(ds, curve, nh_grid(DESK_L ** 2), DESK_TRAIN, DESK_FLOW)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(pickle.dumps(result))
    return ds, curve, result


# --- criteria --------------------------------------------------------------------------------

@criterion(1, "3x3 Metropolis energy histogram vs exact enumeration")
def test_criterion_1_enumeration(record_property):
    details, ok = [], True
    for k, T in enumerate((1.0, 2.27, 5.0)):
        # 10^6 sweeps recorded every 10th sweep, well past the correlation time
        e = energy_trace(3, T, 1_000_000, seed=100 + k, thin=10)
        levels, probs = exact_energy_levels(3, T)
        counts = np.array([np.count_nonzero(np.rint(e * 9) == lvl) for lvl in levels])
        assert counts.sum() == e.size
        p = chi2_pvalue(counts, probs * e.size)
        details.append(f"T={T}: p={p:.3f}")
        ok &= p > 0.01
    record_property("detail", "; ".join(details))
    assert ok, details


@criterion(2, "20x20 calibration curve sanity")
def test_criterion_2_calibration(curve_20, record_property):
    curve = curve_20
    raw = curve.raw_mean_energy
    t = curve.temperatures
    near_tc = int(np.argmin(np.abs(t - 2.27)))
    high = t >= 8
    checks = {
        f"E(T={t[near_tc]:.1f})={raw[near_tc]:.4f} in -1.7+-0.1": abs(raw[near_tc] + 1.7) <= 0.1,
        f"E(T=0)={raw[0]:.4f} < -1.95": raw[0] < -1.95,
        f"E(T>=8) in [{raw[high].min():.3f}, {raw[high].max():.3f}] within [-0.3, 0]":
            bool(np.all((raw[high] >= -0.3) & (raw[high] <= 0))),
    }
    record_property("detail", "; ".join(f"{k}: {'ok' if v else 'FAILS'}" for k, v in checks.items()))
    assert all(checks.values()), checks


@criterion(3, "exact gradient vs finite differences; CD-1 alignment")
def test_criterion_3_gradient_oracle(record_property):
    rng = np.random.default_rng(3)
    model = RbmModel(rng.normal(0, 0.5, (4, 2)), rng.normal(0, 0.5, 4), rng.normal(0, 0.5, 2))
    data = rng.choice([-1, 1], (40, 4))
    exact = exact_loglik_gradient(model, data).flat()
    numeric, step = [], 1e-5
    params = [model.weights, model.visible_bias, model.hidden_bias]
    for which, arr in enumerate(params):
        for idx in np.ndindex(arr.shape):
            vals = []
            for s in (step, -step):
                shifted = [a.copy() for a in params]
                shifted[which][idx] += s
                vals.append(exact_kl(RbmModel(*shifted), data))
            numeric.append((vals[0] - vals[1]) / (2 * step))
    rel = np.linalg.norm(exact - np.array(numeric)) / np.linalg.norm(exact)
    agree = 0
    for seed in range(100):
        r = np.random.default_rng(1000 + seed)
        m = RbmModel(r.normal(0, 0.5, (4, 2)), r.normal(0, 0.5, 4), r.normal(0, 0.5, 2))
        d = r.choice([-1, 1], (20, 4))
        agree += exact_cd1_update(m, d).flat() @ -exact_loglik_gradient(m, d).flat() > 0
    record_property("detail", f"relative FD error {rel:.2e} (<= 1e-6); CD-1 aligned {agree}/100 (>= 95)")
    assert rel <= 1e-6 and agree >= 95


@criterion(4, "two-mode 3x3 machine: exact KL drops below 25%")
def test_criterion_4_tiny_training(record_property):
    up = np.ones((100, 9), dtype=np.int8)
    data = np.concatenate([up, -up])
    cfg = TrainConfig(epochs=2000, seed=4)
    initial = RbmModel.initial(9, 4, _spawn(cfg.seed, 3)[0])  # the same draw fit_rbm starts from
    kl0 = exact_kl(initial, data)
    kl = exact_kl(fit_rbm(data, None, 4, cfg).model, data)
    record_property("detail", f"KL {kl0:.4f} -> {kl:.4f} ({kl / kl0:.1%} of initial, need < 25%)")
    assert kl < 0.25 * kl0


@criterion(5, "flow direction from T=0 and T_max, agreement within 0.5")
def test_criterion_5_flow_direction(desk, record_property):
    ds, curve, result = desk
    model = result.point(9).report.model
    cold = flow_from_temperature(model, ds, curve, 0, DESK_FLOW.max_iters, seed=51)
    hot = flow_from_temperature(model, ds, curve, ds.n_temp - 1, DESK_FLOW.max_iters, seed=52)
    fc, fh = (find_fixed_point(t, DESK_FLOW.window, DESK_FLOW.tolerance) for t in (cold, hot))
    up = fc.temperature > cold.temperature[0]
    down = fh.temperature < hot.temperature[0]
    gap = abs(fc.temperature - fh.temperature)
    record_property("detail", (
        f"N_h=9: T0 start {cold.temperature[0]:.2f} -> {fc.temperature:.2f}; "
        f"T_max start {hot.temperature[0]:.2f} -> {fh.temperature:.2f}; gap {gap:.2f} (< 0.5)"))
    assert up and down and gap < 0.5


@criterion(6, "N_h sweep: extremes >= 0.2 above the interior minimum")
def test_criterion_6_sweep_shape(desk, record_property):
    _, _, result = desk
    energies = {p.n_hidden: (p.fixed_point.energy if p.fixed_point else np.nan)
                for p in result.points}
    best, e_min = result.n_h_min, result.e_min
    grid = nh_grid(DESK_L ** 2)
    interior = best not in (grid[0], grid[-1])
    lo_gap, hi_gap = energies[grid[0]] - e_min, energies[grid[-1]] - e_min
    table = ", ".join(f"{h}:{e:.3f}" for h, e in energies.items())
    record_property("detail", f"E* by N_h {{{table}}}; argmin {best}; "
                              f"gaps {lo_gap:.3f} / {hi_gap:.3f} (>= 0.2)")
    assert interior and lo_gap >= 0.2 and hi_gap >= 0.2


@criterion(7, "spectral rank bound and non-random ratios")
def test_criterion_7_spectra(desk, record_property):
    _, _, result = desk
    ranks = {}
    for p in result.points:
        rep = weight_spectrum(p.report.model)
        ranks[p.n_hidden] = rep.rank()
    rank_ok = all(r <= h for h, r in ranks.items())
    nv = DESK_L ** 2
    rng = np.random.default_rng(77)
    random_model = RbmModel(rng.normal(size=(nv, nv)), np.zeros(nv), np.zeros(nv))
    random_ratio = nonrandom_ratio(classify(weight_spectrum(random_model)))
    ratios = {p.n_hidden: nonrandom_ratio(classify(weight_spectrum(p.report.model)))
              for p in result.points}
    record_property("detail", (
        f"ranks {ranks} (<= N_h: {rank_ok}); random model ratio {random_ratio:.3f} (< 0.1); "
        f"trained N_h=9 ratio {ratios[9]:.3f} (>= 0.8); all {{"
        + ", ".join(f"{h}:{r:.2f}" for h, r in ratios.items()) + "}"))
    assert rank_ok and random_ratio < 0.1 and ratios[9] >= 0.8


@criterion(8, "fit recovery and b -> 0 extrapolation")
def test_criterion_8_fit(record_property):
    grid = np.array([100, 200, 300, 400, 500, 600, 700])
    exact = fit_emin_law(np.column_stack([grid, emin_law(grid, 0.16, 0.3)]))
    exact_ok = abs(exact.a - 0.16) <= 1e-8 and abs(exact.b - 0.3) <= 1e-8
    rng = np.random.default_rng(8)
    err_a, err_b = [], []
    for _ in range(100):
        e = emin_law(grid, 0.16, 0.3) * (1 + rng.normal(0, 0.01, grid.size))
        res = fit_emin_law(np.column_stack([grid, e]))
        err_a.append(abs(res.a / 0.16 - 1))
        err_b.append(abs(res.b / 0.3 - 1))
    med_a, med_b = float(np.median(err_a)), float(np.median(err_b))
    limit = extrapolate(FitResult(0.16, 0.0, 0.0, 0, 100.0), 1e6)
    target = -2 * np.exp(-0.16)
    record_property("detail", (
        f"noiseless |da|={abs(exact.a - 0.16):.1e} |db|={abs(exact.b - 0.3):.1e}; "
        f"noisy median error a {med_a:.3f} b {med_b:.3f} (< 0.05); "
        f"b=0 limit {limit:.5f} vs -2exp(-0.16)={target:.5f} (the quoted -1.7026 is off by "
        f"{abs(target + 1.7026):.4f})"))
    assert exact_ok and med_a < 0.05 and med_b < 0.05 and abs(limit - target) <= 1e-4


@criterion(9, "byte-identical reruns of every pipeline stage")
def test_criterion_9_determinism(tmp_path, record_property):
    raw = {"lattice": [3, 4], "n_temp": [4, 5, 6], "n_h": [1, 4, 9], "n_conf": 20,
           "sampler": {"sweeps": 20}, "train": {"epochs": 20, "batch_size": 10,
                                                "learning_rate": 0.05},
           "flow": {"max_iters": 10}, "fit": {"cutoff": 0}, "seed": 9}
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump(raw))

    def run(out, commands):
        for c in commands:
            assert cli.main([c, "--config", str(cfg), "--out", str(out)]) == 0
        return {p.relative_to(out).as_posix(): p.read_bytes()
                for p in sorted(out.rglob("*")) if p.is_file()}

    stages = ["generate", "calibrate", "train", "flow", "sweep", "spectra", "fit", "report"]
    a = run(tmp_path / "a", stages)
    b = run(tmp_path / "b", stages)
    c = run(tmp_path / "c", ["pipeline"])
    differing = sorted(k for k in a if a[k] != b.get(k)) + sorted(set(a) ^ set(b))
    classes = sorted({k.split("/")[0] for k in a})
    record_property("detail", f"{len(a)} artifacts in {classes}; differing: {differing or 'none'}; "
                              f"pipeline == staged: {all(c[k] == a.get(k) for k in c)}")
    assert not differing and all(c[k] == a.get(k) for k in c)
