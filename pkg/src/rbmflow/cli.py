"""Command-line orchestration of the full experiment.

    rbmflow {generate,calibrate,train,flow,sweep,spectra,fit,report,pipeline}
            --config FILE [--seed N] [--out DIR] [--workers N]

All randomness derives from the root seed::

    dataset (L, N_temp)        derive_seed(root, "dataset", L, N_temp)
    training (L, N_temp, N_h)  grid_seed(derive_seed(root, "train", L, N_temp), N_h)
    flows (L, N_temp, N_h)     grid_seed(derive_seed(root, "flow", L, N_temp), N_h) + start offset

Artifacts under the output directory::

    datasets/L{L}_T{N}.irbm, datasets/manifest.json
    calibration/L{L}_T{N}.csv
    models/L{L}_T{N}_H{h}.rbmw, reports/L{L}_T{N}_H{h}.csv
    flows/L{L}_T{N}_H{h}_{pooled,t0,tmax}.csv
    sweeps/L{L}_T{N}.csv
    spectra/L{L}_T{N}_H{h}.csv, spectra/L{L}_T{N}_H{h}/eig{k:03d}.pgm
    fit/points_L{L}.csv, fit/fit_L{L}.csv, fit/trend.csv
    summary.txt
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import formats
from .fitkit import DEFAULT_CUTOFF, fit_emin_law, parameter_trend
from .flow import (FlowConfig, SweepPoint, SweepResult, find_fixed_point, flow_from_temperature,
                   grid_seed, nh_grid, run_flow, sweep_nh)
from .rbm import TrainConfig, train
from .sampler import DEFAULT_SWEEPS, generate_dataset
from .spectral import classify, weight_spectrum
from .thermometer import calibrate

log = logging.getLogger("rbmflow")

WORKERS_ENV = "RBMFLOW_WORKERS"
COMMANDS = ("generate", "calibrate", "train", "flow", "sweep", "spectra", "fit", "report",
            "pipeline")


class ConfigError(ValueError):
    pass


COMPONENTS = {"dataset": 0, "train": 1, "flow": 2}


def derive_seed(root: int, component: str, *path: int) -> int:
    key = (COMPONENTS[component],) + tuple(int(p) for p in path)
    return int(np.random.SeedSequence(root, spawn_key=key).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    side_lengths: list[int] = field(default_factory=lambda: [7])
    n_temps: list[int] = field(default_factory=lambda: [30])
    n_h: list[int] | None = None            # None -> 1, 4, ..., N_v
    n_conf: int | None = None               # desk-scale override of Eq. N_conf
    sweeps: int = DEFAULT_SWEEPS
    train: TrainConfig = field(default_factory=TrainConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    fit_cutoff: float = DEFAULT_CUTOFF
    seed: int = 0
    out: Path = Path("rbmflow-out")
    workers: int = 1

    @classmethod
    def from_mapping(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw or {})
        known = {"lattice", "n_temp", "n_h", "n_conf", "sampler", "train", "flow", "fit",
                 "seed", "out", "workers"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(
                side_lengths=_int_list(raw.get("lattice", [7])),
                n_temps=_int_list(raw.get("n_temp", [30])),
                n_h=None if raw.get("n_h") in (None, "squares") else _int_list(raw["n_h"]),
                n_conf=raw.get("n_conf"),
                sweeps=int((raw.get("sampler") or {}).get("sweeps", DEFAULT_SWEEPS)),
                train=TrainConfig(**_train_fields(raw.get("train") or {})),
                flow=FlowConfig(**(raw.get("flow") or {})),
                fit_cutoff=float((raw.get("fit") or {}).get("cutoff", DEFAULT_CUTOFF)),
                seed=int(raw.get("seed", 0)),
                out=Path(raw.get("out", "rbmflow-out")),
                workers=int(raw.get("workers", os.environ.get(WORKERS_ENV, 1))),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if not cfg.side_lengths or not cfg.n_temps or cfg.n_h == []:
            raise ConfigError("lattice, n_temp and n_h grids must be nonempty")
        if min(cfg.side_lengths) < 2 or min(cfg.n_temps) < 2:
            raise ConfigError("need lattice >= 2 and n_temp >= 2")
        return cfg

    def hidden_sizes(self, side_length: int) -> list[int]:
        n_v = side_length * side_length
        return nh_grid(n_v) if self.n_h is None else [h for h in self.n_h if 1 <= h <= n_v]

    def runs(self):
        for L in self.side_lengths:
            for n in self.n_temps:
                yield L, n


def _int_list(x) -> list[int]:
    return [int(v) for v in (x if isinstance(x, (list, tuple)) else [x])]


def _train_fields(d: dict) -> dict:
    floats, ints = {"learning_rate", "momentum"}, {"epochs", "batch_size", "monitor_every"}
    bad = set(d) - floats - ints
    if bad:
        raise ConfigError(f"unknown train keys: {sorted(bad)} (seeds derive from the root seed)")
    # YAML 1.1 reads "1e-3" as a string and "1e4" as text, hence the explicit casts
    return {k: float(v) if k in floats else int(float(v)) for k, v in d.items()}


def load_config(path, seed=None, out=None, workers=None) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    cfg = ExperimentConfig.from_mapping(raw)
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.out = Path(out)
    if workers is not None:
        cfg.workers = workers
    return cfg


# ---------------------------------------------------------------------------
# artifact paths

def _tag(L, n_temp, n_h=None):
    return f"L{L}_T{n_temp}" + ("" if n_h is None else f"_H{n_h}")


def dataset_path(cfg, L, n):
    return cfg.out / "datasets" / f"{_tag(L, n)}.irbm"


def curve_path(cfg, L, n):
    return cfg.out / "calibration" / f"{_tag(L, n)}.csv"


def model_path(cfg, L, n, h):
    return cfg.out / "models" / f"{_tag(L, n, h)}.rbmw"


def report_path(cfg, L, n, h):
    return cfg.out / "reports" / f"{_tag(L, n, h)}.csv"


def flow_path(cfg, L, n, h, start):
    return cfg.out / "flows" / f"{_tag(L, n, h)}_{start}.csv"


def sweep_path(cfg, L, n):
    return cfg.out / "sweeps" / f"{_tag(L, n)}.csv"


def spectrum_path(cfg, L, n, h):
    return cfg.out / "spectra" / f"{_tag(L, n, h)}.csv"


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{path} missing; run `{stage}` first")
    return path


def _train_config(cfg, L, n):
    return replace(cfg.train, seed=derive_seed(cfg.seed, "train", L, n))


def _flow_config(cfg, L, n):
    return replace(cfg.flow, seed=derive_seed(cfg.seed, "flow", L, n))


# ---------------------------------------------------------------------------
# commands

def cmd_generate(cfg: ExperimentConfig):
    entries = []
    for L, n in cfg.runs():
        seed = derive_seed(cfg.seed, "dataset", L, n)
        ds = generate_dataset(L, n, seed, n_conf=cfg.n_conf, sweeps=cfg.sweeps)
        path = dataset_path(cfg, L, n)
        formats.write_dataset(path, ds)
        entries.append({"file": path.name, "L": L, "n_temp": n, "n_conf": ds.n_conf,
                        "base_seed": seed, "sweeps": ds.sweeps, "prng": ds.prng,
                        "format_version": formats.FORMAT_VERSION})
        log.info("dataset %s: %d x %d configurations", path.name, ds.n_temp, ds.n_conf)
    manifest = {"root_seed": cfg.seed, "datasets": entries}
    formats.atomic_write(cfg.out / "datasets" / "manifest.json",
                         json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_dataset(cfg, L, n):
    return formats.read_dataset(_require(dataset_path(cfg, L, n), "generate"))


def _load_curve(cfg, L, n):
    return formats.read_curve(_require(curve_path(cfg, L, n), "calibrate"), L)


def cmd_calibrate(cfg: ExperimentConfig):
    for L, n in cfg.runs():
        formats.write_curve(curve_path(cfg, L, n), calibrate(_load_dataset(cfg, L, n)))


def cmd_train(cfg: ExperimentConfig):
    for L, n in cfg.runs():
        ds = _load_dataset(cfg, L, n)
        base = _train_config(cfg, L, n)
        for h in cfg.hidden_sizes(L):
            report = train(ds, h, replace(base, seed=grid_seed(base.seed, h)))
            formats.write_model(model_path(cfg, L, n, h), report.model)
            formats.write_train_report(report_path(cfg, L, n, h), report)


def _write_flows(cfg, L, n, h, ds, curve, model, pooled=None):
    fc = _flow_config(cfg, L, n)
    seed = grid_seed(fc.seed, h)
    if pooled is None:
        pooled = run_flow(model, ds.test(), curve, fc.max_iters, seed)
    formats.write_trajectory(flow_path(cfg, L, n, h, "pooled"), pooled)
    for offset, (name, t_index) in enumerate((("t0", 0), ("tmax", ds.n_temp - 1)), start=1):
        traj = flow_from_temperature(model, ds, curve, t_index, fc.max_iters, seed + offset)
        formats.write_trajectory(flow_path(cfg, L, n, h, name), traj)
    return pooled


def cmd_flow(cfg: ExperimentConfig):
    for L, n in cfg.runs():
        ds, curve = _load_dataset(cfg, L, n), _load_curve(cfg, L, n)
        for h in cfg.hidden_sizes(L):
            model = formats.read_model(_require(model_path(cfg, L, n, h), "train"))
            _write_flows(cfg, L, n, h, ds, curve, model)


def _fixed_points_from_flows(cfg, L, n):
    """Rebuild a SweepResult from the pooled flow CSVs."""
    points = []
    for h in cfg.hidden_sizes(L):
        path = flow_path(cfg, L, n, h, "pooled")
        if not path.exists():
            points.append(SweepPoint(h, None, error="missing flow"))
            continue
        traj = formats.read_trajectory(path)
        points.append(SweepPoint(h, find_fixed_point(traj, cfg.flow.window, cfg.flow.tolerance),
                                 traj))
    return SweepResult(points)


def cmd_sweep(cfg: ExperimentConfig):
    for L, n in cfg.runs():
        ds, curve = _load_dataset(cfg, L, n), _load_curve(cfg, L, n)
        result = sweep_nh(ds, curve, cfg.hidden_sizes(L), _train_config(cfg, L, n),
                          _flow_config(cfg, L, n), workers=cfg.workers)
        for p in result.points:
            if p.report is None:
                log.error("N_h=%d failed: %s", p.n_hidden, p.error)
                continue
            formats.write_model(model_path(cfg, L, n, p.n_hidden), p.report.model)
            formats.write_train_report(report_path(cfg, L, n, p.n_hidden), p.report)
            _write_flows(cfg, L, n, p.n_hidden, ds, curve, p.report.model, p.trajectory)
        formats.write_sweep(sweep_path(cfg, L, n), result)


def cmd_spectra(cfg: ExperimentConfig):
    for L, n in cfg.runs():
        for h in cfg.hidden_sizes(L):
            path = model_path(cfg, L, n, h)
            if not path.exists():
                continue
            report = classify(weight_spectrum(formats.read_model(path)))
            formats.write_spectrum(spectrum_path(cfg, L, n, h), report)
            img_dir = cfg.out / "spectra" / _tag(L, n, h)
            for k in range(report.n_visible):
                formats.write_pgm(img_dir / f"eig{k + 1:03d}.pgm", report.image(k))


def _read_sweep(cfg, L, n):
    path = sweep_path(cfg, L, n)
    if not path.exists():
        return None
    return formats.read_csv(path)


def _sweep_argmin(rows):
    ok = [r for r in rows if r["E_star"] != ""]
    if not ok:
        return None
    return min(ok, key=lambda r: (float(r["E_star"]), int(r["N_h"])))


def cmd_fit(cfg: ExperimentConfig):
    fits = []
    for L in cfg.side_lengths:
        pts = []
        for n in cfg.n_temps:
            rows = _read_sweep(cfg, L, n)
            best = _sweep_argmin(rows) if rows else None
            if best is not None:
                pts.append((n, float(best["E_star"])))
        formats.write_csv(cfg.out / "fit" / f"points_L{L}.csv", ("N_temp", "E_min"), pts)
        try:
            res = fit_emin_law(pts, cfg.fit_cutoff)
        except ValueError as exc:
            log.warning("fit for L=%d skipped: %s", L, exc)
            formats.atomic_write(cfg.out / "fit" / f"fit_L{L}.csv",
                                 formats.csv_text(formats.FIT_HEADER + ("error",),
                                                  [("", "", "", len(pts), cfg.fit_cutoff, str(exc))]))
            continue
        formats.write_csv(cfg.out / "fit" / f"fit_L{L}.csv", formats.FIT_HEADER,
                          [(res.a, res.b, res.rss, res.n_points, res.cutoff)])
        fits.append((L * L, res))
    if len(fits) >= 2:
        t = parameter_trend(fits)
        formats.write_csv(cfg.out / "fit" / "trend.csv", ("N_v", "a", "b", "a_trend", "b_trend"),
                          [(nv, a, b, t.a_trend, t.b_trend) for nv, a, b in zip(t.n_visible, t.a, t.b)])


def _num(text: str) -> str:
    return "nan" if text == "" else f"{float(text):.6f}"


def _fmt_row(cols, widths):
    return "  ".join(str(c).rjust(w) for c, w in zip(cols, widths))


def cmd_report(cfg: ExperimentConfig):
    """Summarize the CSV artifacts; no new computation happens here."""
    lines = ["Fixed points of the RBM flow (pooled test ensemble)", ""]
    w = (4, 6, 5, 12, 12, 9, 6)
    lines.append(_fmt_row(("L", "N_temp", "N_h", "E_star", "T_star", "converged", "iters"), w))
    minima = []
    for L, n in cfg.runs():
        rows = _read_sweep(cfg, L, n)
        if not rows:
            continue
        for r in rows:
            lines.append(_fmt_row((L, n, r["N_h"], _num(r["E_star"]), _num(r["T_star"]),
                                   r["converged"], r["iters"]), w))
        best = _sweep_argmin(rows)
        if best is not None:
            minima.append((L, n, best))
    lines += ["", "N_h,min (argmin of E_star; ties to smaller N_h) and non-random ratio", ""]
    w2 = (4, 6, 8, 12, 13, 6)
    lines.append(_fmt_row(("L", "N_temp", "N_h,min", "E_min", "sqrt(Nh/Nv)", "ratio"), w2))
    for L, n, best in minima:
        h = int(best["N_h"])
        spec = spectrum_path(cfg, L, n, h)
        ratio = ""
        if spec.exists():
            classes = [r["class"] for r in formats.read_csv(spec)][:h]
            ratio = f"{sum(c == 'non-random' for c in classes) / h:.3f}"
        lines.append(_fmt_row((L, n, h, _num(best["E_star"]), f"{np.sqrt(h / (L * L)):.3f}", ratio),
                              w2))
    lines += ["", "Fit E_min = -2 exp(-a N_temp^b)", ""]
    for L in cfg.side_lengths:
        path = cfg.out / "fit" / f"fit_L{L}.csv"
        if path.exists():
            r = formats.read_csv(path)[0]
            if r.get("error"):
                lines.append(f"L={L}: not fitted ({r['error']})")
            else:
                lines.append(f"L={L}: a={_num(r['a'])} b={_num(r['b'])} rss={float(r['rss']):.3g} "
                             f"points={r['n_points']}")
    formats.atomic_write(cfg.out / "summary.txt", "\n".join(lines) + "\n")


def cmd_pipeline(cfg: ExperimentConfig):
    for step in (cmd_generate, cmd_calibrate, cmd_sweep, cmd_spectra, cmd_fit, cmd_report):
        log.info("running %s", step.__name__[4:])
        step(cfg)


COMMAND_FUNCS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rbmflow", description="RBM flow experiments on the 2D Ising model")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="YAML experiment configuration")
    p.add_argument("--seed", type=int, help="root seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--workers", type=int, help=f"parallel grid points (default ${WORKERS_ENV} or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed, args.out, args.workers)
        COMMAND_FUNCS[args.command](cfg)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    except (OSError, formats.FormatError) as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
