"""The RBM flow: iterate stochastic reconstructions and track the ensemble.

Each member of the ensemble is pushed through ``v -> h -> v~`` once per
iteration. Iteration 0 holds the statistics of the input ensemble.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lattice import energy_per_site
from .rbm import RbmModel, TrainConfig, TrainReport, reconstruct, train
from .thermometer import CalibrationCurve, temperatures_of

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowConfig:
    max_iters: int = 50
    window: int = 5
    tolerance: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.window < 1 or self.max_iters < self.window:
            raise ValueError("need 1 <= window <= max_iters")


@dataclass
class FlowTrajectory:
    mean_energy: np.ndarray
    std_energy: np.ndarray
    temperature: np.ndarray
    temperature_spread: np.ndarray
    ensemble_size: int
    seed: int

    @property
    def iterations(self) -> np.ndarray:
        return np.arange(len(self.mean_energy))

    def __len__(self):
        return len(self.mean_energy)

    def __eq__(self, other):
        if not isinstance(other, FlowTrajectory):
            return NotImplemented
        return (self.ensemble_size == other.ensemble_size and self.seed == other.seed
                and all(np.array_equal(a, b) for a, b in zip(
                    (self.mean_energy, self.std_energy, self.temperature, self.temperature_spread),
                    (other.mean_energy, other.std_energy, other.temperature,
                     other.temperature_spread))))


@dataclass(frozen=True)
class FixedPointEstimate:
    energy: float
    temperature: float
    iterations: int
    converged: bool


def run_flow(model: RbmModel, ensemble, curve: CalibrationCurve, max_iters: int = 50,
             seed: int = 0) -> FlowTrajectory:
    """Reconstruct the whole ensemble ``max_iters`` times."""
    v = np.atleast_2d(np.asarray(ensemble, dtype=np.int8))
    if v.shape[0] == 0:
        raise ValueError("empty ensemble")
    if v.shape[1] != model.n_visible:
        raise ValueError(f"ensemble has {v.shape[1]} sites, model expects {model.n_visible}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    rows = []
    for it in range(max_iters + 1):
        if it:
            v = reconstruct(model, v, rng)
        e = energy_per_site(v)
        t = temperatures_of(curve, e)
        rows.append((e.mean(), e.std(), t.mean(), t.std()))
    cols = np.array(rows).T
    return FlowTrajectory(*cols, ensemble_size=v.shape[0], seed=seed)


def flow_from_temperature(model: RbmModel, dataset, curve: CalibrationCurve, t_index: int,
                          max_iters: int = 50, seed: int = 0) -> FlowTrajectory:
    """Flow started from the test configurations of one grid temperature."""
    return run_flow(model, dataset.split()[1][t_index], curve, max_iters, seed)


def find_fixed_point(trajectory: FlowTrajectory, window: int = 5,
                     tolerance: float = 0.01) -> FixedPointEstimate:
    """Detect where the sliding-window mean energy stops moving.

    The change between the windows ending at iterations k and k-1 is
    ``|E_k - E_{k-window}| / window``. The flow counts as converged when this
    stays below ``tolerance`` from some iteration through the end of the
    trajectory; E* and T* are averages over the final window.
    """
    e = np.asarray(trajectory.mean_energy)
    if len(e) < window + 1:
        raise ValueError(f"trajectory needs at least {window + 1} records")
    change = np.abs(e[window:] - e[:-window]) / window  # index j -> iteration j + window
    bad = np.flatnonzero(change >= tolerance)
    converged = bad.size == 0 or bad[-1] < len(change) - 1
    first = (0 if bad.size == 0 else bad[-1] + 1) + window
    return FixedPointEstimate(
        energy=float(e[-window:].mean()),
        temperature=float(np.mean(trajectory.temperature[-window:])),
        iterations=int(first) if converged else len(e) - 1,
        converged=bool(converged),
    )


def nh_grid(n_visible: int) -> list[int]:
    """Hidden sizes 1, 4, 9, ..., n_visible."""
    side = math.isqrt(n_visible)
    return [k * k for k in range(1, side + 1)]


@dataclass
class SweepPoint:
    n_hidden: int
    fixed_point: FixedPointEstimate | None
    trajectory: FlowTrajectory | None = None
    report: TrainReport | None = None
    error: str | None = None


@dataclass
class SweepResult:
    points: list[SweepPoint] = field(default_factory=list)

    @property
    def n_h_min(self) -> int | None:
        best = self._best()
        return None if best is None else best.n_hidden

    @property
    def e_min(self) -> float | None:
        best = self._best()
        return None if best is None else best.fixed_point.energy

    def _best(self) -> SweepPoint | None:
        ok = [p for p in self.points if p.fixed_point is not None]
        if not ok:
            return None
        # ties go to the smaller machine
        return min(ok, key=lambda p: (p.fixed_point.energy, p.n_hidden))

    def point(self, n_hidden: int) -> SweepPoint:
        return next(p for p in self.points if p.n_hidden == n_hidden)


def grid_seed(seed: int, n_hidden: int) -> int:
    """Seed of the training run for one hidden size, derived from the sweep seed."""
    return int(np.random.SeedSequence(seed, spawn_key=(n_hidden,)).generate_state(1)[0])


def _sweep_point(dataset, curve, n_hidden, train_config, flow_config) -> SweepPoint:
    try:
        cfg = TrainConfig(**{**train_config.__dict__,
                             "seed": grid_seed(train_config.seed, n_hidden)})
        report = train(dataset, n_hidden, cfg)
        traj = run_flow(report.model, dataset.test(), curve, flow_config.max_iters,
                        grid_seed(flow_config.seed, n_hidden))
        fp = find_fixed_point(traj, flow_config.window, flow_config.tolerance)
        return SweepPoint(n_hidden, fp, traj, report)
    except Exception as exc:  # recorded per grid point; the sweep continues
        log.error("sweep point N_h=%d failed: %s", n_hidden, exc)
        return SweepPoint(n_hidden, None, error=f"{type(exc).__name__}: {exc}")


def sweep_nh(dataset, curve: CalibrationCurve, n_h_grid, train_config: TrainConfig,
             flow_config: FlowConfig = FlowConfig(), workers: int = 1) -> SweepResult:
    """Train one machine per hidden size and flow the pooled test ensemble."""
    grid = list(n_h_grid)
    if not grid:
        raise ValueError("empty N_h grid")
    args = [(dataset, curve, nh, train_config, flow_config) for nh in grid]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            points = list(pool.map(_sweep_point, *zip(*args)))
    else:
        points = [_sweep_point(*a) for a in args]
    return SweepResult(points)
