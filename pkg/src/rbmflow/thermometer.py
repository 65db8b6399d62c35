"""Energy thermometer: invert the calibrated mean-energy vs temperature curve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression

from .lattice import energy_per_site


@dataclass(frozen=True)
class CalibrationCurve:
    side_length: int
    temperatures: np.ndarray
    mean_energy: np.ndarray
    std_energy: np.ndarray
    raw_mean_energy: np.ndarray | None = None

    @property
    def t_max(self) -> float:
        return float(self.temperatures[-1])

    def knots(self) -> tuple[np.ndarray, np.ndarray]:
        """Strictly increasing (energy, temperature) knots used for inversion.

        A plateau of equal smoothed energies collapses to its lowest
        temperature, so the ground-state energy maps to T = 0.
        """
        e = np.asarray(self.mean_energy)
        keep = np.concatenate([[True], np.diff(e) > 0])
        return e[keep], np.asarray(self.temperatures)[keep]


def calibrate(dataset) -> CalibrationCurve:
    """Per-temperature energy statistics with an isotonic (PAVA) mean curve."""
    if dataset.n_temp == 0 or dataset.n_conf == 0:
        raise ValueError("dataset is empty")
    energies = energy_per_site(dataset.configs)
    raw = energies.mean(axis=1)
    smooth = isotonic_regression(raw, increasing=True).x
    return CalibrationCurve(
        dataset.side_length,
        np.asarray(dataset.temperatures, dtype=float),
        smooth,
        energies.std(axis=1),
        raw,
    )


def temperatures_of(curve: CalibrationCurve, energies) -> np.ndarray:
    """Per-configuration temperatures by piecewise-linear inversion.

    Energies below the curve clamp to the lowest grid temperature, above it
    to ``T_max``.
    """
    e_knots, t_knots = curve.knots()
    return np.interp(np.asarray(energies, dtype=float), e_knots, t_knots)


def estimate_temperature(curve: CalibrationCurve, energies,
                         method: str = "per-config") -> tuple[float, float]:
    """Estimated temperature of an ensemble and its spread.

    ``"per-config"`` inverts every energy and returns the mean and standard
    deviation of those temperatures. Below T_c, where the curve is flat and
    the energy distribution skewed, this mean is biased low.
    ``"mean-energy"`` inverts the ensemble mean energy instead; the spread
    is then the per-configuration standard deviation.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    if energies.size == 0:
        raise ValueError("no energies to estimate a temperature from")
    t = temperatures_of(curve, energies)
    if method == "per-config":
        return float(t.mean()), float(t.std())
    if method == "mean-energy":
        return float(temperatures_of(curve, energies.mean())), float(t.std())
    raise ValueError(f"unknown method {method!r}")
