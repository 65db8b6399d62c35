"""Periodic square-lattice geometry and Ising energies (J = k_B = 1).

Sites are indexed row-major, ``site = row * L + col``. Spin arrays hold
``int8`` values in {-1, +1} and may carry leading batch dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class Lattice:
    """Neighbor tables for an ``L x L`` torus.

    ``neighbors[i]`` lists (right, left, down, up). On a 2x2 torus the
    right/left and down/up entries coincide, so each bond is counted
    twice; energies and flip deltas use the same convention.
    """

    side_length: int
    neighbors: np.ndarray
    bonds: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.side_length * self.side_length


@lru_cache(maxsize=None)
def lattice(side_length: int) -> Lattice:
    """Return the (cached) geometry of an ``L x L`` periodic lattice."""
    L = int(side_length)
    if L < 1:
        raise ValueError(f"side length must be positive, got {side_length}")
    idx = np.arange(L * L).reshape(L, L)
    right = np.roll(idx, -1, axis=1).ravel()
    left = np.roll(idx, 1, axis=1).ravel()
    down = np.roll(idx, -1, axis=0).ravel()
    up = np.roll(idx, 1, axis=0).ravel()
    neighbors = np.stack([right, left, down, up], axis=1).astype(np.int64)
    sites = idx.ravel()
    # two bonds owned by each site: to the right and downwards
    bonds = np.concatenate(
        [np.stack([sites, right], axis=1), np.stack([sites, down], axis=1)]
    ).astype(np.int64)
    neighbors.setflags(write=False)
    bonds.setflags(write=False)
    return Lattice(L, neighbors, bonds)


def side_of(n_sites: int) -> int:
    """Side length of a square lattice with ``n_sites`` sites."""
    L = math.isqrt(int(n_sites))
    if L * L != n_sites or L < 1:
        raise ValueError(f"{n_sites} sites do not form a square lattice")
    return L


@dataclass(frozen=True)
class SpinConfig:
    """One +-1 configuration on an ``L x L`` periodic lattice."""

    side_length: int
    spins: np.ndarray

    def __post_init__(self):
        spins = np.asarray(self.spins)
        if spins.shape != (self.side_length * self.side_length,):
            raise ValueError(
                f"expected {self.side_length ** 2} spins, got shape {spins.shape}"
            )
        if not np.all((spins == 1) | (spins == -1)):
            raise ValueError("spins must be exactly -1 or +1")
        spins = spins.astype(np.int8)
        spins.setflags(write=False)
        object.__setattr__(self, "spins", spins)

    @classmethod
    def from_array(cls, spins) -> "SpinConfig":
        spins = np.asarray(spins)
        if spins.ndim == 2:
            if spins.shape[0] != spins.shape[1]:
                raise ValueError("2D spin array must be square")
            return cls(spins.shape[0], spins.ravel())
        return cls(side_of(spins.size), spins)

    def as_image(self) -> np.ndarray:
        return self.spins.reshape(self.side_length, self.side_length)


def _as_spins(config) -> np.ndarray:
    if isinstance(config, SpinConfig):
        return config.spins
    return np.asarray(config)


def energy_per_site(spins) -> np.ndarray | float:
    """Energy per site of one configuration or a batch.

    Args:
        spins: array of shape ``(..., L*L)`` with values +-1.

    Returns:
        ``-sum_<ij> s_i s_j / N_v`` for each configuration; a float for a
        single configuration.
    """
    s = _as_spins(spins)
    n = s.shape[-1]
    geo = lattice(side_of(n))
    s = s.astype(np.int32, copy=False)
    bond_sum = np.sum(s[..., geo.bonds[:, 0]] * s[..., geo.bonds[:, 1]], axis=-1)
    e = -bond_sum / n
    return float(e) if np.ndim(e) == 0 else e


def total_energy(config) -> float:
    """Energy per site of a single configuration, in [-2, 2]."""
    s = _as_spins(config)
    if s.ndim != 1:
        raise ValueError("total_energy takes a single configuration")
    return energy_per_site(s)


def flip_delta(config, site: int) -> int:
    """Total (not per-site) energy change from flipping ``site``."""
    s = _as_spins(config)
    n = s.shape[-1]
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for {n} sites")
    geo = lattice(side_of(n))
    return int(2 * int(s[site]) * int(np.sum(s[geo.neighbors[site]], dtype=np.int64)))


def magnetization(spins) -> np.ndarray | float:
    """Absolute magnetization per site."""
    m = np.abs(np.mean(_as_spins(spins), axis=-1))
    return float(m) if np.ndim(m) == 0 else m


def ground_state(side_length: int) -> SpinConfig:
    return SpinConfig(side_length, np.ones(side_length * side_length, np.int8))


def checkerboard(side_length: int) -> SpinConfig:
    r, c = np.indices((side_length, side_length))
    return SpinConfig(side_length, np.where((r + c) % 2 == 0, 1, -1).ravel())
