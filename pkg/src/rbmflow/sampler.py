"""Metropolis Monte Carlo for the 2D Ising model and dataset generation.

Every Markov chain owns its own random stream. Streams are derived from
a base seed with :class:`numpy.random.SeedSequence` spawn keys::

    chain (t, s) of a dataset  ->  SeedSequence(base_seed, spawn_key=(t, s))
    single equilibrate() call  ->  SeedSequence(seed)

and drive a PCG64 bit generator. Each chain first draws its initial spins
(``integers(0, 2, N_v)``), then ``sweeps * N_v`` site indices
(``integers(0, N_v)``), then as many uniforms, one per flip attempt.

Sites are picked uniformly at random. A fixed raster order composes
single-site updates into a sweep that is not ergodic on small tori: on a
3x3 lattice it settles on a distribution measurably different from the
Boltzmann one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .lattice import SpinConfig, flip_delta, lattice

ZERO_TEMPERATURE = 1e-6
DEFAULT_SWEEPS = 100
PRNG_ID = "numpy-PCG64;SeedSequence(base_seed,spawn_key=(t,s));init=integers(0,2,Nv);random-site"


def _effective_temperature(temperature: float) -> float:
    if temperature < 0:
        raise ValueError(f"temperature must be non-negative, got {temperature}")
    return ZERO_TEMPERATURE if temperature == 0 else float(temperature)


@dataclass(frozen=True)
class SamplerParams:
    temperature: float
    sweeps: int = DEFAULT_SWEEPS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "temperature", _effective_temperature(self.temperature))
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")


def acceptance(delta_e: float, temperature: float) -> float:
    """Metropolis acceptance probability ``min(1, exp(-dE/T))``."""
    if delta_e <= 0:
        return 1.0
    return float(np.exp(-delta_e / temperature))


def metropolis_step(config, site: int, temperature: float, draw: float) -> np.ndarray:
    """Single Metropolis update; returns a new spin array.

    The spin at ``site`` is flipped iff ``draw < min(1, exp(-dE/T))``.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    spins = np.array(config.spins if isinstance(config, SpinConfig) else config, dtype=np.int8)
    if draw < acceptance(flip_delta(spins, site), temperature):
        spins[site] = -spins[site]
    return spins


def _acceptance_table(temperature: float) -> np.ndarray:
    # indexed by (dE + 8) // 4 for dE in {-8, -4, 0, 4, 8}
    return np.array([acceptance(d, temperature) for d in (-8, -4, 0, 4, 8)])


@numba.njit(cache=True)
def _sweep_chains(spins, neighbors, sites, uniforms, table):
    n_chains = spins.shape[0]
    for c in range(n_chains):
        for k in range(uniforms.shape[1]):
            i = sites[c, k]
            s = spins[c, i]
            h = (spins[c, neighbors[i, 0]] + spins[c, neighbors[i, 1]]
                 + spins[c, neighbors[i, 2]] + spins[c, neighbors[i, 3]])
            de = 2 * s * h
            if uniforms[c, k] < table[(de + 8) // 4]:
                spins[c, i] = -s


@numba.njit(cache=True)
def _energy_trace(spins, neighbors, sites, uniforms, table, thin, out, start_bonds):
    n_sites = spins.shape[0]
    bonds = start_bonds
    j = 0
    for k in range(uniforms.shape[0]):
        i = sites[k]
        s = spins[i]
        h = (spins[neighbors[i, 0]] + spins[neighbors[i, 1]]
             + spins[neighbors[i, 2]] + spins[neighbors[i, 3]])
        de = 2 * s * h
        if uniforms[k] < table[(de + 8) // 4]:
            spins[i] = -s
            bonds -= de
        if (k + 1) % (n_sites * thin) == 0:
            out[j] = bonds
            j += 1
    return bonds


def _chain_rng(seed: int, key: tuple = ()) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _run_chains(side_length, temperature, sweeps, rngs) -> np.ndarray:
    geo = lattice(side_length)
    n = geo.n_sites
    table = _acceptance_table(_effective_temperature(temperature))
    spins = np.empty((len(rngs), n), dtype=np.int8)
    sites = np.empty((len(rngs), sweeps * n), dtype=np.int32)
    uniforms = np.empty((len(rngs), sweeps * n))
    for c, rng in enumerate(rngs):
        spins[c] = 2 * rng.integers(0, 2, n, dtype=np.int8) - 1
        sites[c] = rng.integers(0, n, sweeps * n, dtype=np.int32)
        uniforms[c] = rng.random(sweeps * n)
    _sweep_chains(spins, geo.neighbors, sites, uniforms, table)
    return spins


def equilibrate(params: SamplerParams, side_length: int) -> SpinConfig:
    """Run one chain from a uniformly random start for ``params.sweeps`` sweeps."""
    spins = _run_chains(side_length, params.temperature, params.sweeps,
                        [_chain_rng(params.seed)])
    return SpinConfig(side_length, spins[0])


def energy_trace(side_length: int, temperature: float, n_sweeps: int, seed: int = 0,
                 thin: int = 1, chunk: int = 100_000) -> np.ndarray:
    """Energy per site of one long chain, recorded every ``thin`` sweeps.

    Draws are made per chunk of sweeps: site indices, then uniforms.
    """
    if n_sweeps % thin or chunk % thin:
        raise ValueError("n_sweeps and chunk must be multiples of thin")
    geo = lattice(side_length)
    n = geo.n_sites
    table = _acceptance_table(_effective_temperature(temperature))
    rng = _chain_rng(seed)
    spins = (2 * rng.integers(0, 2, n, dtype=np.int8) - 1)
    bonds = int(np.sum(spins[geo.bonds[:, 0]].astype(np.int64) * spins[geo.bonds[:, 1]]))
    out = np.empty(n_sweeps // thin, dtype=np.int64)
    done = 0
    while done < n_sweeps:
        m = min(chunk, n_sweeps - done)
        buf = np.empty(m // thin, dtype=np.int64)
        sites = rng.integers(0, n, m * n, dtype=np.int32)
        bonds = _energy_trace(spins, geo.neighbors, sites, rng.random(m * n), table, thin, buf,
                              bonds)
        out[done // thin:(done + m) // thin] = buf
        done += m
    return -out / n


def temperature_grid(n_temp: int) -> np.ndarray:
    """Temperatures 0, 0.1, ..., 0.1 * (n_temp - 1)."""
    return np.round(0.1 * np.arange(n_temp), 10)


def n_conf_for(n_temp: int) -> int:
    """Configurations per temperature: ``min(2000, 2 * floor(1e5 / n_temp))``."""
    if n_temp < 1:
        raise ValueError("n_temp must be positive")
    return min(2000, 2 * (100_000 // n_temp))


@dataclass
class Dataset:
    """Multi-temperature ensemble; ``configs`` has shape (N_temp, N_conf, N_v)."""

    side_length: int
    temperatures: np.ndarray
    configs: np.ndarray
    base_seed: int
    prng: str = PRNG_ID
    sweeps: int = DEFAULT_SWEEPS
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.temperatures = np.asarray(self.temperatures, dtype=float)
        self.configs = np.asarray(self.configs, dtype=np.int8)
        if self.configs.ndim != 3:
            raise ValueError("configs must have shape (N_temp, N_conf, N_v)")
        if self.configs.shape[0] != len(self.temperatures):
            raise ValueError("one configuration block per temperature required")
        if self.configs.shape[2] != self.side_length ** 2:
            raise ValueError("configuration size does not match side length")

    @property
    def n_temp(self) -> int:
        return self.configs.shape[0]

    @property
    def n_conf(self) -> int:
        return self.configs.shape[1]

    @property
    def n_visible(self) -> int:
        return self.configs.shape[2]

    @property
    def t_max(self) -> float:
        return float(self.temperatures[-1])

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """Even/odd split per temperature into (train, test) blocks."""
        return self.configs[:, 0::2], self.configs[:, 1::2]

    def train(self) -> np.ndarray:
        return self.split()[0].reshape(-1, self.n_visible)

    def test(self) -> np.ndarray:
        return self.split()[1].reshape(-1, self.n_visible)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.side_length == other.side_length
                and self.base_seed == other.base_seed
                and self.prng == other.prng
                and np.array_equal(self.temperatures, other.temperatures)
                and np.array_equal(self.configs, other.configs))


def generate_dataset(side_length: int, n_temp: int, base_seed: int, *,
                     n_conf: int | None = None, sweeps: int = DEFAULT_SWEEPS,
                     chunk: int = 500) -> Dataset:
    """Independently equilibrated configurations on the 0.1-spaced grid.

    ``n_conf`` defaults to :func:`n_conf_for`; smaller values are a
    desk-scale override and are recorded in ``Dataset.meta``.
    """
    if n_temp < 2 or side_length < 2:
        raise ValueError("need n_temp >= 2 and side_length >= 2")
    default = n_conf_for(n_temp)
    n_conf = default if n_conf is None else int(n_conf)
    temps = temperature_grid(n_temp)
    configs = np.empty((n_temp, n_conf, side_length ** 2), dtype=np.int8)
    for t, temp in enumerate(temps):
        for lo in range(0, n_conf, chunk):
            hi = min(lo + chunk, n_conf)
            rngs = [_chain_rng(base_seed, (t, s)) for s in range(lo, hi)]
            configs[t, lo:hi] = _run_chains(side_length, temp, sweeps, rngs)
    meta = {} if n_conf == default else {"n_conf_override": n_conf}
    return Dataset(side_length, temps, configs, int(base_seed), PRNG_ID, sweeps, meta)
