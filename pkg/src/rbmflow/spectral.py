"""Eigen-analysis of W W^T and classification of eigenvector patterns.

W W^T does not depend on the basis of the hidden units, so its
eigenvectors (reshaped to L x L images) show the spatial patterns the
machine has learned. A pattern counts as non-random when its
nearest-neighbor autocorrelation

    S(u) = sum_<ij> u_i u_j        (unit vector u, periodic lattice)

lies more than three null standard deviations from zero, the null being
uniformly random unit vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import lattice, side_of
from .rbm import RbmModel

NULL_DRAWS = 10_000
NULL_SEED = 20_240_229
SIGMA_LEVEL = 3.0
NON_RANDOM = "non-random"
RANDOM_LIKE = "random-like"


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray        # descending
    eigenvectors: np.ndarray       # columns match eigenvalues
    side_length: int
    n_hidden: int
    statistics: np.ndarray | None = None
    classes: list[str] | None = None

    @property
    def n_visible(self) -> int:
        return self.eigenvectors.shape[0]

    def image(self, k: int) -> np.ndarray:
        return self.eigenvectors[:, k].reshape(self.side_length, self.side_length)

    def rank(self, rtol: float | None = None) -> int:
        """Number of eigenvalues above the numerical-zero threshold."""
        lam = np.abs(self.eigenvalues)
        if lam.size == 0 or lam[0] == 0:
            return 0
        if rtol is None:
            rtol = self.n_visible * np.finfo(float).eps
        return int(np.count_nonzero(lam > rtol * lam[0]))


def weight_spectrum(model: RbmModel) -> SpectralReport:
    """Symmetric eigendecomposition of ``W W^T``, largest eigenvalue first."""
    w = model.weights
    gram = w @ w.T
    lam, u = np.linalg.eigh(gram)
    order = np.argsort(-np.abs(lam), kind="stable")
    return SpectralReport(lam[order], u[:, order], side_of(model.n_visible), model.n_hidden)


def structure_statistic(u) -> float:
    """Nearest-neighbor autocorrelation of a unit vector on the torus."""
    u = np.asarray(u, dtype=float).ravel()
    bonds = lattice(side_of(u.size)).bonds
    return float(np.sum(u[bonds[:, 0]] * u[bonds[:, 1]]))


@lru_cache(maxsize=None)
def null_threshold(side_length: int, draws: int = NULL_DRAWS, seed: int = NULL_SEED) -> float:
    """``SIGMA_LEVEL`` times the std of S over random unit vectors (cached per L)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, side_length])))
    x = rng.standard_normal((draws, side_length * side_length))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    bonds = lattice(side_length).bonds
    s = np.sum(x[:, bonds[:, 0]] * x[:, bonds[:, 1]], axis=1)
    return float(SIGMA_LEVEL * s.std())


def classify_pattern(u, threshold: float | None = None) -> tuple[str, float]:
    """Label one eigenvector image; returns (label, S)."""
    u = np.asarray(u, dtype=float).ravel()
    norm = np.linalg.norm(u)
    if norm == 0:
        raise ValueError("zero vector has no pattern")
    s = structure_statistic(u / norm)
    if threshold is None:
        threshold = null_threshold(side_of(u.size))
    return (NON_RANDOM if abs(s) > threshold else RANDOM_LIKE), s


def classify(report: SpectralReport, threshold: float | None = None) -> SpectralReport:
    """Attach statistics and labels to every eigenvector (in place)."""
    if threshold is None:
        threshold = null_threshold(report.side_length)
    labels, stats = zip(*(classify_pattern(report.eigenvectors[:, k], threshold)
                          for k in range(report.n_visible)))
    report.classes = list(labels)
    report.statistics = np.array(stats)
    return report


def nonrandom_ratio(report: SpectralReport, n_hidden: int | None = None) -> float:
    """Fraction of the leading ``n_hidden`` eigenvectors labelled non-random."""
    if report.classes is None:
        classify(report)
    n = report.n_hidden if n_hidden is None else n_hidden
    if not 1 <= n <= report.n_visible:
        raise ValueError(f"n_hidden must be in [1, {report.n_visible}]")
    return sum(c == NON_RANDOM for c in report.classes[:n]) / n


@dataclass(frozen=True)
class GapProfile:
    ratios: np.ndarray          # lambda_k / lambda_{k+1}, k = 0 .. n-2
    largest_gap: int            # k with the largest ratio (gap after eigenvalue k)
    largest_ratio: float
    spread: float               # coefficient of variation past the head
    head: int


def eigenvalue_gap_profile(eigenvalues, n_hidden: int, head: int = 5) -> GapProfile:
    """Consecutive-ratio gaps and near-degeneracy among the top ``n_hidden``.

    Args:
        eigenvalues: descending eigenvalues, or a :class:`SpectralReport`.
        n_hidden: number of leading eigenvalues to examine.
        head: leading eigenvalues excluded from the spread measure.
    """
    if isinstance(eigenvalues, SpectralReport):
        eigenvalues = eigenvalues.eigenvalues
    lam = np.abs(np.asarray(eigenvalues, dtype=float))[:n_hidden]
    if lam.size < 2:
        raise ValueError("need at least two eigenvalues")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = lam[:-1] / lam[1:]
    k = int(np.nanargmax(ratios))
    tail = lam[head:] if lam.size - head >= 2 else lam
    spread = float(tail.std() / tail.mean()) if tail.mean() > 0 else float("nan")
    return GapProfile(ratios, k, float(ratios[k]), spread, head)
