"""Restricted Boltzmann machine with +-1 visible and hidden units.

Energy ``Phi(v, h) = -v.W.h - b_v.v - b_h.h``; conditionals factorize so
``<h_a> = tanh(v.W[:, a] + b_h[a])`` and ``<v_i> = tanh(W[i].h + b_v[i])``.
Training uses CD-1 with Rao-Blackwellized hidden statistics and
heavy-ball momentum. The ``exact_*`` functions enumerate every joint state
and exist as test oracles for machines with at most 20 units.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

log = logging.getLogger(__name__)

MAX_ENUMERATED_UNITS = 20


@dataclass
class RbmModel:
    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.visible_bias = np.asarray(self.visible_bias, dtype=float)
        self.hidden_bias = np.asarray(self.hidden_bias, dtype=float)
        n_v, n_h = self.weights.shape
        if self.visible_bias.shape != (n_v,) or self.hidden_bias.shape != (n_h,):
            raise ValueError("bias shapes do not match the weight matrix")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.visible_bias))
                and np.all(np.isfinite(self.hidden_bias))):
            raise ValueError("model parameters must be finite")

    @property
    def n_visible(self) -> int:
        return self.weights.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "RbmModel":
        return RbmModel(self.weights.copy(), self.visible_bias.copy(), self.hidden_bias.copy())

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "RbmModel":
        return cls(np.zeros((n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden))

    @classmethod
    def initial(cls, n_visible: int, n_hidden: int, rng: np.random.Generator) -> "RbmModel":
        """Gaussian weights with std ``0.01 / sqrt(n_visible)``, zero biases."""
        w = rng.normal(0.0, 0.01 / np.sqrt(n_visible), size=(n_visible, n_hidden))
        return cls(w, np.zeros(n_visible), np.zeros(n_hidden))

    def __eq__(self, other):
        if not isinstance(other, RbmModel):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.visible_bias, other.visible_bias)
                and np.array_equal(self.hidden_bias, other.hidden_bias))


class Gradient(NamedTuple):
    """Parameter-shaped triple: a gradient, an update, or a velocity."""

    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.visible_bias, self.hidden_bias])

    @classmethod
    def zeros_like(cls, model: RbmModel) -> "Gradient":
        return cls(np.zeros_like(model.weights), np.zeros_like(model.visible_bias),
                   np.zeros_like(model.hidden_bias))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.5
    epochs: int = 100_000
    batch_size: int = 100
    seed: int = 0
    # test-half error is measured every `monitor_every` epochs (and at the end)
    monitor_every: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1 or self.monitor_every < 1:
            raise ValueError("epochs, batch_size and monitor_every must be positive")


@dataclass
class TrainReport:
    model: RbmModel
    config: TrainConfig
    train_err: np.ndarray
    test_err: np.ndarray
    overfit: bool = False
    elapsed: float = field(default=0.0, compare=False)

    @property
    def epochs(self) -> np.ndarray:
        return np.arange(1, len(self.train_err) + 1)

    def __eq__(self, other):
        if not isinstance(other, TrainReport):
            return NotImplemented
        return (self.model == other.model and self.config == other.config
                and self.overfit == other.overfit
                and np.array_equal(self.train_err, other.train_err, equal_nan=True)
                and np.array_equal(self.test_err, other.test_err, equal_nan=True))


def _check_visible(model: RbmModel, v: np.ndarray):
    if v.shape[-1] != model.n_visible:
        raise ValueError(f"expected {model.n_visible} visible units, got {v.shape[-1]}")


def hidden_expectation(model: RbmModel, v) -> np.ndarray:
    """``tanh(v W + b_h)`` for one visible vector or a batch."""
    v = np.asarray(v, dtype=float)
    _check_visible(model, v)
    return np.tanh(v @ model.weights + model.hidden_bias)


def visible_expectation(model: RbmModel, h) -> np.ndarray:
    """``tanh(W h + b_v)`` for one hidden vector or a batch."""
    h = np.asarray(h, dtype=float)
    if h.shape[-1] != model.n_hidden:
        raise ValueError(f"expected {model.n_hidden} hidden units, got {h.shape[-1]}")
    return np.tanh(h @ model.weights.T + model.visible_bias)


def sample_binary(expectation, rng: np.random.Generator) -> np.ndarray:
    """Draw +-1 units with ``P(+1) = (1 + <x>) / 2``; one uniform per unit."""
    expectation = np.asarray(expectation, dtype=float)
    u = rng.random(expectation.shape)
    return np.where(u < 0.5 * (1.0 + expectation), 1, -1).astype(np.int8)


def reconstruct(model: RbmModel, v, rng: np.random.Generator) -> np.ndarray:
    """One stochastic v -> h -> v~ pass."""
    h = sample_binary(hidden_expectation(model, v), rng)
    return sample_binary(visible_expectation(model, h), rng)


def _cd1_statistics(W, bv, bh, v, u_h, u_v):
    ph = np.tanh(v @ W + bh)
    h = np.where(u_h < 0.5 * (1.0 + ph), 1.0, -1.0)
    vt = np.where(u_v < 0.5 * (1.0 + np.tanh(h @ W.T + bv)), 1.0, -1.0)
    phr = np.tanh(vt @ W + bh)
    b = v.shape[0]
    grad = Gradient((v.T @ ph - vt.T @ phr) / b,
                    (v - vt).mean(axis=0),
                    (ph - phr).mean(axis=0))
    return grad, vt


def cd1_gradient(model: RbmModel, v, rng: np.random.Generator) -> tuple[Gradient, np.ndarray]:
    """CD-1 estimate of the log-likelihood gradient over a minibatch.

    Returns the estimate (an ascent direction, i.e. minus the KL gradient)
    and the reconstructions used for the negative phase. Draws the hidden
    uniforms, shape (B, N_h), then the visible ones, shape (B, N_v).
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    u_h = rng.random((v.shape[0], model.n_hidden))
    u_v = rng.random(v.shape)
    return _cd1_statistics(model.weights, model.visible_bias, model.hidden_bias, v, u_h, u_v)


def cd1_update(model: RbmModel, batch, config: TrainConfig, velocity: Gradient | None,
               rng: np.random.Generator) -> tuple[RbmModel, Gradient]:
    """One momentum-SGD step: ``vel = mu * vel + eps * grad; theta += vel``."""
    batch = np.atleast_2d(np.asarray(batch))
    if batch.shape[0] == 0:
        raise ValueError("empty minibatch")
    _check_visible(model, batch)
    if velocity is None:
        velocity = Gradient.zeros_like(model)
    grad, _ = cd1_gradient(model, batch, rng)
    mu, eps = config.momentum, config.learning_rate
    new_vel = Gradient(*(mu * v + eps * g for v, g in zip(velocity, grad)))
    new_model = RbmModel(model.weights + new_vel.weights,
                         model.visible_bias + new_vel.visible_bias,
                         model.hidden_bias + new_vel.hidden_bias)
    return new_model, new_vel


def _spawn(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s))
            for s in np.random.SeedSequence(seed).spawn(n)]


def _overfit(test_err: np.ndarray) -> bool:
    errs = test_err[np.isfinite(test_err)]
    if errs.size < 20:
        return False
    w = errs.size // 10
    means = np.convolve(errs, np.ones(w) / w, mode="valid")
    return bool(means[-1] > means.min() + 3 * errs[-w:].std() / np.sqrt(w) + 1e-3)


def fit_rbm(train_v: np.ndarray, test_v: np.ndarray | None, n_hidden: int,
            config: TrainConfig, callback=None) -> TrainReport:
    """Train on ``train_v`` with shuffled-minibatch CD-1.

    Errors are mean per-site mismatches between inputs and reconstructions.
    The training error of an epoch is collected from the CD-1 negative
    phase; the test error from a separate reconstruction of ``test_v``.
    """
    if n_hidden < 1:
        raise ValueError("n_hidden must be >= 1")
    train_v = np.asarray(train_v, dtype=float)
    n, n_visible = train_v.shape
    init_rng, sgd_rng, monitor_rng = _spawn(config.seed, 3)
    model = RbmModel.initial(n_visible, n_hidden, init_rng)
    W, bv, bh = model.weights, model.visible_bias, model.hidden_bias
    vW, vbv, vbh = np.zeros_like(W), np.zeros_like(bv), np.zeros_like(bh)
    mu, eps = config.momentum, config.learning_rate
    bs = config.batch_size
    train_err = np.empty(config.epochs)
    test_err = np.full(config.epochs, np.nan)
    start = time.perf_counter()
    for epoch in range(config.epochs):
        order = sgd_rng.permutation(n)
        u_h = sgd_rng.random((n, n_hidden))
        u_v = sgd_rng.random((n, n_visible))
        mismatches = 0.0
        for lo in range(0, n, bs):
            v = train_v[order[lo:lo + bs]]
            grad, vt = _cd1_statistics(W, bv, bh, v, u_h[lo:lo + bs], u_v[lo:lo + bs])
            # in-place so `model` keeps referring to the live parameters
            vW *= mu
            vW += eps * grad.weights
            vbv *= mu
            vbv += eps * grad.visible_bias
            vbh *= mu
            vbh += eps * grad.hidden_bias
            W += vW
            bv += vbv
            bh += vbh
            mismatches += np.count_nonzero(v != vt)
        train_err[epoch] = mismatches / train_v.size
        last = epoch == config.epochs - 1
        if test_v is not None and len(test_v) and ((epoch + 1) % config.monitor_every == 0 or last):
            test_err[epoch] = reconstruction_error(model, test_v, monitor_rng)
        if callback is not None:
            callback(epoch, train_err[epoch], test_err[epoch])
    if not np.all(np.isfinite(W)):
        raise FloatingPointError("training diverged")
    overfit = _overfit(test_err)
    if overfit:
        log.warning("test reconstruction error increased during training (N_h=%d)", n_hidden)
    return TrainReport(model, config, train_err, test_err, overfit,
                       time.perf_counter() - start)


def train(dataset, n_hidden: int, config: TrainConfig, callback=None) -> TrainReport:
    """Train on the even-index half of every temperature block."""
    return fit_rbm(dataset.train(), dataset.test(), n_hidden, config, callback)


def reconstruction_error(model: RbmModel, v, rng: np.random.Generator) -> float:
    """Fraction of sites that differ after one stochastic reconstruction."""
    v = np.asarray(v)
    return float(np.count_nonzero(reconstruct(model, v, rng) != v) / v.size)


# ---------------------------------------------------------------------------
# exact enumeration oracles (small machines only)

def _enumerable(model: RbmModel):
    if model.n_visible + model.n_hidden > MAX_ENUMERATED_UNITS:
        raise ValueError(
            f"{model.n_visible + model.n_hidden} units exceed the enumeration limit "
            f"of {MAX_ENUMERATED_UNITS}")


def _states(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)[:, None]
    bits = (idx >> np.arange(n - 1, -1, -1)) & 1
    return (2 * bits - 1).astype(float)


def _neg_energy(model: RbmModel, V: np.ndarray, H: np.ndarray) -> np.ndarray:
    """``-Phi(v, h)`` for every pair of rows of V and H."""
    return (V @ model.weights) @ H.T + (V @ model.visible_bias)[:, None] + (H @ model.hidden_bias)[None, :]


def _data_distribution(model: RbmModel, data) -> tuple[np.ndarray, np.ndarray]:
    data = np.atleast_2d(np.asarray(data))
    _check_visible(model, data)
    bits = (data > 0).astype(np.int64)
    index = bits @ (1 << np.arange(model.n_visible - 1, -1, -1))
    q = np.bincount(index, minlength=2 ** model.n_visible) / len(data)
    return q, q > 0


def exact_log_partition(model: RbmModel) -> float:
    _enumerable(model)
    return float(logsumexp(_neg_energy(model, _states(model.n_visible), _states(model.n_hidden))))


def exact_visible_distribution(model: RbmModel) -> np.ndarray:
    """Marginal ``p(v)`` over all visible states (state index = bits of v)."""
    _enumerable(model)
    a = _neg_energy(model, _states(model.n_visible), _states(model.n_hidden))
    return np.exp(logsumexp(a, axis=1) - logsumexp(a))


def exact_kl(model: RbmModel, data) -> float:
    """``KL(q || p~)`` between the empirical data distribution and the model."""
    q, seen = _data_distribution(model, data)
    p = exact_visible_distribution(model)
    return float(np.sum(q[seen] * (np.log(q[seen]) - np.log(p[seen]))))


def exact_loglik_gradient(model: RbmModel, data) -> Gradient:
    """Exact gradient of ``KL(q || p~)`` with respect to every parameter."""
    _enumerable(model)
    q, _ = _data_distribution(model, data)
    V, H = _states(model.n_visible), _states(model.n_hidden)
    a = _neg_energy(model, V, H)
    joint = np.exp(a - logsumexp(a))
    cond = np.exp(a - logsumexp(a, axis=1, keepdims=True))  # P(h | v)
    data_joint = q[:, None] * cond
    diff = data_joint - joint
    # dKL/dtheta = <dPhi/dtheta>_data - <dPhi/dtheta>_model and dPhi/dW = -v h
    return Gradient(-(V.T @ diff @ H),
                    -(V.T @ diff.sum(axis=1)),
                    -(H.T @ diff.sum(axis=0)))


def exact_cd1_update(model: RbmModel, data) -> Gradient:
    """Expectation of :func:`cd1_gradient` over all sampling randomness."""
    _enumerable(model)
    q, _ = _data_distribution(model, data)
    V, H = _states(model.n_visible), _states(model.n_hidden)
    a = _neg_energy(model, V, H)
    p_h_v = np.exp(a - logsumexp(a, axis=1, keepdims=True))
    p_v_h = np.exp(a - logsumexp(a, axis=0, keepdims=True)).T  # P(v~ | h)
    mean_h = np.tanh(V @ model.weights + model.hidden_bias)
    r = q @ p_h_v @ p_v_h  # distribution of the reconstruction v~
    pos = Gradient(V.T @ (q[:, None] * mean_h), V.T @ q, mean_h.T @ q)
    neg = Gradient(V.T @ (r[:, None] * mean_h), V.T @ r, mean_h.T @ r)
    return Gradient(*(p - n for p, n in zip(pos, neg)))
