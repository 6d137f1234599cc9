"""Seeded trajectory simulation and empirical moment / tail estimation.

Every estimate is a pure function of (inputs, seed).  Trial i draws its
uniforms from a counter-based stream keyed by (seed, i), so per-trial values
never depend on how trials are batched: splitting the work across any number
of workers reproduces the same bits, provided the final reduction runs over
the per-trial values in trial-index order (which it does here).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain_core import Observable, StationaryChain, stationary_mean
from .errors import ParamOutOfRange

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / float(1 << 53)


@dataclass(frozen=True)
class EmpiricalEstimate:
    """Monte Carlo estimate with its standard error and provenance."""

    value: float
    stderr: float
    trials: int
    seed: int


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer, vectorized over uint64 arrays
    x = x ^ (x >> np.uint64(30))
    x = x * _MIX1
    x = x ^ (x >> np.uint64(27))
    x = x * _MIX2
    return x ^ (x >> np.uint64(31))


def _trial_uniforms(seed: int, lo: int, hi: int, steps: int) -> np.ndarray:
    """Uniforms in [0, 1) for trials lo..hi-1, one row per trial.

    Entry (i, t) depends only on (seed, trial index lo+i, step t).
    """
    with np.errstate(over="ignore"):
        key = _mix64(np.uint64(seed % (1 << 64)) * _GOLDEN + _GOLDEN)
        trials = np.arange(lo, hi, dtype=np.uint64)[:, None]
        steps_ix = np.arange(steps, dtype=np.uint64)[None, :]
        stream = _mix64(key + trials * _GOLDEN)
        bits = _mix64(stream + (steps_ix + np.uint64(1)) * _GOLDEN)
    return (bits >> np.uint64(11)).astype(np.float64) * _U53


def _walk(chain: StationaryChain, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF walk: one trajectory per row of uniforms.

    Sampling scans the cumulative row sums left to right; an exact tie sends
    the draw to the lower state index.
    """
    n_states = chain.n_states
    cum_pi = np.cumsum(chain.pi)
    cum_rows = np.cumsum(chain.A, axis=1)
    trials, steps = uniforms.shape
    states = np.empty((trials, steps), dtype=np.intp)
    states[:, 0] = np.minimum(
        np.searchsorted(cum_pi, uniforms[:, 0], side="left"), n_states - 1
    )
    for t in range(1, steps):
        rows = cum_rows[states[:, t - 1]]
        states[:, t] = np.minimum(
            (rows < uniforms[:, t, None]).sum(axis=1), n_states - 1
        )
    return states


def sample_trajectory(chain: StationaryChain, n: int, seed: int, trial: int = 0) -> np.ndarray:
    """One stationary trajectory of length n: W_1 ~ pi, then row transitions.

    Deterministic per (seed, trial); the trial index selects the stream used
    by the estimators below, so trial 0 reproduces their first trajectory.
    """
    if n < 1:
        raise ParamOutOfRange("need n >= 1")
    return _walk(chain, _trial_uniforms(seed, trial, trial + 1, n))[0]


def _chunk_bounds(trials: int, workers: int):
    if workers < 1:
        raise ParamOutOfRange("workers must be >= 1")
    base, rem = divmod(trials, workers)
    bounds, lo = [], 0
    for w in range(workers):
        hi = lo + base + (1 if w < rem else 0)
        if hi > lo:
            bounds.append((lo, hi))
        lo = hi
    return bounds


def _per_trial_deviations(chain, f, n, seed, lo, hi, p):
    uniforms = _trial_uniforms(seed, lo, hi, n)
    states = _walk(chain, uniforms)
    mean = stationary_mean(f, chain.pi)
    if f.values.ndim == 1:
        sums = f.values[states].sum(axis=1)
        return np.abs(sums / n - mean)
    sums = f.values[states].sum(axis=1)  # (trials, d)
    diff = np.abs(sums / n - mean)
    if math.isinf(p):
        return diff.max(axis=1)
    return (diff**p).sum(axis=1) ** (1.0 / p)


def empirical_moment(
    chain: StationaryChain,
    f: Observable,
    n: int,
    q: float,
    trials: int,
    seed: int,
    p: float = 2.0,
    workers: int = 1,
) -> EmpiricalEstimate:
    """Sample mean of |S_n/n - mean|^q over independent stationary trajectories.

    The centering mean is computed exactly from pi, never estimated.  Vector
    observables are reduced with the l_p^d norm (p=2 by default).  ``workers``
    only partitions the trials; the result is bitwise identical for any value.
    """
    if trials < 2:
        raise ParamOutOfRange("need trials >= 2")
    parts = [
        _per_trial_deviations(chain, f, n, seed, lo, hi, p) ** q
        for lo, hi in _chunk_bounds(trials, workers)
    ]
    values = np.concatenate(parts)
    value = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(trials))
    return EmpiricalEstimate(value=value, stderr=stderr, trials=trials, seed=seed)


def empirical_tail(
    chain: StationaryChain,
    f: Observable,
    n: int,
    a: float,
    trials: int,
    seed: int,
    p: float = 2.0,
    workers: int = 1,
) -> EmpiricalEstimate:
    """Fraction of trajectories with |S_n/n - mean| >= a, with binomial stderr."""
    if trials < 2:
        raise ParamOutOfRange("need trials >= 2")
    if a < 0:
        raise ParamOutOfRange("need a >= 0")
    parts = [
        (_per_trial_deviations(chain, f, n, seed, lo, hi, p) >= a).astype(float)
        for lo, hi in _chunk_bounds(trials, workers)
    ]
    hits = np.concatenate(parts)
    value = float(hits.mean())
    stderr = float(math.sqrt(value * (1.0 - value) / trials))
    return EmpiricalEstimate(value=value, stderr=stderr, trials=trials, seed=seed)
