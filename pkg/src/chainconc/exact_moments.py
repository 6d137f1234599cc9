"""Exact moments, distributions, and tails of S_n = f(W_1) + ... + f(W_n).

Three engines cover the ground truth from different directions: a moment
recursion over (order, state), a lattice-distribution recursion over
(state, lattice index), and a brute-force weighted enumeration of all
trajectories.  The redundancy is deliberate: each engine validates the other
two, and together they cover even orders (fast), arbitrary real orders
(lattice observables), and tiny instances (any observable).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .chain_core import Observable, StationaryChain, center_observable, stationary_mean
from .errors import BudgetExceeded, NotLattice, OddExponent, ParamOutOfRange

_MOMENT_BUDGET = 1_000_000_000  # n * (K+1)^2 * N^2 operations
_LATTICE_BUDGET = 500_000  # lattice points per distribution (scalar)
_VECTOR_CELL_BUDGET = 2_000_000  # state x grid cells for the vector recursion
_ENUM_BUDGET = 10_000_000  # trajectories
_ENUM_CHUNK = 1 << 16
_VALUE_KEY_DECIMALS = 12  # rounding used to aggregate enumerated sums


@dataclass(frozen=True)
class MomentTable:
    """Raw moments E[S_n^k] for k = 0..K, plus the one-step mean E[f(W_1)]."""

    n: int
    mean: float
    raw: np.ndarray


@dataclass(frozen=True)
class LatticeDistribution:
    """Exact law of S_n supported on offset + step * {integer indices}.

    ``mass`` maps the integer index to its probability; indices with zero
    mass are omitted.  Masses are nonnegative and sum to 1 within 1e-12.
    """

    step: float
    offset: float
    mass: dict

    def support(self):
        """(values, probabilities) in increasing index order."""
        idx = np.array(sorted(self.mass), dtype=float)
        probs = np.array([self.mass[int(i)] for i in idx])
        return self.offset + self.step * idx, probs


def _scalar_values(f: Observable) -> np.ndarray:
    if f.values.ndim != 1:
        raise ParamOutOfRange("this engine handles scalar observables only")
    return f.values


def exact_raw_moments(chain: StationaryChain, f: Observable, n: int, max_order: int) -> MomentTable:
    """Raw moments E[S_t^k] at t = n for k = 0..max_order.

    Propagates M_k(t, j) = E[S_t^k ; W_t = j] with
    ``M_k(t+1, j) = sum_l C(k, l) f(j)^l sum_i M_{k-l}(t, i) a_ij`` and
    M_k(1, j) = pi_j f(j)^k, costing O(n K^2 N^2).  Accumulation order is
    fixed (states vectorized, powers ascending) for reproducible output.
    """
    if n < 1 or max_order < 0:
        raise ParamOutOfRange("need n >= 1 and max_order >= 0")
    u = _scalar_values(f)
    A, pi = chain.A, chain.pi
    N = chain.n_states
    K = max_order
    if n * (K + 1) ** 2 * N * N > _MOMENT_BUDGET:
        raise BudgetExceeded(f"moment recursion of size n={n}, K={K}, N={N}")

    pows = np.array([u**l for l in range(K + 1)])  # (K+1, N)
    comb = np.array([[math.comb(k, l) for l in range(K + 1)] for k in range(K + 1)], dtype=float)
    M = pi * pows
    for _ in range(n - 1):
        pushed = M @ A
        new = np.empty_like(M)
        for k in range(K + 1):
            acc = pushed[k].copy()
            for l in range(1, k + 1):
                acc += comb[k, l] * pows[l] * pushed[k - l]
            new[k] = acc
        M = new
    return MomentTable(n=n, mean=float(pi @ u), raw=M.sum(axis=1))


def exact_central_abs_moment(chain: StationaryChain, f: Observable, n: int, q: int) -> float:
    """E[|S_n / n - E f(W_1)|^q] for even integer q >= 2, exact up to rounding.

    The observable is centered before the recursion (rather than expanded
    binomially afterwards) to avoid catastrophic cancellation.  Odd or
    non-integer orders have no moment-recursion route; use the lattice
    distribution instead.
    """
    if not (isinstance(q, (int, np.integer)) and q >= 2 and q % 2 == 0):
        raise OddExponent(f"q={q!r}: need an even integer >= 2, or go via exact_distribution")
    centered = center_observable(f, chain.pi)
    table = exact_raw_moments(chain, centered, n, q)
    return float(table.raw[q] / float(n) ** q)


def _lattice_indices(f: Observable):
    if f.lattice is None:
        raise NotLattice("observable carries no lattice metadata")
    step, offset = f.lattice
    k = np.rint((f.values - offset) / step).astype(int)
    shift = int(k.min())  # rebase so indices start at 0 even for custom offsets
    return step, offset + step * shift, k - shift


def exact_distribution(chain: StationaryChain, f: Observable, n: int) -> LatticeDistribution:
    """Exact law of S_n for a scalar lattice observable.

    Propagates mass over (state, lattice index); the result supports exact
    tail queries and absolute moments at any real order q >= 1.
    """
    if n < 1:
        raise ParamOutOfRange("need n >= 1")
    u = _scalar_values(f)
    step, offset, k = _lattice_indices(f)
    span = int(k.max())
    width = n * span + 1
    if width > _LATTICE_BUDGET:
        raise BudgetExceeded(f"lattice width {width} exceeds budget {_LATTICE_BUDGET}")
    A, pi = chain.A, chain.pi
    N = chain.n_states

    T = np.zeros((N, width))
    np.add.at(T, (np.arange(N), k), pi)
    for _ in range(n - 1):
        pushed = A.T @ T
        new = np.zeros_like(T)
        for j in range(N):
            if k[j] == 0:
                new[j] = pushed[j]
            else:
                new[j, k[j] :] = pushed[j, : width - k[j]]
        T = new
    totals = T.sum(axis=0)
    mass = {int(i): float(m) for i, m in enumerate(totals) if m > 0.0}
    return LatticeDistribution(step=step, offset=n * offset, mass=mass)


def raw_moment_from_distribution(dist: LatticeDistribution, k: int) -> float:
    """E[S^k] computed directly from the exact law."""
    values, probs = dist.support()
    return float((probs * values**k).sum())


def abs_moment_from_distribution(dist: LatticeDistribution, n: int, mean: float, q: float) -> float:
    """E[|S/n - mean|^q] computed directly from the exact law of S."""
    values, probs = dist.support()
    return float((probs * np.abs(values / n - mean) ** q).sum())


def tail_from_distribution(dist: LatticeDistribution, n: int, mean: float, a: float) -> float:
    """Exact P[|S/n - mean| >= a] from the law of S."""
    values, probs = dist.support()
    return float(probs[np.abs(values / n - mean) >= a].sum())


@dataclass(frozen=True)
class EnumerationResult:
    """Brute-force truth: E[|S_n - n mean|^q] and the aggregated law of S_n.

    ``distribution`` maps the value of S_n (rounded to 12 decimals for
    aggregation) to its probability; it is None for vector observables.
    """

    abs_moment: float
    distribution: dict | None


def enumeration_oracle(
    chain: StationaryChain, f: Observable, n: int, q: float, p: float = 2.0
) -> EnumerationResult:
    """Weighted sum over all N^n trajectories, the independent truth source.

    Each trajectory (i_1, ..., i_n) carries weight pi_{i_1} a_{i_1 i_2}
    ... a_{i_{n-1} i_n}.  The deviation S_n - n * mean is |.| for scalar
    observables and the l_p^d norm for vector ones.
    """
    if n < 1 or q < 1:
        raise ParamOutOfRange("need n >= 1 and q >= 1")
    N = chain.n_states
    if N**n > _ENUM_BUDGET:
        raise BudgetExceeded(f"{N}^{n} trajectories exceed the enumeration budget")
    A, pi = chain.A, chain.pi
    mean = stationary_mean(f, chain.pi)
    scalar = f.values.ndim == 1

    acc_abs = 0.0
    dist: dict | None = {} if scalar else None
    paths_iter = itertools.product(range(N), repeat=n)
    while True:
        block = list(itertools.islice(paths_iter, _ENUM_CHUNK))
        if not block:
            break
        paths = np.array(block, dtype=np.intp)
        w = pi[paths[:, 0]].copy()
        for t in range(n - 1):
            w *= A[paths[:, t], paths[:, t + 1]]
        if scalar:
            S = f.values[paths].sum(axis=1)
            dev = np.abs(S - n * mean)
        else:
            S = f.values[paths].sum(axis=1)  # (B, d)
            diff = np.abs(S - n * mean)
            if math.isinf(p):
                dev = diff.max(axis=1)
            else:
                dev = (diff**p).sum(axis=1) ** (1.0 / p)
        acc_abs += float((w * dev**q).sum())
        if scalar:
            for value, weight in zip(np.round(S, _VALUE_KEY_DECIMALS), w):
                key = float(value) + 0.0  # normalize -0.0
                dist[key] = dist.get(key, 0.0) + float(weight)
    return EnumerationResult(abs_moment=acc_abs, distribution=dist)


def distribution_as_values(dist: LatticeDistribution) -> dict:
    """Rebase a lattice law onto rounded values, comparable with enumeration."""
    values, probs = dist.support()
    out = {}
    for value, prob in zip(np.round(values, _VALUE_KEY_DECIMALS), probs):
        key = float(value) + 0.0
        out[key] = out.get(key, 0.0) + float(prob)
    return out


# ---------------------------------------------------------------------------
# vector observables (d <= 3): joint lattice recursion


@dataclass(frozen=True)
class VectorLatticeDistribution:
    """Exact joint law of a vector S_n on a product lattice.

    Coordinate c of the sum takes value offsets[c] + steps[c] * index_c and
    ``mass`` is the d-dimensional array of probabilities over index tuples.
    """

    steps: np.ndarray
    offsets: np.ndarray
    mass: np.ndarray


def exact_vector_distribution(chain: StationaryChain, f: Observable, n: int) -> VectorLatticeDistribution:
    """Joint law of S_n for a vector lattice observable with d <= 3."""
    if f.values.ndim != 2:
        raise ParamOutOfRange("vector engine needs values of shape (N, d)")
    d = f.values.shape[1]
    if d > 3:
        raise BudgetExceeded(f"joint lattice recursion supports d <= 3, got d={d}")
    if f.lattice is None:
        raise NotLattice("vector observable carries no lattice metadata")
    steps = np.array([s for s, _ in f.lattice])
    offsets = np.array([o for _, o in f.lattice])
    k = np.rint((f.values - offsets) / steps).astype(int)  # (N, d)
    shift = k.min(axis=0)
    k = k - shift
    offsets = offsets + steps * shift
    widths = tuple(int(n * k[:, c].max() + 1) for c in range(d))
    N = chain.n_states
    if N * int(np.prod(widths)) > _VECTOR_CELL_BUDGET:
        raise BudgetExceeded(f"joint lattice of shape {widths} exceeds the cell budget")
    A, pi = chain.A, chain.pi

    T = np.zeros((N,) + widths)
    for i in range(N):
        T[(i, *k[i])] += pi[i]
    for _ in range(n - 1):
        pushed = np.tensordot(A, T, axes=([0], [0]))  # pushed[j, ...] = sum_i a_ij T[i, ...]
        new = np.zeros_like(T)
        for j in range(N):
            dst = tuple(slice(k[j, c], widths[c]) for c in range(d))
            src = tuple(slice(0, widths[c] - k[j, c]) for c in range(d))
            new[(j, *dst)] = pushed[(j, *src)]
        T = new
    return VectorLatticeDistribution(steps=steps, offsets=n * offsets, mass=T.sum(axis=0))


def vector_abs_moment(
    vdist: VectorLatticeDistribution, n: int, mean_vec, q: float, p: float = 2.0
) -> float:
    """E[||S/n - mean||_{l_p^d}^q] from the exact joint law."""
    mean_vec = np.asarray(mean_vec, dtype=float)
    d = vdist.mass.ndim
    axes = np.indices(vdist.mass.shape).reshape(d, -1).T  # (cells, d)
    values = vdist.offsets + vdist.steps * axes
    diff = np.abs(values / n - mean_vec)
    if math.isinf(p):
        dev = diff.max(axis=1)
    else:
        dev = (diff**p).sum(axis=1) ** (1.0 / p)
    return float((vdist.mass.reshape(-1) * dev**q).sum())
