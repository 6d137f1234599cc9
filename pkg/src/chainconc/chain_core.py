"""Construction and validation of finite stationary Markov chains and observables.

A chain is a row-stochastic matrix A together with a strictly positive law pi
satisfying pi A = pi.  Observables are real (or R^d valued) functions on the
state space, optionally carrying arithmetic-lattice metadata that unlocks the
exact distribution engine.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from . import spectral
from .errors import (
    ChainSpecError,
    NonStochastic,
    NotStationary,
    ParamOutOfRange,
    Reducible,
    ZeroMassState,
)

ROW_SUM_TOL = 1e-9  # stochasticity rejection threshold
STATIONARY_TOL = 1e-10  # per-coordinate tolerance on pi A = pi
DETAILED_BALANCE_TOL = 1e-10
CENTERED_TOL = 1e-12
NULLSPACE_TOL = 1e-8  # singular values below this count as null directions
LATTICE_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StationaryChain:
    """Validated chain: transition matrix, stationary law, cached gap data.

    ``lam`` is the L_2(pi) operator norm of A - E_pi; ``reversible`` records
    whether detailed balance pi_i a_ij = pi_j a_ji holds within tolerance.
    Instances are immutable and safe to share across threads.
    """

    A: np.ndarray
    pi: np.ndarray
    lam: float
    reversible: bool

    @property
    def n_states(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class Observable:
    """Function on states: values of shape (N,) or (N, d).

    ``lattice`` is (step, offset) for a scalar observable whose values all
    equal offset + step * integer, a tuple of such pairs per coordinate for a
    vector observable, and None when no lattice structure was found.
    """

    values: np.ndarray
    centered: bool = False
    lattice: tuple | None = None

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[1]


def as_transition_matrix(A) -> np.ndarray:
    """Validate and return A as a read-only row-stochastic float matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParamOutOfRange(f"transition matrix must be square, got shape {A.shape}")
    if A.min() < 0.0:
        raise NonStochastic("transition matrix has a negative entry")
    sums = A.sum(axis=1)
    bad = np.abs(sums - 1.0) > ROW_SUM_TOL
    if bad.any():
        i = int(np.argmax(bad))
        raise NonStochastic(f"row {i} sums to {sums[i]!r}, not 1")
    return _readonly(A)


def stationary_of(A) -> np.ndarray:
    """Unique stationary law of an irreducible stochastic matrix.

    Solves pi A = pi by a deflated linear solve (one constraint row replaced
    by normalization), falling back to iterated multiplication if the
    residual is not at rounding level.  Uniqueness is decided from the null
    space dimension of A^T - I at tolerance 1e-8; a non-unique law or a law
    with a zero entry raises Reducible.
    """
    A = as_transition_matrix(A)
    n = A.shape[0]
    K = A.T - np.eye(n)
    null_dim = int((np.linalg.svd(K, compute_uv=False) < NULLSPACE_TOL).sum())
    if null_dim != 1:
        raise Reducible(f"stationary law is not unique (null space dimension {null_dim})")

    lhs = np.vstack([K, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    pi = pi / pi.sum()

    if np.abs(pi @ A - pi).max() > 1e-12:
        for _ in range(200_000):
            nxt = pi @ A
            nxt = nxt / nxt.sum()
            if np.abs(nxt - pi).max() < 1e-15:
                pi = nxt
                break
            pi = nxt
        if np.abs(pi @ A - pi).max() > 1e-12:
            raise Reducible("stationary solve did not converge to residual 1e-12")

    if pi.min() <= 0.0:
        raise Reducible("stationary law has a nonpositive entry")
    return _readonly(pi)


def _detailed_balance(A, pi) -> bool:
    flow = pi[:, None] * A
    return bool(np.abs(flow - flow.T).max() <= DETAILED_BALANCE_TOL)


def validate_chain(A, pi=None) -> StationaryChain:
    """Check stochasticity and stationarity, returning a StationaryChain.

    When pi is omitted it is computed by ``stationary_of`` (which requires
    irreducibility); an explicit pi only needs to satisfy pi A = pi with full
    support.  The reversibility flag is set by testing detailed balance, and
    the spectral gap value is computed and cached on the result.
    """
    A = as_transition_matrix(A)
    n = A.shape[0]
    if pi is None:
        pi = stationary_of(A)
    else:
        pi = np.asarray(pi, dtype=float)
        if pi.shape != (n,):
            raise ParamOutOfRange(f"pi has shape {pi.shape}, expected ({n},)")
        if pi.min() <= 0.0:
            raise ZeroMassState("pi must be strictly positive")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise ParamOutOfRange(f"pi sums to {pi.sum()!r}, not 1")
        resid = np.abs(pi @ A - pi).max()
        if resid > STATIONARY_TOL:
            raise NotStationary(f"max |pi A - pi| = {resid:.3e} exceeds {STATIONARY_TOL}")
        pi = _readonly(pi)
    lam = spectral.lambda_pi(A, pi)
    return StationaryChain(A=A, pi=pi, lam=lam, reversible=_detailed_balance(A, pi))


def is_reversible(chain: StationaryChain) -> bool:
    """True iff detailed balance pi_i a_ij = pi_j a_ji holds within 1e-10."""
    return _detailed_balance(chain.A, chain.pi)


# ---------------------------------------------------------------------------
# constructors


def _check_open_unit(name, value):
    if not 0.0 < value < 1.0:
        raise ParamOutOfRange(f"{name} must lie in (0, 1), got {value}")


def two_state(lam: float, eps: float) -> StationaryChain:
    """Two-state chain lam * I + (1 - lam) * E_pi with pi = (eps, 1 - eps).

    Its stationary law is (eps, 1 - eps) and its gap value is exactly lam,
    which makes it the workhorse for sharpness scans.
    """
    _check_open_unit("lam", lam)
    _check_open_unit("eps", eps)
    pi = np.array([eps, 1.0 - eps])
    A = lam * np.eye(2) + (1.0 - lam) * np.tile(pi, (2, 1))
    return validate_chain(A, pi)


def iid_chain(pi) -> StationaryChain:
    """Chain with A = E_pi, i.e. independent draws from pi at every step."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1 or pi.size < 2:
        raise ParamOutOfRange("pi must be a vector with at least two states")
    if pi.min() <= 0.0:
        raise ZeroMassState("pi must be strictly positive")
    return validate_chain(np.tile(pi, (pi.size, 1)), pi)


def lazy(base, theta: float) -> StationaryChain:
    """Lazy version theta * I + (1 - theta) * A of a chain; theta is the
    added holding probability.  The stationary law is unchanged."""
    _check_open_unit("theta", theta)
    if isinstance(base, StationaryChain):
        A, pi = base.A, base.pi
    else:
        A = as_transition_matrix(base)
        pi = None
    L = theta * np.eye(A.shape[0]) + (1.0 - theta) * A
    return validate_chain(L, pi)


def cycle(n_states: int, laziness: float) -> StationaryChain:
    """Lazy simple random walk on the n-cycle; stationary law is uniform."""
    if n_states < 2:
        raise ParamOutOfRange(f"cycle needs at least 2 states, got {n_states}")
    _check_open_unit("laziness", laziness)
    P = np.zeros((n_states, n_states))
    for i in range(n_states):
        P[i, (i + 1) % n_states] += 0.5
        P[i, (i - 1) % n_states] += 0.5
    A = laziness * np.eye(n_states) + (1.0 - laziness) * P
    return validate_chain(A, np.full(n_states, 1.0 / n_states))


_CONSTRUCTORS = {
    "two_state": two_state,
    "iid": iid_chain,
    "lazy": lazy,
    "cycle": cycle,
}


def make_chain(kind: str, *args, **kwargs) -> StationaryChain:
    """Dispatch to a named constructor: two_state, iid, lazy, or cycle."""
    try:
        ctor = _CONSTRUCTORS[kind]
    except KeyError:
        raise ParamOutOfRange(f"unknown chain kind {kind!r}") from None
    return ctor(*args, **kwargs)


def random_stochastic(n_states: int, rng: np.random.Generator) -> StationaryChain:
    """Random chain with strictly positive rows (gamma weights, normalized)."""
    G = rng.gamma(shape=1.0, scale=1.0, size=(n_states, n_states)) + 1e-3
    return validate_chain(G / G.sum(axis=1, keepdims=True))


def random_reversible(n_states: int, rng: np.random.Generator) -> StationaryChain:
    """Random reversible chain: a walk on a complete graph with random
    positive symmetric edge weights."""
    W = rng.gamma(shape=1.0, scale=1.0, size=(n_states, n_states)) + 1e-3
    W = W + W.T
    deg = W.sum(axis=1)
    return validate_chain(W / deg[:, None], deg / deg.sum())


# ---------------------------------------------------------------------------
# observables


def _float_gcd(values, tol: float) -> float:
    g = 0.0
    for x in values:
        x = abs(float(x))
        while x > tol:
            g, x = x, math.fmod(g, x)
    return g


def detect_lattice(values, tol: float = LATTICE_TOL):
    """Find (step, offset) with values = offset + step * integers, else None.

    The offset is the minimum value and the step is a floating-point gcd of
    the residues; a constant column is reported with step 1.  Steps below
    1e-6 of the value scale are treated as detection noise (incommensurable
    values drive the gcd toward zero) and yield None; explicit metadata can
    still be attached for genuinely fine lattices.  For 2-d value arrays a
    tuple of per-coordinate pairs is returned, or None if any coordinate
    fails.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 2:
        per_coord = [detect_lattice(v[:, c], tol) for c in range(v.shape[1])]
        if any(p is None for p in per_coord):
            return None
        return tuple(per_coord)
    offset = float(v.min())
    residues = v - offset
    scale = max(1.0, float(np.abs(v).max()))
    if residues.max() <= tol * scale:
        return (1.0, offset)  # constant observable: trivially on a lattice
    step = _float_gcd(residues, tol)
    if step <= 1e-6 * scale:
        return None
    k = np.rint(residues / step)
    if np.abs(residues - k * step).max() > tol * scale:
        return None
    return (float(step), offset)


def observable(values, lattice="auto") -> Observable:
    """Wrap raw values as an Observable, detecting lattice structure by default."""
    v = np.asarray(values, dtype=float)
    if v.ndim not in (1, 2) or v.shape[0] < 1:
        raise ParamOutOfRange(f"observable values must be (N,) or (N, d), got {v.shape}")
    if lattice == "auto":
        lattice = detect_lattice(v)
    return Observable(values=_readonly(v), centered=False, lattice=lattice)


def stationary_mean(f: Observable, pi):
    """Exact mean under pi: scalar for 1-d values, a length-d vector otherwise."""
    pi = np.asarray(pi, dtype=float)
    if f.values.ndim == 1:
        return float(pi @ f.values)
    return pi @ f.values


def center_observable(f: Observable, pi) -> Observable:
    """Subtract the stationary mean (coordinatewise for vector values).

    Centering an already centered observable is an exact no-op, so the
    operation is idempotent bit for bit.
    """
    if f.values.shape[0] != len(pi):
        raise ParamOutOfRange("observable and pi have different state counts")
    if f.centered:
        return f
    mean = stationary_mean(f, pi)
    shifted = f.values - mean
    lat = f.lattice
    if lat is not None:
        if f.values.ndim == 1:
            lat = (lat[0], lat[1] - mean)
        else:
            lat = tuple((s, o - m) for (s, o), m in zip(lat, mean))
    return Observable(values=_readonly(shifted), centered=True, lattice=lat)


def require_centered(f: Observable, pi) -> np.ndarray:
    """Return f's values after checking the stationary mean is zero."""
    from .errors import NotCentered

    mean = np.atleast_1d(stationary_mean(f, pi))
    scale = max(1.0, float(np.abs(f.values).max(initial=0.0)))
    if np.abs(mean).max() > CENTERED_TOL * scale:
        raise NotCentered(f"stationary mean {mean} is not zero")
    return f.values


# ---------------------------------------------------------------------------
# chain spec files

_SPEC_KEYS = {"n_states", "A", "pi", "f"}


def load_chain_spec(source) -> tuple[StationaryChain, Observable | None]:
    """Read a chain spec JSON object from a path, file object, or dict.

    Schema: {"n_states": int, "A": [[number]], "pi": [number] (optional),
    "f": [number] or [[number]] (optional)}.  Unknown keys are rejected and
    all numbers are parsed as 64-bit floats.
    """
    if isinstance(source, dict):
        data = source
    elif hasattr(source, "read"):
        data = json.load(source)
    else:
        with open(source, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    if not isinstance(data, dict):
        raise ChainSpecError("chain spec must be a JSON object")
    unknown = set(data) - _SPEC_KEYS
    if unknown:
        raise ChainSpecError(f"unknown keys in chain spec: {sorted(unknown)}")
    if "n_states" not in data or "A" not in data:
        raise ChainSpecError("chain spec requires 'n_states' and 'A'")
    n = data["n_states"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ChainSpecError(f"'n_states' must be a positive integer, got {n!r}")

    def _numeric_array(key, expect_shape):
        try:
            arr = np.asarray(data[key], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ChainSpecError(f"'{key}' must be numeric: {exc}") from None
        if arr.shape[: len(expect_shape)] != expect_shape:
            raise ChainSpecError(
                f"'{key}' has shape {arr.shape}, expected leading {expect_shape}"
            )
        return arr

    A = _numeric_array("A", (n, n))
    if A.ndim != 2:
        raise ChainSpecError(f"'A' must be a matrix, got ndim {A.ndim}")
    pi = _numeric_array("pi", (n,)) if "pi" in data else None
    chain = validate_chain(A, pi)
    f = None
    if "f" in data:
        values = _numeric_array("f", (n,))
        if values.ndim > 2:
            raise ChainSpecError("'f' must be a vector or a matrix of rows per state")
        f = observable(values)
    return chain, f
