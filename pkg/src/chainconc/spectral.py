"""Spectral gap, the averaging projection, and weighted operator-norm brackets.

Throughout, L_p(pi) is R^N equipped with ``||v|| = (sum_i pi_i |v_i|^p)^(1/p)``
(``max_i |v_i|`` for p = inf) and operator norms are taken from L_p(pi) to
itself.  Exact formulas exist for p in {1, 2, inf}; for other exponents the
norm is published as a certified bracket, never as a point value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParamOutOfRange, ZeroMassState

#: relative improvement threshold that stops the lower-bound power iteration
_ASCENT_TOL = 1e-13
_ASCENT_MAX_ITER = 200


def lp_vector_norm(v, pi, p) -> float:
    """Weighted vector p-norm ``(sum_i pi_i |v_i|^p)^(1/p)``; p=inf gives max|v_i|."""
    v = np.abs(np.asarray(v, dtype=float))
    if math.isinf(p):
        return float(v.max())
    return float((np.asarray(pi, dtype=float) * v**p).sum() ** (1.0 / p))


def e_pi(pi) -> np.ndarray:
    """Rank-one averaging matrix: every row equals pi.

    Applied to a vector u it returns the constant vector with value
    ``sum_j pi_j u_j``; in particular it annihilates centered vectors.
    """
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1:
        raise ParamOutOfRange("pi must be a vector")
    return np.tile(pi, (pi.size, 1))


def _check_positive(pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.min() <= 0.0:
        raise ZeroMassState("pi must be strictly positive")
    return pi


def _symmetrized(M, pi) -> np.ndarray:
    """Conjugate M by diag(pi)^{1/2} so ordinary singular values give the
    L_2(pi) operator norm."""
    r = np.sqrt(pi)
    return r[:, None] * M / r[None, :]


def lambda_pi(chain_or_matrix, pi=None) -> float:
    """L_2(pi) operator norm of A - E_pi.

    Computed as the largest singular value of D^{1/2} (A - E_pi) D^{-1/2}
    with D = diag(pi), which is correct whether or not the chain is
    reversible.  Accepts either a StationaryChain or an explicit (A, pi) pair.
    """
    if pi is None:
        A, pi = chain_or_matrix.A, chain_or_matrix.pi
    else:
        A = chain_or_matrix
    A = np.asarray(A, dtype=float)
    pi = _check_positive(pi)
    gap_op = A - e_pi(pi)
    sigma = np.linalg.svd(_symmetrized(gap_op, pi), compute_uv=False)
    return float(sigma[0])


def interpolated_gap_bound(lam: float, p) -> float:
    """Upper bound 2 * lam^(2 min(1/p, 1 - 1/p)) for ||A - E_pi|| on L_p(pi).

    Interpolates the exact L_2(pi) norm ``lam`` against the convexity bound 2
    at the endpoint exponents.  The convention 0^0 = 1 makes p in {1, inf}
    return 2 for every lam, including lam = 0.
    """
    if not 0.0 <= lam <= 1.0:
        raise ParamOutOfRange(f"lambda must lie in [0, 1], got {lam}")
    if not p >= 1.0:
        raise ParamOutOfRange(f"p must be >= 1, got {p}")
    inv = 0.0 if math.isinf(p) else 1.0 / p
    exponent = 2.0 * min(inv, 1.0 - inv)
    if exponent == 0.0:
        return 2.0
    return 2.0 * lam**exponent


@dataclass(frozen=True)
class NormBracket:
    """Two-sided enclosure of an L_p(pi) -> L_p(pi) operator norm.

    ``lower`` is always achieved by ``witness`` (a unit vector of L_p(pi)),
    so the true norm lies in [lower, upper] with the lower end certified.
    """

    p: float
    lower: float
    upper: float
    witness: np.ndarray


def _norm_p1(M, pi):
    # extreme points of the L_1(pi) ball are e_j / pi_j
    col = (pi[:, None] * np.abs(M)).sum(axis=0) / pi
    j = int(np.argmax(col))
    witness = np.zeros(len(pi))
    witness[j] = 1.0 / pi[j]
    return float(col[j]), witness


def _norm_pinf(M, pi):
    rows = np.abs(M).sum(axis=1)
    i = int(np.argmax(rows))
    witness = np.where(M[i] >= 0.0, 1.0, -1.0)
    return float(rows[i]), witness


def _norm_p2(M, pi):
    B = _symmetrized(M, pi)
    _, s, vh = np.linalg.svd(B)
    witness = vh[0] / np.sqrt(pi)
    return float(s[0]), witness


def _power_ascent(M, pi, p, restarts, seed):
    """Best L_p(pi) Rayleigh ratio found by a dual power iteration.

    Works on B = D^{1/p} M D^{-1/p} so the weighted problem becomes the
    ordinary operator p-norm; all restarts advance in lockstep as columns and
    ties are resolved toward the first (lowest-index) restart.
    """
    n = len(pi)
    w = pi ** (1.0 / p)
    B = w[:, None] * M / w[None, :]
    q = p / (p - 1.0)

    rng = np.random.default_rng(seed)
    cols = [np.eye(n), np.ones((n, 1))]
    cols.append(_norm_p2(M, pi)[1].reshape(n, 1) * w[:, None])
    extra = max(restarts - n - 2, 0)
    if extra:
        cols.append(rng.standard_normal((n, extra)))
    X = np.concatenate(cols, axis=1)

    def _colnorm(Y):
        return (np.abs(Y) ** p).sum(axis=0) ** (1.0 / p)

    best_val, best_x = -1.0, X[:, 0].copy()
    prev = -1.0
    for _ in range(_ASCENT_MAX_ITER):
        nrm = _colnorm(X)
        nrm[nrm == 0.0] = 1.0
        X = X / nrm
        Y = B @ X
        vals = _colnorm(Y)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_x = float(vals[k]), X[:, k].copy()
        if best_val - prev < _ASCENT_TOL * max(best_val, 1.0):
            break
        prev = best_val
        # dual step: maximizers of <y, .> on the unit ball of the dual norm
        S = np.sign(Y) * np.abs(Y) ** (p - 1.0)
        Z = B.T @ S
        X = np.sign(Z) * np.abs(Z) ** (q - 1.0)

    witness = best_x / w
    scale = lp_vector_norm(witness, pi, p)
    if scale > 0.0:
        witness = witness / scale
    return float(lp_vector_norm(M @ witness, pi, p)), witness


def lp_norm_bracket(M, pi, p, budget: int = 1, seed: int = 0) -> NormBracket:
    """Bracket the L_p(pi) -> L_p(pi) operator norm of M.

    For p in {1, 2, inf} both ends coincide with the exact norm (weighted
    column sums, singular value, and row sums respectively).  For other p the
    upper end interpolates the exact endpoint norms and the lower end is the
    best witnessed Rayleigh ratio over ``64 * budget`` seeded restarts of a
    dual power iteration, so the truth always lies inside the bracket.
    """
    M = np.asarray(M, dtype=float)
    pi = _check_positive(pi)
    if not p >= 1.0:
        raise ParamOutOfRange(f"p must be >= 1, got {p}")

    if p == 1.0:
        value, witness = _norm_p1(M, pi)
        return NormBracket(p=p, lower=value, upper=value, witness=witness)
    if math.isinf(p):
        value, witness = _norm_pinf(M, pi)
        return NormBracket(p=float("inf"), lower=value, upper=value, witness=witness)
    if p == 2.0:
        value, witness = _norm_p2(M, pi)
        return NormBracket(p=p, lower=value, upper=value, witness=witness)

    n1 = _norm_p1(M, pi)[0]
    n2 = _norm_p2(M, pi)[0]
    ninf = _norm_pinf(M, pi)[0]
    if p < 2.0:
        t = 2.0 * (1.0 - 1.0 / p)  # 1/p = (1-t)/1 + t/2
        upper = n1 ** (1.0 - t) * n2**t
    else:
        t = 1.0 - 2.0 / p  # 1/p = (1-t)/2
        upper = n2 ** (1.0 - t) * ninf**t

    lower, witness = _power_ascent(M, pi, p, restarts=64 * budget, seed=seed)
    lower = min(lower, upper)  # guard: rounding must not break the enclosure
    return NormBracket(p=p, lower=lower, upper=float(upper), witness=witness)
