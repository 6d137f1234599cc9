"""Numerical checks of the moment-expansion machinery behind the gap bounds.

The even moment E[S_n^{2m}] is dominated by a weighted sum of L_1(pi) norms
of alternating matrix products ``U A^{v_1} U A^{v_2} ... U A^{v_{2m-1}} u``
(U = diag(u)).  Splitting each A-power into (A - E_pi) + E_pi indexes the
surviving terms by binary run patterns with no two adjacent zeros, and an
iterated Hoelder argument assigns each surviving factor an operator norm at
an exponent that depends only on the run geometry.  This module enumerates
the patterns, computes the exponents, evaluates the matrix products, and
turns each inequality in the chain into a checkable report.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .chain_core import (
    Observable,
    StationaryChain,
    center_observable,
    observable,
    random_reversible,
    random_stochastic,
    require_centered,
)
from .errors import BudgetExceeded, ParamOutOfRange, PreconditionViolated
from .exact_moments import exact_raw_moments
from .spectral import e_pi, lp_norm_bracket, lp_vector_norm

_PASS_SLACK = 1e-9  # a check passes when lhs <= rhs * (1 + slack)
_MAX_PATTERN_M = 8
_TUPLE_BUDGET = 2_000_000
_CERT_TOL = 1e-7
_CERT_EVAL_CAP = 200_000
PRODUCT_BOUND_CEILING = 3.0  # regression ceiling for log(max product) / m, m <= 8


@dataclass(frozen=True)
class RunPattern:
    """Binary vector s of length 2m-1 with s_{2m-1} = 1 and no "00" substring.

    Entries outside 1..2m-1 read as 0, which is what makes run extraction at
    the boundary well defined.
    """

    m: int
    bits: tuple

    def bit(self, i: int) -> int:
        if 1 <= i <= 2 * self.m - 1:
            return self.bits[i - 1]
        return 0

    def ones(self):
        return [j for j in range(1, 2 * self.m) if self.bit(j) == 1]

    def run_of(self, j: int):
        """(first, last) indices of the maximal run of ones containing j."""
        if self.bit(j) != 1:
            raise ParamOutOfRange(f"position {j} is not a 1 in {self.bits}")
        i1 = j
        while self.bit(i1 - 1) == 1:
            i1 -= 1
        i2 = j
        while self.bit(i2 + 1) == 1:
            i2 += 1
        return i1, i2


@dataclass(frozen=True)
class HolderTerm:
    """Exponent data for one surviving factor: p = 4m/(2m + i1 + i2 - 2j)
    and beta = 1 - |i1 + i2 - 2j| / (2m) = 2 min(1/p, 1 - 1/p)."""

    j: int
    i1: int
    i2: int
    p: float
    beta: float


@dataclass(frozen=True)
class LemmaReport:
    """Outcome of one inequality check.

    ``conservative`` is True when the right-hand side was assembled from
    upper brackets rather than certified norm values, so a pass is weaker
    evidence.  ``passed`` is always the mechanical predicate
    lhs <= rhs * (1 + 1e-9), even for ratio-only checks.
    """

    lemma: str
    instance: str
    lhs: float
    rhs: float
    ratio: float
    passed: bool
    conservative: bool


def _report(lemma, instance, lhs, rhs, conservative) -> LemmaReport:
    if rhs > 0.0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs == 0.0 else math.inf
    return LemmaReport(
        lemma=lemma,
        instance=instance,
        lhs=float(lhs),
        rhs=float(rhs),
        ratio=float(ratio),
        passed=bool(lhs <= rhs * (1.0 + _PASS_SLACK)),
        conservative=bool(conservative),
    )


def admissible_patterns(m: int) -> list[RunPattern]:
    """All run patterns of length 2m-1, in lexicographic bit order."""
    if not 1 <= m <= _MAX_PATTERN_M:
        raise BudgetExceeded(f"pattern enumeration supports 1 <= m <= {_MAX_PATTERN_M}")
    width = 2 * m - 1
    out = []
    for bits in itertools.product((0, 1), repeat=width):
        if bits[-1] != 1:
            continue
        if any(bits[i] == 0 and bits[i + 1] == 0 for i in range(width - 1)):
            continue
        out.append(RunPattern(m=m, bits=bits))
    return out


def holder_exponents(s: RunPattern) -> list[HolderTerm]:
    """Exponent assignment for every position j with s_j = 1."""
    terms = []
    two_m = 2 * s.m
    for j in s.ones():
        i1, i2 = s.run_of(j)
        p = 4 * s.m / (two_m + i1 + i2 - 2 * j)
        beta = 1.0 - abs(i1 + i2 - 2 * j) / two_m
        terms.append(HolderTerm(j=j, i1=i1, i2=i2, p=p, beta=beta))
    return terms


def pattern_product_stats(m: int):
    """(max over patterns of prod 1/beta, maximizing pattern, log(max)/m)."""
    best_prod, best_pattern = -1.0, None
    for s in admissible_patterns(m):
        prod = 1.0
        for term in holder_exponents(s):
            prod /= term.beta
        if prod > best_prod:
            best_prod, best_pattern = prod, s
    return best_prod, best_pattern, math.log(best_prod) / m


# ---------------------------------------------------------------------------
# matrix-product expansion


def expansion_sum(chain: StationaryChain, f: Observable, n: int, m: int) -> float:
    """sum over v_0 + ... + v_{2m-1} <= n - 1 of ||U A^{v_1} ... U A^{v_{2m-1}} u||_{L_1(pi)}.

    v_0 never enters the product, so each inner tuple is weighted by the
    number of admissible v_0 values.  Powers of A are built incrementally
    along the depth-first walk, one multiplication per increment.
    """
    if n < 1 or m < 1:
        raise ParamOutOfRange("need n >= 1 and m >= 1")
    if math.comb(n - 1 + 2 * m, 2 * m) > _TUPLE_BUDGET:
        raise BudgetExceeded(f"{math.comb(n - 1 + 2 * m, 2 * m)} tuples exceed the budget")
    u = require_centered(f, chain.pi)
    if u.ndim != 1:
        raise ParamOutOfRange("expansion needs a scalar observable")
    A, pi = chain.A, chain.pi

    total = 0.0

    def descend(pos: int, residual: int, vec: np.ndarray) -> None:
        nonlocal total
        t = vec
        for v in range(residual + 1):
            if v > 0:
                t = A @ t
            w = u * t
            if pos == 1:
                total += (residual - v + 1) * float((pi * np.abs(w)).sum())
            else:
                descend(pos - 1, residual - v, w)

    descend(2 * m - 1, n - 1, u)
    return total


def expansion_rhs(chain: StationaryChain, f: Observable, n: int, m: int) -> float:
    """(2m)! times the expansion sum; this dominates E[S_n^{2m}]."""
    return math.factorial(2 * m) * expansion_sum(chain, f, n, m)


# ---------------------------------------------------------------------------
# certified operator norms on two states

def _certified_norm_2state(M, pi, p, tol: float = _CERT_TOL):
    """Certified L_p(pi) -> L_p(pi) norm of a 2x2 matrix.

    On two states the unit sphere is the curve (cos t, sin t), t in [0, pi),
    so the norm is a 1-d maximization.  A Lipschitz branch-and-bound keeps a
    global upper bound and an achieved lower bound; it refines until the gap
    is below ``tol`` (or an evaluation cap is hit, in which case the wider
    certified gap is reported).

    Returns (achieved, certified_upper).
    """
    M = np.asarray(M, dtype=float)
    pi = np.asarray(pi, dtype=float)

    def ratio(thetas):
        v = np.stack([np.cos(thetas), np.sin(thetas)])  # (2, B)
        Mv = M @ v
        if math.isinf(p):
            num = np.abs(Mv).max(axis=0)
            den = np.abs(v).max(axis=0)
        else:
            num = (pi[:, None] * np.abs(Mv) ** p).sum(axis=0) ** (1.0 / p)
            den = (pi[:, None] * np.abs(v) ** p).sum(axis=0) ** (1.0 / p)
        return num / den

    sigma = float(np.linalg.svd(M, compute_uv=False)[0])
    if sigma == 0.0:
        return 0.0, 0.0
    # both theta -> ||M v||, theta -> ||v|| are 1-Lipschitz against sigma resp. 1
    if math.isinf(p):
        h_min = 2.0**-0.5
    else:
        h_min = float(pi.min()) ** (1.0 / p) * min(1.0, 2.0 ** (1.0 / p - 0.5))
    lip = sigma / h_min + sigma / h_min**2

    grid = np.linspace(0.0, math.pi, 65)
    vals = ratio(grid)
    best = float(vals.max())
    heap = []
    for i in range(len(grid) - 1):
        a, b, fa, fb = grid[i], grid[i + 1], float(vals[i]), float(vals[i + 1])
        upper = 0.5 * (fa + fb) + 0.5 * lip * (b - a)
        heapq.heappush(heap, (-upper, a, b, fa, fb))
    evals = len(grid)

    while heap and evals < _CERT_EVAL_CAP:
        neg_upper, a, b, fa, fb = heap[0]
        if -neg_upper <= best + tol:
            break
        batch = []
        while heap and len(batch) < 64:
            neg_upper, a, b, fa, fb = heapq.heappop(heap)
            if -neg_upper <= best + tol:
                heapq.heappush(heap, (neg_upper, a, b, fa, fb))
                break
            batch.append((a, b, fa, fb))
        if not batch:
            break
        mids = np.array([0.5 * (a + b) for a, b, _, _ in batch])
        fm = ratio(mids)
        evals += len(batch)
        best = max(best, float(fm.max()))
        for (a, b, fa, fb), mid, fmid in zip(batch, mids, fm):
            fmid = float(fmid)
            for lo, hi, flo, fhi in ((a, mid, fa, fmid), (mid, b, fmid, fb)):
                upper = 0.5 * (flo + fhi) + 0.5 * lip * (hi - lo)
                if upper > best:
                    heapq.heappush(heap, (-upper, lo, hi, flo, fhi))

    certified_upper = best if not heap else max(best, -heap[0][0])
    return best, certified_upper


def operator_norm_for_check(M, pi, p, seed: int = 0):
    """(norm value, used_upper_bracket) for assembling an inequality RHS.

    Two-state problems get the certified value (flagged conservative only if
    the refinement stopped early); larger ones fall back to the interpolation
    upper bracket, which can only inflate the RHS and is flagged as such.
    """
    pi = np.asarray(pi, dtype=float)
    if len(pi) == 2:
        achieved, upper = _certified_norm_2state(M, pi, p)
        return upper, bool(upper - achieved > _CERT_TOL * 1.01)
    return lp_norm_bracket(M, pi, p, seed=seed).upper, True


# ---------------------------------------------------------------------------
# individual inequality checks


def verify_increasing(chain: StationaryChain, f: Observable, n: int, m: int, instance: str = "") -> LemmaReport:
    """E[S_n^{2m}] <= (2m)! * expansion sum, for a centered observable."""
    fc = center_observable(f, chain.pi)
    lhs = exact_raw_moments(chain, fc, n, 2 * m).raw[2 * m]
    rhs = expansion_rhs(chain, fc, n, m)
    return _report("increasing", instance or f"n={n} m={m}", lhs, rhs, conservative=False)


def alternate_exponents(q: float, k: int) -> list[float]:
    """Norm exponents 2q / (q + k + 1 - 2j), j = 1..k, of the iterated
    Hoelder bound; requires q >= k + 1."""
    if k < 0:
        raise ParamOutOfRange("need k >= 0")
    if q < k + 1:
        raise PreconditionViolated(f"need q >= k + 1, got q={q}, k={k}")
    return [2.0 * q / (q + k + 1 - 2 * j) for j in range(1, k + 1)]


def verify_alternate(pi, u, mats, q: float, instance: str = "") -> LemmaReport:
    """||U T_1 U T_2 ... U T_k u||_{L_1(pi)} <= ||u||_{L_q(pi)}^{k+1} prod_j ||T_j||.

    The j-th factor is measured at exponent 2q/(q + k + 1 - 2j).  The k = 0
    case reduces to ||u||_{L_1} <= ||u||_{L_q}.
    """
    pi = np.asarray(pi, dtype=float)
    u = np.asarray(u, dtype=float)
    k = len(mats)
    exps = alternate_exponents(q, k)

    w = u.copy()
    for T in reversed(list(mats)):
        w = np.asarray(T, dtype=float) @ w
        w = u * w
    lhs = lp_vector_norm(w, pi, 1.0)

    rhs = lp_vector_norm(u, pi, q) ** (k + 1)
    conservative = False
    for T, p in zip(mats, exps):
        value, flagged = operator_norm_for_check(np.asarray(T, dtype=float), pi, p)
        rhs *= value
        conservative = conservative or flagged
    return _report("alternate", instance or f"k={k} q={q:g}", lhs, rhs, conservative)


def verify_splitting(pi, u, mats, m: int, instance: str = "") -> LemmaReport:
    """Pattern-split bound for ||U (T_1 + E_pi) ... U (T_{2m-1} + E_pi) u||_{L_1(pi)}.

    The RHS sums, over admissible run patterns, the products of ||T_j|| at
    the run-geometry exponents, scaled by ||u||_{L_{2m}(pi)}^{2m}.  Requires
    a centered u (otherwise the off-pattern terms do not vanish).
    """
    pi = np.asarray(pi, dtype=float)
    mats = [np.asarray(T, dtype=float) for T in mats]
    if len(mats) != 2 * m - 1:
        raise ParamOutOfRange(f"need 2m - 1 = {2 * m - 1} matrices, got {len(mats)}")
    u = require_centered(observable(u), pi)

    E = e_pi(pi)
    w = u.copy()
    for T in reversed(mats):
        w = (T + E) @ w
        w = u * w
    lhs = lp_vector_norm(w, pi, 1.0)

    norm_cache: dict = {}
    conservative = False
    total = 0.0
    for s in admissible_patterns(m):
        prod = 1.0
        for term in holder_exponents(s):
            key = (term.j, round(term.p, 12))
            if key not in norm_cache:
                norm_cache[key] = operator_norm_for_check(mats[term.j - 1], pi, term.p)
            value, flagged = norm_cache[key]
            prod *= value
            conservative = conservative or flagged
        total += prod
    rhs = lp_vector_norm(u, pi, 2 * m) ** (2 * m) * total
    return _report("splitting", instance or f"m={m}", lhs, rhs, conservative)


def verify_finb(chain: StationaryChain, f: Observable, n: int, m: int, instance: str = "") -> LemmaReport:
    """Ratio of the expansion sum's 2m-th root to sqrt(n/m) / sqrt(1 - lam) * ||u||_{L_{2m}}.

    The comparison carries an unspecified universal constant, so the ratio is
    recorded rather than asserted; ``passed`` is the mechanical lhs <= rhs
    predicate and carries no claim.  Requires e * m <= n * (1 - lam).
    """
    lam = chain.lam
    if math.e * m > n * (1.0 - lam):
        raise PreconditionViolated(
            f"need e*m <= n*(1-lambda): e*{m} = {math.e * m:.3f} > {n * (1.0 - lam):.3f}"
        )
    fc = center_observable(f, chain.pi)
    lhs = expansion_sum(chain, fc, n, m) ** (1.0 / (2 * m))
    rhs = math.sqrt(n / m) / math.sqrt(1.0 - lam) * lp_vector_norm(fc.values, chain.pi, 2 * m)
    return _report("finb", instance or f"n={n} m={m} lam={lam:.3g}", lhs, rhs, conservative=False)


def verify_product_bound(m: int, ceiling: float = PRODUCT_BOUND_CEILING) -> LemmaReport:
    """Exponential-growth guard: log(max over patterns of prod 1/beta) / m
    stays below a pre-registered ceiling (enumerated before freezing)."""
    max_prod, pattern, implied = pattern_product_stats(m)
    instance = f"m={m} max_product={max_prod:.12g} pattern={''.join(map(str, pattern.bits))}"
    return _report("product_bound", instance, implied, ceiling, conservative=False)


_LEMMA_IDS = ("increasing", "alternate", "splitting", "finb", "product_bound")


def verify_lemma(lemma: str, instance: dict) -> LemmaReport:
    """Dispatch a named inequality check on a keyword instance."""
    if lemma == "increasing":
        return verify_increasing(**instance)
    if lemma == "alternate":
        return verify_alternate(**instance)
    if lemma == "splitting":
        return verify_splitting(**instance)
    if lemma == "finb":
        return verify_finb(**instance)
    if lemma == "product_bound":
        return verify_product_bound(**instance)
    raise ParamOutOfRange(f"unknown lemma id {lemma!r}; expected one of {_LEMMA_IDS}")


# ---------------------------------------------------------------------------
# seeded instance generators (shared by the CLI and the test grids)


def random_increasing_instance(rng: np.random.Generator, max_states: int = 4, max_n: int = 6, m_choices=(1, 2)) -> dict:
    n_states = int(rng.integers(2, max_states + 1))
    chain = (
        random_reversible(n_states, rng) if rng.random() < 0.5 else random_stochastic(n_states, rng)
    )
    f = observable(rng.uniform(-2.0, 2.0, size=n_states))
    n = int(rng.integers(2, max_n + 1))
    m = int(rng.choice(m_choices))
    label = f"N={n_states} n={n} m={m} rev={chain.reversible}"
    return {"chain": chain, "f": f, "n": n, "m": m, "instance": label}


def random_alternate_instance(rng: np.random.Generator, n_states: int = 2, max_k: int = 3) -> dict:
    k = int(rng.integers(0, max_k + 1))
    pi = rng.uniform(0.1, 1.0, size=n_states)
    pi = pi / pi.sum()
    u = rng.uniform(-1.0, 1.0, size=n_states)
    mats = [rng.uniform(-1.0, 1.0, size=(n_states, n_states)) for _ in range(k)]
    q = k + 1 + float(rng.uniform(0.0, 3.0))
    return {"pi": pi, "u": u, "mats": mats, "q": q, "instance": f"k={k} q={q:.4g}"}


def random_splitting_instance(rng: np.random.Generator, n_states: int = 2, m_choices=(1, 2)) -> dict:
    m = int(rng.choice(m_choices))
    pi = rng.uniform(0.1, 1.0, size=n_states)
    pi = pi / pi.sum()
    u = rng.uniform(-1.0, 1.0, size=n_states)
    u = u - pi @ u  # the splitting identity needs a centered u
    mats = [rng.uniform(-1.0, 1.0, size=(n_states, n_states)) for _ in range(2 * m - 1)]
    return {"pi": pi, "u": u, "mats": mats, "m": m, "instance": f"m={m}"}


def finb_grid(lams=(0.1, 0.5, 0.9), m_choices=(1, 2)) -> list[dict]:
    """two_state instances sized so the precondition e*m <= n*(1-lam) holds."""
    from .chain_core import two_state

    out = []
    for lam in lams:
        for m in m_choices:
            n = max(2, math.ceil(math.e * m / (1.0 - lam)))
            chain = two_state(lam, 0.5)
            f = observable(np.array([1.0, -1.0]))
            out.append(
                {
                    "chain": chain,
                    "f": f,
                    "n": n,
                    "m": m,
                    "instance": f"two_state({lam},0.5) n={n} m={m}",
                }
            )
    return out
