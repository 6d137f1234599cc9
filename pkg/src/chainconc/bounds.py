"""Gap-based moment and tail bounds, and comparisons against exact oracles.

Every bound takes its multiplicative constant explicitly (default 1), since
the underlying inequalities hold up to unspecified universal factors; suites
that need a concrete ceiling derive one from oracle runs and pin it there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain_core import (
    Observable,
    StationaryChain,
    center_observable,
    iid_chain,
    observable,
    stationary_mean,
    two_state,
)
from .errors import (
    DomainViolated,
    GapClosed,
    ParamOutOfRange,
    PreconditionViolated,
    RegimeUnsupported,
)
from .exact_moments import (
    abs_moment_from_distribution,
    exact_central_abs_moment,
    exact_distribution,
    exact_vector_distribution,
    tail_from_distribution,
    vector_abs_moment,
)
from .montecarlo import empirical_moment, empirical_tail
from .spectral import lp_vector_norm


@dataclass(frozen=True)
class BoundReport:
    """One evaluated bound, optionally with an exact or empirical LHS."""

    bound_id: str
    params: dict = field(repr=False)
    rhs: float = 0.0
    lhs: float | None = None
    lhs_method: str | None = None
    ratio: float | None = None
    valid: bool = True


def _require_gap(lam: float) -> float:
    if not 0.0 <= lam:
        raise ParamOutOfRange(f"lambda must be >= 0, got {lam}")
    if lam >= 1.0:
        raise GapClosed(f"bounds require lambda < 1, got {lam}")
    return lam


def moment_bound(q: float, lam: float, n: int, f_q_norm: float, C: float = 1.0) -> float:
    """Kernel C * sqrt(q / ((1 - lambda) n)) * ||f||_{L_q(pi)} for q >= 2."""
    if q < 2:
        raise ParamOutOfRange(f"moment_bound needs q >= 2 (got {q}); use subtwo_bound")
    _require_gap(lam)
    if n < 1:
        raise ParamOutOfRange("need n >= 1")
    if f_q_norm < 0:
        raise ParamOutOfRange("need f_q_norm >= 0")
    return C * math.sqrt(q / ((1.0 - lam) * n)) * f_q_norm


def gillman_bound(q: float, lam: float, n: int, f_max: float, C: float = 1.0) -> float:
    """Worst-case variant: same kernel with max_j |f(j)| in place of the
    L_q(pi) norm, so it always dominates moment_bound on concrete observables."""
    return moment_bound(q, lam, n, f_max, C)


def subtwo_bound(q: float, lam: float, n: int, f_q_norm: float, C: float = 1.0) -> float:
    """Kernel C * (1 / ((1 - lambda) n))^(1 - 1/q) * ||f||_{L_q(pi)} for 1 <= q <= 2."""
    if not 1.0 <= q <= 2.0:
        raise ParamOutOfRange(f"subtwo_bound needs 1 <= q <= 2, got {q}")
    _require_gap(lam)
    if n < 1:
        raise ParamOutOfRange("need n >= 1")
    if f_q_norm < 0:
        raise ParamOutOfRange("need f_q_norm >= 0")
    return C * (1.0 / ((1.0 - lam) * n)) ** (1.0 - 1.0 / q) * f_q_norm


def tail_domain_edge(q: float, lam: float, n: int) -> float:
    """Largest deviation sqrt(q / ((1 - lambda) n)) the tail bound covers."""
    _require_gap(lam)
    return math.sqrt(q / ((1.0 - lam) * n))


def corollary_tail(a: float, q: float, lam: float, n: int, c: float = 1.0) -> float:
    """exp(-c (1 - lambda) n a^2), valid for 0 < a <= sqrt(q / ((1 - lambda) n)).

    Outside that range the estimate makes no claim, so the call is rejected
    rather than extrapolated.
    """
    if q < 2:
        raise ParamOutOfRange(f"need q >= 2, got {q}")
    if c <= 0:
        raise ParamOutOfRange(f"need c > 0, got {c}")
    edge = tail_domain_edge(q, lam, n)
    if not 0.0 < a <= edge:
        raise DomainViolated(f"a={a:g} outside the admissible range (0, {edge:g}]")
    return math.exp(-c * (1.0 - lam) * n * a * a)


def vector_moment_bound(q: float, p: float, lam: float, n: int, f_norm: float, C: float = 1.0) -> float:
    """Same kernel for l_p-valued observables; supported regime is q >= p >= 2.

    The case 2 <= q < p needs different machinery and is refused rather than
    approximated.
    """
    if p < 2:
        raise ParamOutOfRange(f"need p >= 2, got {p}")
    if q < p:
        raise RegimeUnsupported(f"q={q} < p={p} is outside the supported regime")
    return moment_bound(q, lam, n, f_norm, C)


# ---------------------------------------------------------------------------
# LHS evaluation and comparison


def f_q_norm(f: Observable, pi, q: float, p: float = 2.0) -> float:
    """(E ||f(W_1)||^q)^(1/q) under pi; vector values use the l_p^d norm."""
    if f.values.ndim == 1:
        mags = np.abs(f.values)
    elif math.isinf(p):
        mags = np.abs(f.values).max(axis=1)
    else:
        mags = (np.abs(f.values) ** p).sum(axis=1) ** (1.0 / p)
    return lp_vector_norm(mags, pi, q)


def central_q_norm_exact(chain: StationaryChain, f: Observable, n: int, q: float, p: float = 2.0) -> float:
    """(E |S_n/n - mean|^q)^(1/q) by the exact engines.

    Scalar observables use the moment recursion for even integer q and the
    lattice distribution otherwise; vector observables use the joint lattice
    law (d <= 3) or, at q = 2 with the Euclidean norm, the coordinatewise
    variance reduction.
    """
    if f.values.ndim == 1:
        if float(q).is_integer() and int(q) % 2 == 0 and q >= 2:
            return exact_central_abs_moment(chain, f, n, int(q)) ** (1.0 / q)
        fc = center_observable(f, chain.pi)
        dist = exact_distribution(chain, fc, n)
        return abs_moment_from_distribution(dist, n, 0.0, q) ** (1.0 / q)
    if q == 2.0 and p == 2.0:
        total = 0.0
        for c in range(f.values.shape[1]):
            coord = observable(f.values[:, c])
            total += exact_central_abs_moment(chain, coord, n, 2)
        return math.sqrt(total)
    vdist = exact_vector_distribution(chain, f, n)
    mean = stationary_mean(f, chain.pi)
    return vector_abs_moment(vdist, n, mean, q, p) ** (1.0 / q)


def compare(
    bound_id: str,
    chain: StationaryChain,
    f: Observable,
    n: int,
    q: float,
    p: float | None = None,
    a: float | None = None,
    C: float = 1.0,
    c: float = 1.0,
    method: str = "exact",
    trials: int = 10_000,
    seed: int = 0,
) -> BoundReport:
    """Evaluate a bound's RHS and its exact or Monte Carlo LHS on a chain.

    ``bound_id`` is one of moment, gillman, subtwo, tail, vector.  The tail
    comparison uses the threshold a * ||f||_{L_q(pi)} and the exact law when
    the observable is a lattice one.
    """
    if method not in ("exact", "mc"):
        raise ParamOutOfRange(f"method must be 'exact' or 'mc', got {method!r}")
    lam = chain.lam
    norm_p = p if p is not None else 2.0
    fq = f_q_norm(f, chain.pi, q, norm_p)
    params = {"q": q, "p": p, "n": n, "lam": lam, "a": a, "C": C, "c": c, "f_q_norm": fq}

    if bound_id == "tail":
        if a is None:
            raise ParamOutOfRange("tail comparison needs the deviation parameter a")
        rhs = corollary_tail(a, q, lam, n, c)
        threshold = a * fq
        if method == "exact":
            fc = center_observable(f, chain.pi)
            dist = exact_distribution(chain, fc, n)
            lhs = tail_from_distribution(dist, n, 0.0, threshold)
            lhs_method = "exact"
        else:
            lhs = empirical_tail(chain, f, n, threshold, trials, seed).value
            lhs_method = "montecarlo"
    else:
        if bound_id == "moment":
            rhs = moment_bound(q, lam, n, fq, C)
        elif bound_id == "gillman":
            if f.values.ndim == 1:
                fmax = float(np.abs(f.values).max())
            else:
                fmax = float(np.abs(f.values).sum(axis=1).max()) if math.isinf(norm_p) else float(
                    ((np.abs(f.values) ** norm_p).sum(axis=1) ** (1.0 / norm_p)).max()
                )
            params["f_max"] = fmax
            rhs = gillman_bound(q, lam, n, fmax, C)
        elif bound_id == "subtwo":
            rhs = subtwo_bound(q, lam, n, fq, C)
        elif bound_id == "vector":
            if f.values.ndim != 2:
                raise ParamOutOfRange("vector comparison needs a vector observable")
            rhs = vector_moment_bound(q, norm_p, lam, n, fq, C)
        else:
            raise ParamOutOfRange(f"unknown bound id {bound_id!r}")
        if method == "exact":
            lhs = central_q_norm_exact(chain, f, n, q, norm_p)
            lhs_method = "exact"
        else:
            est = empirical_moment(chain, f, n, q, trials, seed, p=norm_p)
            lhs = est.value ** (1.0 / q)
            lhs_method = "montecarlo"

    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0.0 else math.inf)
    return BoundReport(
        bound_id=bound_id,
        params=params,
        rhs=float(rhs),
        lhs=float(lhs),
        lhs_method=lhs_method,
        ratio=float(ratio),
        valid=True,
    )


# ---------------------------------------------------------------------------
# sharpness families


def _two_state_or_iid(lam: float, eps: float) -> StationaryChain:
    # lam = 0 degenerates to independent draws; the constructor wants lam > 0
    if lam == 0.0:
        return iid_chain(np.array([eps, 1.0 - eps]))
    return two_state(lam, eps)


def sharpness_ratio(family: str, lam: float, q: float, n: int, eps: float | None = None) -> float:
    """LHS / RHS-kernel ratio (C = 1) on the two-state near-extremal family.

    family="theorem": eps = 1/2, f = (1, -1), requires n >= q / (1 - lam),
    against the sqrt(q / ((1 - lambda) n)) kernel.  family="subtwo": f =
    (1, 0) with a caller-supplied small eps, requires n >= 1 / (1 - lam),
    against the (1 / ((1 - lambda) n))^(1 - 1/q) kernel.  Both sides stay
    within universal constant multiples of each other on these families, so
    banded regressions of this ratio are meaningful.
    """
    _require_gap(lam)
    if family == "theorem":
        if q < 2:
            raise ParamOutOfRange(f"theorem family needs q >= 2, got {q}")
        if n < q / (1.0 - lam):
            raise PreconditionViolated(f"need n >= q / (1 - lam) = {q / (1.0 - lam):.3f}")
        chain = _two_state_or_iid(lam, 0.5)
        f = observable(np.array([1.0, -1.0]))
        lhs = central_q_norm_exact(chain, f, n, q)
        rhs = math.sqrt(q / ((1.0 - lam) * n)) * f_q_norm(f, chain.pi, q)
        return lhs / rhs
    if family == "subtwo":
        if not 1.0 <= q <= 2.0:
            raise ParamOutOfRange(f"subtwo family needs 1 <= q <= 2, got {q}")
        if eps is None:
            raise ParamOutOfRange("subtwo family needs an explicit eps")
        if n < 1.0 / (1.0 - lam):
            raise PreconditionViolated(f"need n >= 1 / (1 - lam) = {1.0 / (1.0 - lam):.3f}")
        chain = _two_state_or_iid(lam, eps)
        f = observable(np.array([1.0, 0.0]))
        lhs = central_q_norm_exact(chain, f, n, q)
        rhs = subtwo_bound(q, lam, n, f_q_norm(f, chain.pi, q))
        return lhs / rhs
    raise ParamOutOfRange(f"unknown sharpness family {family!r}")
