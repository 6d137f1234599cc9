"""Concentration analysis for additive functionals of finite stationary Markov chains.

Exact moment, distribution, and tail oracles for S_n = f(W_1) + ... + f(W_n);
spectral-gap computation with certified weighted operator-norm brackets;
numerical verification of the moment-expansion machinery; gap-based bound
evaluation with exact or Monte Carlo comparisons; and seeded simulation.
"""

from .bounds import (
    BoundReport,
    compare,
    corollary_tail,
    f_q_norm,
    gillman_bound,
    moment_bound,
    sharpness_ratio,
    subtwo_bound,
    tail_domain_edge,
    vector_moment_bound,
)
from .chain_core import (
    Observable,
    StationaryChain,
    center_observable,
    cycle,
    detect_lattice,
    iid_chain,
    is_reversible,
    lazy,
    load_chain_spec,
    make_chain,
    observable,
    random_reversible,
    random_stochastic,
    stationary_mean,
    stationary_of,
    two_state,
    validate_chain,
)
from .exact_moments import (
    EnumerationResult,
    LatticeDistribution,
    MomentTable,
    VectorLatticeDistribution,
    abs_moment_from_distribution,
    enumeration_oracle,
    exact_central_abs_moment,
    exact_distribution,
    exact_raw_moments,
    exact_vector_distribution,
    raw_moment_from_distribution,
    tail_from_distribution,
    vector_abs_moment,
)
from .montecarlo import EmpiricalEstimate, empirical_moment, empirical_tail, sample_trajectory
from .proof_lab import (
    HolderTerm,
    LemmaReport,
    RunPattern,
    admissible_patterns,
    alternate_exponents,
    expansion_rhs,
    expansion_sum,
    holder_exponents,
    pattern_product_stats,
    verify_lemma,
)
from .spectral import NormBracket, e_pi, interpolated_gap_bound, lambda_pi, lp_norm_bracket, lp_vector_norm

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
