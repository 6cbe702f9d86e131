"""Exact memory-loss curves and rate-bound verification for renewal-type Markov chains."""

from .coupling import CouplingConfig, CouplingEstimate, estimate, find_A, simulate_T
from .errors import (
    ConfigError,
    DivergentNormWarning,
    DomainError,
    MinorizationError,
    NotFoundError,
    PreconditionError,
    RangeError,
    RenewalMemlossError,
    ResourceError,
    TruncationWarning,
)
from .estimators import MemoryLossCurve, OrnsteinCoupling, RenewalSolver
from .harris import (
    HarrisModel,
    ReturnTimeDist,
    cor_har_bound,
    g_norm,
    gen1_check,
    mixing_bound,
    return_time_dist,
    split,
)
from .memoryloss import (
    BoundReport,
    TVPoint,
    bound_best,
    bound_general,
    bound_orn,
    check_p_reg,
    run_suite,
    tv_bruteforce,
    tv_dfr,
    tv_exact,
    tv_lower,
)
from .renewal import RenewalSequence, compute_u, compute_u_direct, compute_u_fast, check_monotone
from .rv import Const, InvLog, LogPow, RegVarFn, K_of, M_of, karamata_ratio, m_of, rho
from .tails import (
    ExplicitP,
    FromQ,
    Geometric,
    PowerLawTail,
    RegVarTail,
    TailModel,
    check_aperiodic,
    check_dfr,
    check_normalized,
    hazard,
    p_of,
    z_of,
)

__version__ = "0.1.0"
