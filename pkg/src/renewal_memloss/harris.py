"""Harris-chain reduction on countable state spaces (finite truncations).

A :class:`HarrisModel` carries a sub-stochastic kernel on states ``0..K-1``
(mass leaving the truncation is tracked as *leak*, never reflected), a small
set ``S``, and a minorization ``kernel(x, .) >= epsilon * beta`` on ``S``.

:func:`split` builds the split chain on ``states x {0, 1}`` (state ``(x, t)``
is stored at index ``x + t*K``) in which ``S x {1}`` is a genuine atom.  The
return time ``tau = inf{k >= 1 : X_{k-1} in atom}`` is then extracted exactly
by dynamic programming over the not-yet-returned mass.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._numerics import renewal_recursion
from ._validation import check_index, check_real
from .errors import (
    DivergentNormWarning,
    DomainError,
    MinorizationError,
    PreconditionError,
    RangeError,
    TruncationWarning,
)
from .tails import Geometric, PowerLawTail, TailModel

MINORIZATION_TOL = 1e-15
LEAK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class HarrisModel:
    """Kernel with small set and minorizing measure.

    Attributes
    ----------
    kernel : scipy.sparse.csr_matrix
        ``kernel[x, y] = P(x -> y)``; row sums below 1 are leak out of the truncation.
    small_set : ndarray of bool
    epsilon : float
    beta : ndarray
        Minorizing probability vector (total ``<= 1``; any deficit is escaping mass).
    base_size : int or None
        Set on split chains: number of states of the original chain.
    """

    kernel: sp.csr_matrix
    small_set: np.ndarray
    epsilon: float
    beta: np.ndarray
    name: str = ""
    base_size: int | None = None
    _kt: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        K = sp.csr_matrix(self.kernel, dtype=np.float64)
        n = K.shape[0]
        if K.shape != (n, n):
            raise DomainError("kernel must be square")
        if K.nnz and K.data.min() < 0:
            raise DomainError("kernel has negative entries")
        rows = np.asarray(K.sum(axis=1)).ravel()
        if np.any(rows > 1 + 1e-12):
            raise DomainError("kernel rows sum above 1")
        S = np.asarray(self.small_set, dtype=bool)
        if S.shape != (n,) or not S.any():
            raise DomainError("small_set must be a non-empty mask over the states")
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.shape != (n,) or np.any(beta < 0) or beta.sum() > 1 + 1e-12:
            raise DomainError("beta must be a sub-probability vector over the states")
        eps = check_real(self.epsilon, "epsilon", low=0.0, high=1.0, low_open=True)
        object.__setattr__(self, "kernel", K)
        object.__setattr__(self, "small_set", S)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "_kt", K.T.tocsr())

    @property
    def n_states(self):
        return self.kernel.shape[0]

    def step(self, v):
        """One step of the chain applied to a (signed) measure ``v``."""
        return self._kt @ v

    def evolve(self, v, n):
        v = np.asarray(v, dtype=np.float64)
        for _ in range(n):
            v = self._kt @ v
        return v

    def check_minorization(self):
        """Raise :class:`MinorizationError` at the first ``(x, y)`` that breaks it."""
        floor = self.epsilon * self.beta
        for x in np.flatnonzero(self.small_set):
            row = self.kernel.getrow(x).toarray().ravel()
            bad = np.flatnonzero(row < floor - MINORIZATION_TOL)
            if bad.size:
                y = int(bad[0])
                raise MinorizationError(int(x), y, float(row[y]), float(floor[y]))

    @property
    def is_split(self):
        return self.base_size is not None


def split(model: HarrisModel) -> HarrisModel:
    """Nummelin splitting: an ``epsilon = 1`` chain on ``states x {0, 1}`` with atom ``S x {1}``."""
    model.check_minorization()
    n = model.n_states
    eps = model.epsilon
    S = model.small_set
    H = model.kernel.toarray()
    beta = model.beta
    H0 = H.copy()
    if eps < 1:
        H0[S] = (H[S] - eps * beta) / (1.0 - eps)
        H0[S] = np.where(np.abs(H0[S]) < 1e-300, 0.0, H0[S])
        np.maximum(H0, 0.0, out=H0)
    else:
        # (x, 0) with x in S is never occupied when epsilon = 1
        H0[S] = beta
    in_s = S.astype(np.float64)
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = H0 * (1.0 - eps * in_s)  # (x,0) -> (y,0)
    big[:n, n:] = H0 * (eps * in_s)  # (x,0) -> (y,1)
    beta_hat = np.concatenate([beta * (1.0 - eps * in_s), beta * eps * in_s])
    big[n:, :] = beta_hat
    atom = np.concatenate([np.zeros(n, dtype=bool), S])
    return HarrisModel(sp.csr_matrix(big), atom, 1.0, beta_hat, model.name + "/split", base_size=n)


def lift(model: HarrisModel, mu):
    """Initial law of the split chain for ``X_0 ~ mu``."""
    mu = np.asarray(mu, dtype=np.float64)
    eps = model.epsilon
    in_s = model.small_set.astype(np.float64)
    return np.concatenate([mu * (1.0 - eps * in_s), mu * eps * in_s])


def project(split_model: HarrisModel, mu_hat):
    """First-coordinate marginal of a split-chain measure."""
    n = split_model.base_size
    return mu_hat[:n] + mu_hat[n:]


def _atomic(model):
    if model.epsilon < 1:
        return split(model), True
    return model, False


@dataclass
class ReturnTimeDist:
    """``p[k] = P(tau = k)`` for ``k = 0..n_max`` (``p[0] = 0``) and the unresolved mass."""

    p: np.ndarray
    tail_mass: float
    leak: float = 0.0
    alive: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_max(self):
        return self.p.size - 1

    def as_tail_model(self):
        return ExtractedTail(self)


class ExtractedTail(TailModel):
    """Tail model of a return-time law known up to ``n_max``.

    ``z_n = P(tau > n)`` includes the unresolved mass, so ``u`` and TV values
    built on it are exact up to ``n_max``.
    """

    def __init__(self, rtd: ReturnTimeDist):
        self._p = rtd.p.copy()
        tail = np.concatenate([np.cumsum(self._p[::-1])[::-1][1:], [0.0]])
        self._zs = tail + rtd.tail_mass
        self._zs[0] = 1.0 if abs(self._zs[0] - 1.0) < 1e-9 else self._zs[0]

    def _params(self):
        return (("p", tuple(self._p)), ("tail", float(self._zs[-1])))

    def _need(self, n_max):
        if n_max > self._p.size - 1:
            raise RangeError(f"return-time law only known up to n={self._p.size - 1}")

    def p_array(self, n_max):
        self._need(n_max)
        return self._p[: n_max + 1].copy()

    def z_array(self, n_max):
        self._need(n_max)
        return self._zs[: n_max + 1].copy()


def _return_dp(model: HarrisModel, start, n_max, keep_alive=False):
    """Absorbed mass per step and the surviving sub-measure.

    ``p[k]`` is the mass of ``tau = k``; ``alive[m]`` (if kept) is the measure
    of ``X_m`` on ``{tau > m}``.  Per-step totals use pairwise summation, whose
    O(log n) error growth stays far inside the conservation tolerance.
    """
    S = model.small_set
    v = np.asarray(start, dtype=np.float64).copy()
    total0 = float(np.sum(np.abs(v)))
    p = np.zeros(n_max + 1)
    alive = [v.copy()] if keep_alive else None
    leak = 0.0
    worst = 0.0
    absorbed = 0.0
    for k in range(1, n_max + 1):
        p[k] = np.sum(v[S])
        absorbed += p[k]
        off = np.where(S, 0.0, v)
        before = np.sum(off)
        v = model.step(off)
        after = np.sum(v)
        leak += before - after
        if keep_alive:
            alive.append(v.copy())
        worst = max(worst, abs(absorbed + after + leak - total0))
    return p, v, leak, alive, worst


def return_time_dist(model: HarrisModel, n_max, start=None, tail_threshold=1.0):
    """Exact law of ``tau`` from ``X_0 ~ start`` (default ``beta``) up to ``n_max``.

    Chains with ``epsilon < 1`` are split first; ``start`` is then given on the
    original states and lifted.
    """
    n_max = check_index(n_max, "n_max", minimum=1)
    atomic, was_split = _atomic(model)
    if start is None:
        start = atomic.beta
    elif was_split:
        start = lift(model, start)
    p, v, leak, _, _ = _return_dp(atomic, start, n_max)
    tail = math.fsum(v) + leak
    if leak > LEAK_TOL:
        warnings.warn(f"{leak:.3e} of the mass left the truncation", TruncationWarning, stacklevel=2)
    if tail > tail_threshold:
        warnings.warn(f"P(tau > {n_max}) = {tail:.3e} exceeds threshold", TruncationWarning, stacklevel=2)
    return ReturnTimeDist(p, tail, leak)


def dp_conservation(model: HarrisModel, n_max, start=None):
    """Largest ``|absorbed + alive + leak - 1|`` over the DP steps."""
    atomic, was_split = _atomic(model)
    if start is None:
        start = atomic.beta
    elif was_split:
        start = lift(model, start)
    return _return_dp(atomic, start, n_max)[4]


def _pushforward_weights(w, u, n):
    """``c_m = sum_{k=m}^{n-1} w_k u_{k-m}`` for ``m = 0..n-1``."""
    c = np.zeros(n)
    for m in range(n):
        c[m] = math.fsum(w[m:n] * u[: n - m])
    return c


def gen1_check(model: HarrisModel, mu, n):
    """Both sides of the first-entrance/last-exit decomposition of ``Q^n mu``.

    ``model`` must have an atom (``epsilon = 1``; split first otherwise) and
    ``mu`` lives on its states.  Returns the largest statewise gap.
    """
    if model.epsilon < 1:
        raise PreconditionError("gen1_check needs an atom; call split() first")
    n = check_index(n, "n", minimum=1)
    mu = np.asarray(mu, dtype=np.float64)
    lhs = model.evolve(mu, n)

    p_beta, _, _, gamma, _ = _return_dp(model, model.beta, n, keep_alive=True)
    u = renewal_recursion(np.ascontiguousarray(p_beta), n)
    p_mu, alive_n, _, _, _ = _return_dp(model, mu, n)
    # k = n - t runs over 0..n-1 with weight P_mu(tau = n - k)
    w = np.array([p_mu[n - k] for k in range(n)])
    c = _pushforward_weights(w, u, n)
    rhs = alive_n.copy()
    for m in range(n):
        if c[m]:
            rhs = rhs + c[m] * gamma[m]
    return float(np.max(np.abs(lhs - rhs)))


def split_marginal_gap(model: HarrisModel, mu, n):
    """``max |project(lift(mu) Hhat^n) - mu H^n|`` over states."""
    sm = split(model)
    direct = model.evolve(mu, n)
    via_split = project(sm, sm.evolve(lift(model, mu), n))
    return float(np.max(np.abs(direct - via_split)))


def direct_tv(model: HarrisModel, mu, mu_prime, n):
    return math.fsum(np.abs(model.evolve(np.asarray(mu) - np.asarray(mu_prime), n)))


def _abs_difference_tau(model, mu, mu_prime, n_max):
    """``|mu - mu'|(tau = t)`` for ``t <= n_max`` and ``|mu - mu'|(tau > n_max)``."""
    diff = np.abs(np.asarray(mu, dtype=np.float64) - np.asarray(mu_prime, dtype=np.float64))
    if not diff.any():
        raise DomainError("mu and mu' coincide; the normalised difference is undefined")
    # the tail mass is a term of the bound here, not a truncation defect
    rtd = return_time_dist(model, n_max, start=diff, tail_threshold=math.inf)
    return rtd.p, rtd.tail_mass


def cor_har_bound(model: HarrisModel, mu, mu_prime, b_table, n):
    """``sum_t |mu-mu'|(tau=t) b_{t-1}(n-t) + 2 |mu-mu'|(tau > n)``.

    ``b_table(ell, m)`` must return ``||P^m (delta_0 - P^ell delta_0)||_TV`` for the
    model chain driven by the return-time law of ``model``.
    """
    n = check_index(n, "n", minimum=1)
    p, tail = _abs_difference_tau(model, mu, mu_prime, n)
    terms = [p[t] * b_table(t - 1, n - t) for t in range(1, n + 1) if p[t]]
    return math.fsum(terms) + 2.0 * tail


def make_b_table(model: HarrisModel, n_max):
    """``b_ell(m)`` from the exact return-time law of ``model`` (``ell + m <= n_max``)."""
    from .memoryloss import tv_exact
    from .renewal import RenewalSequence

    rtd = return_time_dist(model, n_max)
    tm = rtd.as_tail_model()
    u = renewal_recursion(np.ascontiguousarray(rtd.p), n_max)
    seq = RenewalSequence(u, n_max, "Direct", tm.digest)

    def b(ell, m):
        return tv_exact(seq, tm, m, ell).tv

    return b


@dataclass(frozen=True)
class GNorm:
    value: float
    infinite: bool
    mass: float
    partial_sums: np.ndarray = field(repr=False)


def g_norm(model: HarrisModel, mu, mu_prime, g, n_max, cauchy_ratio=0.95):
    """``|mu - mu'|(Omega) * E_lambda g(tau)`` from the exact law of ``tau`` up to ``n_max``.

    The series is flagged infinite (with a :class:`DivergentNormWarning`) when
    its increments over successive doublings of the horizon stop shrinking,
    i.e. ``(S_N - S_{N/2}) / (S_{N/2} - S_{N/4}) >= cauchy_ratio``, unless the
    last increment is already at rounding level.
    """
    n_max = check_index(n_max, "n_max", minimum=8)
    p, tail = _abs_difference_tau(model, mu, mu_prime, n_max)
    ell = np.arange(n_max + 1, dtype=np.float64)
    terms = np.zeros(n_max + 1)
    terms[1:] = np.asarray(g(ell[1:]), dtype=np.float64) * p[1:]
    partial = np.cumsum(terms)
    N = n_max
    d1 = partial[N] - partial[N // 2]
    d2 = partial[N // 2] - partial[N // 4]
    settled = d1 <= 1e-12 * max(partial[N], 1e-300)
    infinite = bool(not settled and d2 > 0 and d1 / d2 >= cauchy_ratio)
    if infinite:
        warnings.warn(
            f"g-weighted return-time moment does not settle (ratio {d1 / d2:.3f})",
            DivergentNormWarning,
            stacklevel=2,
        )
    mass = math.fsum(np.abs(np.asarray(mu) - np.asarray(mu_prime)))
    return GNorm(float(partial[N]), infinite, mass, partial)


@dataclass(frozen=True)
class MixingBound:
    value: float
    direct_tv: float
    ratio: float


def mixing_bound(model: HarrisModel, mu, mu_prime, rho_fn, g, n, n_max=None):
    """``(rho(n) + 1/g(n)) * ||mu - mu'||_g`` with the empirical constant against direct TV."""
    n = check_index(n, "n", minimum=1)
    n_max = n_max or max(4096, 4 * n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergentNormWarning)
        gn = g_norm(model, mu, mu_prime, g, n_max)
    if gn.infinite:
        raise DomainError("||mu - mu'||_g appears infinite; the bound is vacuous")
    value = (float(rho_fn(n)) + 1.0 / float(g(n))) * gn.value
    d = direct_tv(model, mu, mu_prime, n)
    return MixingBound(value, d, d / value if value > 0 else math.inf)


# -- shipped examples -------------------------------------------------------


def model_chain_example(tail: TailModel, n_states):
    """The renewal model chain itself, truncated to ``0..n_states-1``; ``S = {0}`` is an atom."""
    n_states = check_index(n_states, "n_states", minimum=2)
    q = tail.hazard_array(n_states - 1)
    q = np.where(np.isfinite(q), q, 1.0)
    rows = np.concatenate([np.arange(n_states), np.arange(n_states - 1)])
    cols = np.concatenate([np.zeros(n_states, dtype=int), np.arange(1, n_states)])
    vals = np.concatenate([q, 1.0 - q[:-1]])
    K = sp.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))
    S = np.zeros(n_states, dtype=bool)
    S[0] = True
    beta = K.getrow(0).toarray().ravel()
    return HarrisModel(K, S, 1.0, beta, name=f"model-chain[{tail!r}]")


def lazy_walk_example(K=20):
    """Lazy reflecting walk on ``0..K``; ``S = {0}``, ``epsilon = 1/2``, ``beta`` uniform on ``{0, 1}``."""
    K = check_index(K, "K", minimum=1)
    n = K + 1
    H = np.zeros((n, n))
    for x in range(n):
        H[x, x] += 0.5
        H[x, min(x + 1, K)] += 0.25
        H[x, max(x - 1, 0)] += 0.25
    S = np.zeros(n, dtype=bool)
    S[0] = True
    beta = np.zeros(n)
    beta[:2] = 0.5
    return HarrisModel(sp.csr_matrix(H), S, 0.5, beta, name=f"lazy-walk[{K}]")


def geometric_return_example(q=0.5, n_states=200):
    """Every state returns to 0 with probability ``q``, else steps right."""
    m = model_chain_example(Geometric(q), n_states)
    return HarrisModel(m.kernel, m.small_set, 1.0, m.beta, name=f"geometric-return[{q}]")


EXAMPLES = {
    "model-chain": lambda: model_chain_example(PowerLawTail(0.75), 1200),
    "lazy-walk": lazy_walk_example,
    "geometric-return": geometric_return_example,
}


def load_edge_list(path, small_set, epsilon=None, beta=None, name=None):
    """Finite chain from a ``from,to,prob`` CSV.

    Without ``epsilon``/``beta`` the canonical minorization on ``S`` is used:
    ``beta`` proportional to the row-wise minimum over ``S``, ``epsilon`` its mass.
    """
    edges = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, 1):
            if not row or row[0].strip().startswith("#"):
                continue
            if lineno == 1 and row[0].strip() == "from":
                continue
            try:
                a, b, pr = int(row[0]), int(row[1]), float(row[2])
            except (ValueError, IndexError):
                from .errors import ConfigError

                raise ConfigError(f"bad edge {row!r}", line=lineno) from None
            edges.append((a, b, pr))
    if not edges:
        raise DomainError("edge list is empty")
    n = max(max(a, b) for a, b, _ in edges) + 1
    rows, cols, vals = zip(*edges)
    K = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    S = np.zeros(n, dtype=bool)
    S[list(small_set)] = True
    if beta is None:
        floor = K[S].toarray().min(axis=0)
        mass = floor.sum()
        if mass <= 0:
            raise DomainError("rows of S share no common mass; give epsilon and beta explicitly")
        beta = floor / mass
        epsilon = min(1.0, mass) if epsilon is None else epsilon
    elif epsilon is None:
        raise DomainError("epsilon is required when beta is given")
    return HarrisModel(K, S, epsilon, np.asarray(beta, dtype=np.float64), name=name or str(path))
