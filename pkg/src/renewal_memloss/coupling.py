"""Monte-Carlo Ornstein coupling of ``delta_0`` and ``P^l delta_0`` on the model chain.

Chain ``X`` starts at 0; ``a_0`` is its first visit to 0 at or after time
``l`` and ``a_1, a_2, ...`` the later visits.  The copy ``Y`` (started from
``X_l``) has visits ``b_k`` with ``b_0 = a_0 - l``; its increments copy those of
``X`` except when ``Delta a_k`` lands in ``{A, A+1}`` while the two renewal
clocks still differ, in which case an independent draw from ``{A, A+1}`` (with
the conditional law of ``p``) is used instead.  The gap ``d_k = a_k - b_k``
then performs a lazy symmetric walk started at ``l``; the coupling time ``T``
is ``a_k`` at the first ``k`` with ``d_k = 0``, and
``||P^n delta_0 - P^{n+l} delta_0||_TV <= 2 P(T > n)``.

Randomness comes from Philox streams keyed by ``(seed, block)`` where blocks
hold a fixed number of consecutive trials, so results do not depend on how
blocks are scheduled.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_index
from .errors import DomainError, NotFoundError
from .renewal import format_float

BLOCK_TRIALS = 1 << 14
CENSORED = -1


def find_A(model, cutoff=1 << 12):
    """Smallest ``A <= cutoff - 1`` with ``p_A > 0`` and ``p_{A+1} > 0``."""
    cutoff = check_index(cutoff, "cutoff", minimum=2)
    p = model.p_array(cutoff)
    both = np.flatnonzero((p[1:-1] > 0) & (p[2:] > 0))
    if both.size == 0:
        raise NotFoundError(f"no consecutive support pair p_A, p_(A+1) > 0 with A < {cutoff}")
    return int(both[0]) + 1


def stream(seed, block):
    """Counter-based generator for one block of trials."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(block)]))


class ReturnTimeSampler:
    """Exact inverse-CDF sampling of the return time, capped at ``cap + 1``.

    Closed-form families invert ``z`` directly; others search a table of
    ``z_0 .. z_cap``.  Draws larger than ``cap`` come back as ``cap + 1``, which
    only matters to callers that censor at ``cap``.
    """

    def __init__(self, model, cap):
        self.model = model
        self.cap = int(cap)
        self._closed = hasattr(model, "tail_quantile")
        if not self._closed:
            self._neg_z = -model.z_array(self.cap)

    def draw(self, u):
        """Map uniforms ``u`` in ``(0, 1]`` to return times."""
        if self._closed:
            out = self.model.tail_quantile(u)
            return np.minimum(out, self.cap + 1)
        # smallest n with z_n <= u
        idx = np.searchsorted(self._neg_z, -u, side="left")
        return np.maximum(idx, 1).astype(np.int64)


def _uniform(rng, size):
    return 1.0 - rng.random(size)  # (0, 1]


def coupled_increments(sampler, A, w, rng, size):
    """One step of both renewal clocks while they are apart.

    Returns ``(delta_a, delta_b, eligible)``; ``w = p_{A+1} / (p_A + p_{A+1})``.
    """
    da = sampler.draw(_uniform(rng, size))
    s = A + (rng.random(size) < w).astype(np.int64)
    eligible = (da == A) | (da == A + 1)
    db = np.where(eligible, s, da)
    return da, db, eligible


@dataclass
class BlockResult:
    T: np.ndarray
    sigma_steps: np.ndarray
    plus: int = 0
    minus: int = 0
    eligible: int = 0


def _simulate_block(model, ell, A, rng, size, horizon, sampler=None):
    if sampler is None:
        sampler = ReturnTimeSampler(model, horizon)
    p = model.p_array(A + 1)
    w = p[A + 1] / (p[A] + p[A + 1])

    a = np.zeros(size, dtype=np.int64)
    todo = np.flatnonzero(a < ell)
    while todo.size:
        a[todo] += sampler.draw(_uniform(rng, todo.size))
        todo = todo[a[todo] < ell]
    T = np.full(size, CENSORED, dtype=np.int64)
    sigma = np.zeros(size, dtype=np.int64)
    if ell == 0:
        T[:] = a
        return BlockResult(T, sigma)

    res = BlockResult(T, sigma)
    T[a > horizon] = CENSORED
    alive = np.flatnonzero(a <= horizon)
    aa = a[alive]
    dd = np.full(alive.size, ell, dtype=np.int64)
    ss = np.zeros(alive.size, dtype=np.int64)
    while alive.size:
        da, db, elig = coupled_increments(sampler, A, w, rng, alive.size)
        step = da - db
        res.plus += int(np.count_nonzero(step == 1))
        res.minus += int(np.count_nonzero(step == -1))
        res.eligible += int(np.count_nonzero(elig))
        aa = aa + da
        dd = dd + step
        ss = ss + elig
        met = dd == 0
        over = aa > horizon
        done = met | over
        if done.any():
            idx = alive[done]
            T[idx] = np.where(met[done] & ~over[done], aa[done], CENSORED)
            sigma[idx] = ss[done]
            keep = ~done
            alive, aa, dd, ss = alive[keep], aa[keep], dd[keep], ss[keep]
    return res


def simulate_T(model, ell, A, rng, horizon):
    """One coupling run.  Returns ``(T, sigma_steps)`` with ``T = None`` when censored."""
    ell = check_index(ell, "ell")
    res = _simulate_block(model, ell, A, rng, 1, horizon)
    t = int(res.T[0])
    return (None if t == CENSORED else t), int(res.sigma_steps[0])


@dataclass
class CouplingConfig:
    model: object
    ell: int
    n_grid: list
    trials: int
    seed: int = 0
    A: int | None = None
    horizon: int | None = None
    threads: int = 1

    def __post_init__(self):
        self.ell = check_index(self.ell, "ell", minimum=1)
        self.n_grid = sorted(check_index(n, "n_grid") for n in self.n_grid)
        if not self.n_grid:
            raise DomainError("n_grid is empty")
        self.trials = check_index(self.trials, "trials")
        if self.horizon is None:
            self.horizon = 64 * max(self.n_grid)
        self.horizon = check_index(self.horizon, "horizon", minimum=max(self.n_grid))


@dataclass
class CouplingEstimate:
    n_grid: np.ndarray
    p_hat: np.ndarray
    stderr: np.ndarray
    bound: np.ndarray
    censored: float
    trials: int
    A: int
    T: np.ndarray = field(repr=False)
    walk_plus: int = 0
    walk_minus: int = 0
    walk_eligible: int = 0

    def to_csv(self, path_or_file):
        own = isinstance(path_or_file, (str, os.PathLike))
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "p_hat", "stderr", "bound", "censored_frac"])
            for n, ph, se, b in zip(self.n_grid, self.p_hat, self.stderr, self.bound):
                w.writerow([int(n)] + [format_float(v) for v in (ph, se, b, self.censored)])
        finally:
            if own:
                fh.close()


def estimate(config: CouplingConfig) -> CouplingEstimate:
    """Estimate ``P(T > n)`` on ``config.n_grid`` from ``config.trials`` coupling runs."""
    if config.trials < 100:
        raise DomainError(f"need at least 100 trials, got {config.trials}")
    model = config.model
    A = config.A if config.A is not None else find_A(model)
    p = model.p_array(A + 1)
    if not (p[A] > 0 and p[A + 1] > 0):
        raise NotFoundError(f"p_A and p_(A+1) must be positive for A={A}")
    sampler = ReturnTimeSampler(model, config.horizon)
    n_blocks = -(-config.trials // BLOCK_TRIALS)

    def run(b):
        size = min(BLOCK_TRIALS, config.trials - b * BLOCK_TRIALS)
        return _simulate_block(model, config.ell, A, stream(config.seed, b), size, config.horizon, sampler)

    if config.threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as ex:
            blocks = list(ex.map(run, range(n_blocks)))
    else:
        blocks = [run(b) for b in range(n_blocks)]

    T = np.concatenate([blk.T for blk in blocks])
    cens = T == CENSORED
    grid = np.asarray(config.n_grid, dtype=np.int64)
    exceed = np.array([np.count_nonzero(cens | (T > n)) for n in grid])
    p_hat = exceed / config.trials
    stderr = np.sqrt(p_hat * (1.0 - p_hat) / config.trials)
    return CouplingEstimate(
        n_grid=grid,
        p_hat=p_hat,
        stderr=stderr,
        bound=2.0 * p_hat,
        censored=float(np.count_nonzero(cens)) / config.trials,
        trials=config.trials,
        A=A,
        T=T,
        walk_plus=sum(b.plus for b in blocks),
        walk_minus=sum(b.minus for b in blocks),
        walk_eligible=sum(b.eligible for b in blocks),
    )
