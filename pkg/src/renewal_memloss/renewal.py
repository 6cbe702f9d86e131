"""Renewal sequence ``u_n = P(X_n = 0 | X_0 = 0)`` of the model chain.

Two independent routes:

* :func:`compute_u_direct` runs the renewal recursion ``u_n = sum_k p_k u_{n-k}``
  in O(N^2) with compensated inner sums.  It is the trusted reference.
* :func:`compute_u_fast` reads ``u`` off as the coefficients of the power
  series ``1 / (1 - sum_k p_k x^k)`` by Newton iteration on FFT products,
  O(N log N).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

from ._numerics import renewal_recursion
from ._validation import check_index
from .errors import DomainError, RangeError, ResourceError
from .rv import K_of, m_of, rho

DIRECT_CEILING = 1 << 16
MEMORY_BUDGET = 2 << 30  # bytes
MONOTONE_TOL = 1e-12
NEGATIVE_TOL = 1e-12


@dataclass(frozen=True)
class RenewalSequence:
    """Immutable ``u_0 .. u_N`` with provenance."""

    u: np.ndarray = field(repr=False)
    n_max: int
    method: str
    model_digest: str

    def __post_init__(self):
        u = np.array(self.u, dtype=np.float64)
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        if u.shape != (self.n_max + 1,):
            raise DomainError("u must have n_max + 1 entries")

    def __len__(self):
        return self.u.size

    def __getitem__(self, idx):
        return self.u[idx]

    @cached_property
    def monotone(self):
        """``check_monotone(self)``, computed once."""
        return check_monotone(self)

    def to_csv(self, path_or_file):
        """Write ``n,u`` rows with 17 significant digits."""
        write_sequence_csv(path_or_file, self.u)


def write_sequence_csv(path_or_file, u):
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "u"])
        for n, val in enumerate(u):
            w.writerow([n, format_float(val)])
    finally:
        if own:
            fh.close()


def format_float(x):
    """Shortest repr that round-trips (at most 17 significant digits)."""
    return repr(float(x))


def compute_u_direct(model, n_max, ceiling=DIRECT_CEILING):
    n_max = check_index(n_max, "n_max")
    if n_max > ceiling:
        raise ResourceError(f"direct method limited to n_max <= {ceiling}, got {n_max}")
    p = np.ascontiguousarray(model.p_array(n_max))
    u = renewal_recursion(p, n_max)
    return RenewalSequence(u, n_max, "Direct", model.digest)


def _conv_trunc(a, b, lo, hi, workers):
    """Coefficients ``lo..hi-1`` of the product ``a * b`` via real FFTs."""
    size = 1 << max(1, (a.size + b.size - 2).bit_length())
    fa = scipy.fft.rfft(a, size, workers=workers)
    fb = scipy.fft.rfft(b, size, workers=workers)
    return scipy.fft.irfft(fa * fb, size, workers=workers)[lo:hi]


def series_reciprocal(f, n_terms, workers=None):
    """First ``n_terms`` coefficients of ``1 / f(x)`` for ``f[0] != 0`` (Newton iteration)."""
    if f[0] == 0:
        raise DomainError("constant term must be nonzero")
    f = np.asarray(f, dtype=np.float64)
    g = np.array([1.0 / f[0]])
    m = 1
    while m < n_terms:
        m2 = min(2 * m, n_terms)
        # g is exact mod x^m; the residual f*g - 1 starts at x^m
        fm = f[:m2]
        h = _conv_trunc(fm, g, m, m2, workers)
        corr = _conv_trunc(g, h, 0, m2 - m, workers)
        g = np.concatenate([g, -corr])
        m = m2
    return g[:n_terms]


def compute_u_fast(model, n_max, memory_budget=MEMORY_BUDGET, workers=None):
    n_max = check_index(n_max, "n_max")
    n_terms = n_max + 1
    fft_len = 1 << max(1, (3 * n_terms).bit_length())
    # a handful of complex and real work arrays of fft_len each
    need = 8 * fft_len * 6
    if need > memory_budget:
        raise ResourceError(f"fast method needs ~{need} bytes > budget {memory_budget}")
    if workers is None:
        workers = _default_workers()
    f = -model.p_array(n_max)
    f[0] = 1.0
    u = series_reciprocal(f, n_terms, workers=workers)
    return RenewalSequence(u, n_max, "SeriesInversion", model.digest)


def _default_workers():
    env = os.environ.get("RENEWAL_MEMLOSS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def compute_u(model, n_max, method="fast", **kwargs):
    """Dispatch on ``method``; ``"auto"`` uses the direct recursion up to ``2^13``."""
    if method == "auto":
        method = "direct" if n_max <= 1 << 13 else "fast"
    if method in ("fast", "SeriesInversion"):
        return compute_u_fast(model, n_max, **kwargs)
    if method in ("direct", "Direct"):
        return compute_u_direct(model, n_max, **kwargs)
    raise DomainError(f"unknown method {method!r}")


def check_monotone(seq: RenewalSequence, tol=MONOTONE_TOL):
    """``(ok, first_violation)``: ok iff ``u_n >= u_{n+1} - tol`` for all ``n < N``."""
    u = seq.u
    viol = np.flatnonzero(u[:-1] < u[1:] - tol)
    if viol.size:
        return False, int(viol[0])
    return True, None


def renewal_residual(seq: RenewalSequence, model, indices):
    """Max over ``indices`` of ``|u_n - sum_{k=1}^n p_k u_{n-k}|`` (exactly rounded sums)."""
    p = model.p_array(seq.n_max)
    worst = 0.0
    for n in indices:
        n = int(n)
        if n < 1:
            continue
        if n > seq.n_max:
            raise RangeError(f"index {n} beyond n_max={seq.n_max}")
        s = math.fsum(p[1 : n + 1] * seq.u[n - 1 :: -1][:n])
        worst = max(worst, abs(seq.u[n] - s))
    return worst


def validate(seq: RenewalSequence, model, n_checks=100, seed=0):
    """Sanity report: bounds, negatives (not clamped), renewal-identity spot check."""
    u = seq.u
    rng = np.random.default_rng(seed)
    idx = rng.integers(1, seq.n_max + 1, size=min(n_checks, seq.n_max)) if seq.n_max else []
    return {
        "u0": float(u[0]),
        "min": float(u.min()),
        "max": float(u.max()),
        "negatives_below_tol": int(np.count_nonzero(u < -NEGATIVE_TOL)),
        "renewal_residual": renewal_residual(seq, model, idx),
    }


@dataclass(frozen=True)
class DiagnosticRow:
    n: int
    u: float
    quantity: str
    value: float
    target: float | None


def asymptotic_diagnostic(seq: RenewalSequence, f, model, grid):
    """Normalised renewal probabilities along ``grid``.

    The normalisation follows the tail regime of ``f`` (index ``-alpha``):

    ========================  ==========================  ==================
    regime                    quantity                    limit
    ========================  ==========================  ==================
    ``1/2 < alpha < 1``       ``n * rho(n) * u_n``        ``sin(pi a) / pi``
    ``alpha == 1``            ``m(n) * u_n``              ``1``
    ``alpha == 1/2``          ``u_n / (rho(n) K(n))``     bounded
    ``alpha < 1/2``           ``u_n / rho(n)``            bounded
    otherwise / ``f=None``    ``u_n``                     --
    ========================  ==========================  ==================
    """
    rows = []
    for n in grid:
        n = check_index(n, "grid n", minimum=1)
        if n > seq.n_max:
            raise RangeError(f"grid point {n} beyond n_max={seq.n_max}")
        un = float(seq.u[n])
        alpha = None if f is None else f.alpha
        if alpha is None or alpha > 1 or alpha == 0:
            rows.append(DiagnosticRow(n, un, "u", un, None))
        elif alpha == 1:
            rows.append(DiagnosticRow(n, un, "m*u", m_of(model, n) * un, 1.0))
        elif alpha > 0.5:
            target = math.sin(math.pi * alpha) / math.pi
            rows.append(DiagnosticRow(n, un, "n*rho*u", n * float(rho(f, n)) * un, target))
        elif alpha == 0.5:
            rows.append(DiagnosticRow(n, un, "u/(rho*K)", un / (float(rho(f, n)) * K_of(f, n)), None))
        else:
            rows.append(DiagnosticRow(n, un, "u/rho", un / float(rho(f, n)), None))
    return rows
