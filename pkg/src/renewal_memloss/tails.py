"""Return-time distributions ``p_n`` and tails ``z_n`` of the renewal model chain.

The model chain lives on ``{0, 1, 2, ...}``: from state ``m`` it jumps to 0
with probability ``q_m`` and to ``m + 1`` otherwise.  A :class:`TailModel`
fixes the law of the return time to 0, described either by ``p_n`` (mass at
``n``) or ``z_n = p_{n+1} + p_{n+2} + ...``.

Every model exposes vectorised ``p_array(N)`` / ``z_array(N)`` returning
indices ``0..N`` (with ``p_0 = 0`` and ``z_0 = 1``).
"""

from __future__ import annotations

import hashlib
import math
from functools import reduce

import numpy as np

from ._numerics import kahan_tailsum
from ._validation import check_index, check_prob_vector, check_real
from .errors import DomainError
from .rv import Const, InvLog, LogPow, RegVarFn, rho

TOL_DFR = 1e-14
#: quantiles beyond this are clipped so they fit in int64
QUANTILE_CAP = float(1 << 62)


class TailModel:
    """Base class.  Subclasses are immutable after construction."""

    #: largest ``n`` with ``p_n > 0`` for finite-support models
    cutoff = None

    def _params(self):
        raise NotImplementedError

    @property
    def digest(self):
        text = repr((type(self).__name__, self._params()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self._params())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.digest == other.digest

    def __hash__(self):
        return hash(self.digest)

    def p_array(self, n_max):
        """``p_0 .. p_{n_max}`` (``p_0 = 0``)."""
        raise NotImplementedError

    def z_array(self, n_max):
        """``z_0 .. z_{n_max}`` (``z_0 = 1``)."""
        raise NotImplementedError

    def hazard_array(self, n_max):
        """``q_0 .. q_{n_max}`` where ``q_m = p_{m+1} / z_m``; ``nan`` where ``z_m = 0``."""
        p = self.p_array(n_max + 1)
        z = self.z_array(n_max)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(z > 0, p[1:] / np.where(z > 0, z, 1.0), np.nan)
        return q

    @property
    def rv(self):
        """Regularly varying envelope of ``z_n``, where the family carries one."""
        return None


class PowerLawTail(TailModel):
    """``z_n = (n + 1) ** -alpha``.

    ``c`` is the lower envelope constant: ``c * rho(n) <= z_n <= rho(n)`` with
    ``rho(n) = n ** -alpha``.  It does not change the distribution.
    """

    def __init__(self, alpha, c=1.0):
        self.alpha = check_real(alpha, "alpha", low=0.0, low_open=True)
        self.c = check_real(c, "c", low=0.0, high=1.0, low_open=True)

    def _params(self):
        return (("alpha", self.alpha), ("c", self.c))

    def p_array(self, n_max):
        n = np.arange(n_max + 1, dtype=np.float64)
        out = np.zeros(n_max + 1)
        k = n[1:]
        # n**-a - (n+1)**-a without cancellation
        out[1:] = k ** (-self.alpha) * -np.expm1(-self.alpha * np.log1p(1.0 / k))
        return out

    def z_array(self, n_max):
        return (np.arange(n_max + 1, dtype=np.float64) + 1.0) ** (-self.alpha)

    def z_values(self, n):
        return (np.asarray(n, dtype=np.float64) + 1.0) ** (-self.alpha)

    def hazard_array(self, n_max):
        m = np.arange(n_max + 1, dtype=np.float64)
        # q_m = 1 - ((m+1)/(m+2))**alpha
        return -np.expm1(-self.alpha * np.log1p(1.0 / (m + 1.0)))

    def tail_quantile(self, u):
        """Smallest ``n >= 1`` with ``z_n <= u`` (vectorised).

        Exact while ``n < 2**40``; beyond that consecutive ``z_n`` are no
        longer resolved in double precision.
        """
        u = np.asarray(u, dtype=np.float64)
        n = np.ceil(u ** (-1.0 / self.alpha)) - 1.0
        n = np.maximum(n, 1.0)
        # rounding in the power is at most one step off; fix up, then down
        n = np.where(self.z_values(n) > u, n + 1, n)
        n = np.where((n > 1) & (self.z_values(n - 1) <= u), n - 1, n)
        return np.minimum(n, QUANTILE_CAP).astype(np.int64)

    @property
    def rv(self):
        return RegVarFn(self.alpha, Const(1.0))


class RegVarTail(TailModel):
    """``z_n = rho(n + a) / rho(a)`` for a regularly varying ``rho`` on ``[a, inf)``."""

    def __init__(self, rv):
        if not isinstance(rv, RegVarFn):
            raise DomainError("RegVarTail needs a RegVarFn")
        self._rv = rv
        fam = rv.lfamily
        decays = rv.alpha > 0 or isinstance(fam, InvLog) or (isinstance(fam, LogPow) and fam.gamma < 0)
        if not decays:
            raise DomainError("rho does not decay to 0; the chain would be transient")

    def _params(self):
        f = self._rv
        return (("alpha", f.alpha), ("lfamily", repr(f.lfamily)), ("a", f.a))

    @property
    def rv(self):
        return self._rv

    def z_values(self, n):
        f = self._rv
        n = np.asarray(n, dtype=np.float64)
        return rho(f, n + f.a) / float(rho(f, f.a))

    def z_array(self, n_max):
        z = np.asarray(self.z_values(np.arange(n_max + 1)), dtype=np.float64)
        z[0] = 1.0
        return z

    def p_array(self, n_max):
        z = self.z_array(n_max)
        out = np.zeros(n_max + 1)
        out[1:] = z[:-1] - z[1:]
        return out


class Geometric(TailModel):
    """Constant hazard ``q``: ``p_n = (1-q)**(n-1) q``, ``z_n = (1-q)**n``."""

    def __init__(self, q):
        self.q = check_real(q, "q", low=0.0, high=1.0, low_open=True, high_open=True)

    def _params(self):
        return (("q", self.q),)

    def p_array(self, n_max):
        n = np.arange(n_max + 1, dtype=np.float64)
        out = (1.0 - self.q) ** (n - 1.0) * self.q
        out[0] = 0.0
        return out

    def z_array(self, n_max):
        return (1.0 - self.q) ** np.arange(n_max + 1, dtype=np.float64)

    def z_values(self, n):
        return (1.0 - self.q) ** np.asarray(n, dtype=np.float64)

    def hazard_array(self, n_max):
        return np.full(n_max + 1, self.q)

    def tail_quantile(self, u):
        u = np.asarray(u, dtype=np.float64)
        n = np.maximum(np.ceil(np.log(u) / np.log1p(-self.q)), 1.0)
        n = np.where(self.z_values(n) > u, n + 1, n)
        n = np.where((n > 1) & (self.z_values(n - 1) <= u), n - 1, n)
        return np.minimum(n, QUANTILE_CAP).astype(np.int64)


class ExplicitP(TailModel):
    """Finite support: ``p = [p_1, ..., p_K]``; ``z_n = 0`` exactly for ``n >= K``."""

    def __init__(self, p):
        arr = check_prob_vector(p, "p", tol=1e-9)
        if arr.size == 0:
            raise DomainError("p must be non-empty")
        nz = np.flatnonzero(arr)
        if nz.size == 0:
            raise DomainError("p has no mass")
        arr = arr[: nz[-1] + 1].copy()
        arr.setflags(write=False)
        self.p = arr
        self.cutoff = int(arr.size)
        z = kahan_tailsum(arr)  # z[i] = p_{i+2} + ... ; i.e. z_{i+1}
        self._z = np.concatenate([[1.0], z])
        self._z.setflags(write=False)

    def _params(self):
        return (("p", tuple(float(v) for v in self.p)),)

    def p_array(self, n_max):
        out = np.zeros(n_max + 1)
        k = min(n_max, self.cutoff)
        out[1 : k + 1] = self.p[:k]
        return out

    def z_array(self, n_max):
        out = np.zeros(n_max + 1)
        k = min(n_max, self.cutoff)
        out[: k + 1] = self._z[: k + 1]
        return out


class FromQ(TailModel):
    """Model built from hazards ``q_0, q_1, ...``.

    ``q_seq`` is a callable ``n -> q_n`` (called with integer arrays) or a
    finite sequence; a finite sequence is continued with ``q = 1`` so the chain
    returns to 0 after the listed states.  ``z_n = (1-q_0)...(1-q_{n-1})``.
    """

    _CHUNK = 1 << 12

    def __init__(self, q_seq, name=None):
        if callable(q_seq):
            self._q_fn = q_seq
            self._q_list = None
            self._name = name or getattr(q_seq, "__qualname__", "q")
        else:
            q = np.asarray(q_seq, dtype=np.float64)
            if q.ndim != 1 or np.any(~np.isfinite(q)) or np.any((q < 0) | (q > 1)):
                raise DomainError("hazards must be a 1-d sequence in [0, 1]")
            self._q_fn = None
            self._q_list = tuple(float(v) for v in q)
            self._name = name
        self._q = np.empty(0)
        self._z = np.ones(1)
        self.cutoff = None
        self._extend(self._CHUNK)

    def _params(self):
        if self._q_list is not None:
            return (("q", self._q_list),)
        return (("q_fn", self._name),)

    def _q_values(self, idx):
        if self._q_list is not None:
            q = np.ones(idx.size)
            inside = idx < len(self._q_list)
            q[inside] = np.asarray(self._q_list)[idx[inside]]
            return q
        q = np.asarray(self._q_fn(idx), dtype=np.float64)
        if q.shape != idx.shape:
            q = np.array([float(self._q_fn(int(i))) for i in idx])
        if np.any((q < 0) | (q > 1)) or not np.all(np.isfinite(q)):
            raise DomainError("q_n must lie in [0, 1]")
        return q

    def _extend(self, size):
        have = self._q.size
        if size <= have:
            return
        size = max(size, 2 * have)
        idx = np.arange(have, size)
        q_new = self._q_values(idx)
        z_new = self._z[-1] * np.cumprod(1.0 - q_new)
        self._q = np.concatenate([self._q, q_new])
        self._z = np.concatenate([self._z, z_new])
        if self.cutoff is None:
            ones = np.flatnonzero(self._q == 1.0)
            if ones.size:
                self.cutoff = int(ones[0]) + 1

    def z_array(self, n_max):
        self._extend(n_max + 1)
        return self._z[: n_max + 1].copy()

    def p_array(self, n_max):
        self._extend(n_max + 1)
        out = np.zeros(n_max + 1)
        out[1:] = self._z[:n_max] * self._q[:n_max]
        return out

    def hazard_array(self, n_max):
        self._extend(n_max + 1)
        z = self._z[: n_max + 1]
        return np.where(z > 0, self._q[: n_max + 1], np.nan)


def p_of(model: TailModel, n):
    """``p_n``; 0 beyond a finite cutoff."""
    n = check_index(n, "n", minimum=1)
    return float(model.p_array(n)[n])


def z_of(model: TailModel, n):
    """``z_n = P(return time > n)``."""
    n = check_index(n, "n", minimum=0)
    if hasattr(model, "z_values"):
        return 1.0 if n == 0 else float(model.z_values(n))
    return float(model.z_array(n)[n])


def hazard(model: TailModel, n):
    """``p_n / z_{n-1}``, i.e. the probability ``q_{n-1}`` of returning from state ``n-1``."""
    n = check_index(n, "n", minimum=1)
    q = model.hazard_array(n - 1)[n - 1]
    if not np.isfinite(q):
        raise DomainError(f"hazard undefined at n={n}: z_{n - 1} = 0")
    return float(q)


def check_aperiodic(model: TailModel, c_sharp, n_sharp):
    """True iff ``gcd{1 <= k <= n_sharp : p_k >= c_sharp} == 1``."""
    c_sharp = check_real(c_sharp, "c_sharp", low=0.0, low_open=True)
    n_sharp = check_index(n_sharp, "n_sharp", minimum=1)
    p = model.p_array(n_sharp)
    ks = [k for k in range(1, n_sharp + 1) if p[k] >= c_sharp]
    if not ks:
        raise DomainError(f"no k <= {n_sharp} has p_k >= {c_sharp}")
    return reduce(math.gcd, ks) == 1


def check_dfr(model: TailModel, n_max, tol=TOL_DFR):
    """Decreasing failure rate on ``1 <= n < n_max``.

    Returns ``(ok, first_violation)`` where ``first_violation`` is the first
    ``n`` with ``hazard(n) < hazard(n+1) - tol`` (``None`` when ok).
    """
    n_max = check_index(n_max, "n_max", minimum=2)
    q = model.hazard_array(n_max - 1)  # q[n-1] = hazard(n), n = 1..n_max
    bad = np.flatnonzero(~np.isfinite(q))
    if bad.size:
        raise DomainError(f"hazard undefined at n={int(bad[0]) + 1}: z_{int(bad[0])} = 0")
    viol = np.flatnonzero(q[:-1] < q[1:] - tol)
    if viol.size:
        return False, int(viol[0]) + 1
    return True, None


def check_normalized(model: TailModel, n_max, tol):
    """``|p_1 + ... + p_{n_max} + z_{n_max} - 1| <= tol``."""
    n_max = check_index(n_max, "n_max", minimum=1)
    p = model.p_array(n_max)
    z_last = model.z_array(n_max)[n_max]
    return abs(math.fsum(np.append(p[1:], [z_last, -1.0]))) <= tol
