"""Regularly varying functions ``rho(x) = x**(-alpha) * L(x)`` and derived integrals.

Three slowly varying families ship: :class:`Const`, :class:`LogPow` and
:class:`InvLog`.  Integrals are taken after the substitution ``t = exp(s)``,
which turns every shipped integrand into a smooth function of ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from ._numerics import kahan_cumsum
from ._validation import check_index, check_real
from .errors import DomainError

QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class Const:
    """``L(x) = c``."""

    c: float = 1.0

    def __post_init__(self):
        check_real(self.c, "c", low=0.0, low_open=True)

    def __call__(self, x):
        return self.c * np.ones_like(np.asarray(x, dtype=np.float64))[()]

    @property
    def kl2_constant(self):
        return min(1.0, self.c**2)

    def k_closed(self, s):
        return 1.0 + s / self.c**2


@dataclass(frozen=True)
class LogPow:
    """``L(x) = (1 + ln x) ** gamma``."""

    gamma: float

    def __post_init__(self):
        check_real(self.gamma, "gamma")

    def __call__(self, x):
        return (1.0 + np.log(x)) ** self.gamma

    @property
    def kl2_constant(self):
        if self.gamma >= 0:
            return 1.0
        return 1.0 / (1.0 - 2.0 * self.gamma)

    def k_closed(self, s):
        e = 1.0 - 2.0 * self.gamma
        if e == 0.0:
            return 1.0 + math.log1p(s)
        return 1.0 + math.expm1(e * math.log1p(s)) / e


@dataclass(frozen=True)
class InvLog:
    """``L(x) = 1 / (1 + ln x)``."""

    def __call__(self, x):
        return 1.0 / (1.0 + np.log(x))

    @property
    def kl2_constant(self):
        return 1.0 / 3.0

    def k_closed(self, s):
        return 1.0 + ((1.0 + s) ** 3 - 1.0) / 3.0


_FAMILIES = (Const, LogPow, InvLog)


@dataclass(frozen=True)
class RegVarFn:
    """Regularly varying function of index ``-alpha`` on ``[a, inf)``.

    Parameters
    ----------
    alpha : float
        Decay exponent, ``alpha >= 0``.
    lfamily : Const, LogPow or InvLog
        Slowly varying factor.
    a : float
        Left endpoint of the domain.  For ``LogPow`` with ``gamma > 0`` the
        endpoint is moved right to ``exp(gamma / alpha - 1)`` when needed so
        that ``rho`` is non-increasing on the whole domain.
    """

    alpha: float
    lfamily: object = field(default_factory=Const)
    a: float = 1.0

    def __post_init__(self):
        alpha = check_real(self.alpha, "alpha", low=0.0)
        a = check_real(self.a, "a", low=1.0)
        if not isinstance(self.lfamily, _FAMILIES):
            raise DomainError(f"unsupported slowly varying family {self.lfamily!r}")
        if isinstance(self.lfamily, LogPow) and self.lfamily.gamma > 0:
            if alpha == 0:
                raise DomainError("LogPow with gamma > 0 and alpha = 0 is increasing")
            a = max(a, math.exp(self.lfamily.gamma / alpha - 1.0))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "a", a)

    def L(self, x):
        return self.lfamily(x)

    def __call__(self, x):
        return rho(self, x)


def rho(f: RegVarFn, x):
    """Evaluate ``x**(-alpha) * L(x)``; accepts scalars or arrays."""
    xa = np.asarray(x, dtype=np.float64)
    if np.any(xa < f.a):
        raise DomainError(f"rho is defined on [{f.a}, inf); got x < a")
    out = xa ** (-f.alpha) * f.lfamily(xa)
    return out[()] if out.ndim == 0 else out


def _quad_log(g, s_hi, s_lo=0.0):
    """Integrate ``g(s)`` over ``[s_lo, s_hi]`` to ``QUAD_RTOL`` relative accuracy."""
    if s_hi <= s_lo:
        return 0.0
    # Panels of width 4 in s: integrands grow like exp(c*s) and a single
    # panel over a long range misses the relative target.
    edges = np.unique(np.concatenate([[s_lo], np.arange(math.ceil(s_lo), s_hi, 4.0), [s_hi]]))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(g, lo, hi, epsabs=0.0, epsrel=QUAD_RTOL / 10, limit=200)
        total += val
    return total


def K_quad(f: RegVarFn, z):
    """``K`` by quadrature; the independent route used to check closed forms."""
    z = check_real(z, "z", low=1.0)
    fam = f.lfamily
    return 1.0 + _quad_log(lambda s: float(fam(math.exp(s))) ** -2, math.log(z))


def K_of(f: RegVarFn, z):
    """``K(z) = 1 + int_1^z t**-1 L(t)**-2 dt``; closed form for every shipped family."""
    z = check_real(z, "z", low=1.0)
    return _K_cached(f, z)


@lru_cache(maxsize=65536)
def _K_cached(f, z):
    return f.lfamily.k_closed(math.log(z))


def _m_closed(f: RegVarFn, s):
    """Closed form of ``int_0^s exp((1-alpha) u) L(exp u) du`` or ``None``."""
    beta = 1.0 - f.alpha
    fam = f.lfamily
    if isinstance(fam, Const):
        if beta == 0.0:
            return fam.c * s
        return fam.c * math.expm1(beta * s) / beta
    if beta == 0.0:
        if isinstance(fam, LogPow):
            g = fam.gamma
            if g == -1.0:
                return math.log1p(s)
            return math.expm1((g + 1.0) * math.log1p(s)) / (g + 1.0)
        return math.log1p(s)
    return None


def M_quad(f: RegVarFn, n):
    n = check_real(n, "n", low=1.0)
    beta = 1.0 - f.alpha
    fam = f.lfamily
    return 1.0 + _quad_log(lambda s: math.exp(beta * s) * float(fam(math.exp(s))), math.log(n))


def M_of(f: RegVarFn, n):
    """``M(n) = 1 + int_1^n rho(t) dt``.

    The integrand is ``x**-alpha * L(x)`` even below ``f.a``; ``M`` only enters
    the admissibility threshold of the Ornstein bound where that is harmless.
    """
    n = check_real(n, "n", low=1.0)
    return _M_cached(f, n)


@lru_cache(maxsize=65536)
def _M_cached(f, n):
    closed = _m_closed(f, math.log(n))
    if closed is not None:
        return 1.0 + closed
    return M_quad(f, n)


def integral_rho(f: RegVarFn, lo, hi):
    """``int_lo^hi rho(t) dt`` for ``f.a <= lo <= hi``."""
    lo = check_real(lo, "lo", low=f.a)
    hi = check_real(hi, "hi", low=lo)
    closed_hi = _m_closed(f, math.log(hi))
    closed_lo = _m_closed(f, math.log(lo))
    if closed_hi is not None and closed_lo is not None:
        return closed_hi - closed_lo
    beta = 1.0 - f.alpha
    fam = f.lfamily
    return _quad_log(
        lambda s: math.exp(beta * s) * float(fam(math.exp(s))), math.log(hi), math.log(lo)
    )


def karamata_ratio(f: RegVarFn, x):
    """``x * rho(x) / int_a^x rho``, which tends to ``1 - alpha`` when ``alpha < 1``."""
    if f.alpha >= 1.0:
        raise DomainError("karamata_ratio needs alpha < 1; the tail-integral form applies otherwise")
    x = check_real(x, "x", low=2.0 * f.a)
    return x * float(rho(f, x)) / integral_rho(f, f.a, x)


_M_PREFIX_CACHE: dict = {}


def m_of(model, n):
    """``m(n) = z_0 + ... + z_{n-1}``, exactly rounded and cached per model."""
    n = check_index(n, "n", minimum=1)
    key = (model.digest, n)
    if key not in _M_PREFIX_CACHE:
        z = model.z_array(n - 1)
        _M_PREFIX_CACHE[key] = math.fsum(z)
    return _M_PREFIX_CACHE[key]


def m_array(model, n_max):
    """``m(1), ..., m(n_max)`` as a compensated running sum (index 0 holds ``m(0) = 0``)."""
    n_max = check_index(n_max, "n_max", minimum=1)
    z = model.z_array(n_max - 1)
    return np.concatenate([[0.0], kahan_cumsum(z)])
