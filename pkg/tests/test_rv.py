import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from renewal_memloss.errors import DomainError
from renewal_memloss.rv import (
    Const,
    InvLog,
    K_of,
    K_quad,
    LogPow,
    M_of,
    M_quad,
    RegVarFn,
    karamata_ratio,
    m_array,
    m_of,
    rho,
)
from renewal_memloss.tails import Geometric, PowerLawTail

FAMILIES = [Const(1.0), Const(0.5), LogPow(1.0), LogPow(-0.5), LogPow(0.5), InvLog()]


def test_rho_examples():
    assert rho(RegVarFn(0.75), 16) == 0.125
    assert rho(RegVarFn(1.0, LogPow(1.0)), 1) == 1.0
    assert rho(RegVarFn(0.5, InvLog()), math.e**3) == pytest.approx(math.exp(-1.5) / 4, rel=1e-14)
    with pytest.raises(DomainError):
        rho(RegVarFn(0.5, a=2.0), 1.5)


def test_logpow_rebased_monotone():
    f = RegVarFn(0.5, LogPow(2.0))
    assert f.a == pytest.approx(math.exp(3.0))
    x = np.geomspace(f.a, 1e12, 400)
    assert np.all(np.diff(rho(f, x)) <= 0)


def test_K_examples():
    assert K_of(RegVarFn(0.5), 1.0) == 1.0
    assert K_of(RegVarFn(0.5), math.e) == pytest.approx(2.0, rel=1e-15)
    f = RegVarFn(0.5, LogPow(0.5))
    assert K_of(f, math.e**3) == pytest.approx(1 + math.log(4), rel=1e-12)
    assert K_quad(f, math.e**3) == pytest.approx(1 + math.log(4), rel=1e-10)


def test_M_examples():
    assert M_of(RegVarFn(1.0), math.e**2) == pytest.approx(3.0, rel=1e-14)
    assert M_of(RegVarFn(0.5), 4.0) == pytest.approx(3.0, rel=1e-14)
    assert M_quad(RegVarFn(1.0, LogPow(1.0)), math.e) == pytest.approx(2.5, rel=1e-10)
    assert M_of(RegVarFn(1.0, LogPow(1.0)), math.e) == pytest.approx(2.5, rel=1e-10)


def test_m_of_examples():
    assert m_of(Geometric(0.3), 1) == 1.0
    assert m_of(Geometric(0.5), 3) == 1.75
    # harmonic-sum oracle with Euler's constant
    assert abs(m_of(PowerLawTail(1.0), 10**6) - (math.log(10**6) + 0.5772156649015329)) <= 1e-5
    arr = m_array(Geometric(0.5), 5)
    assert arr[3] == 1.75


def test_karamata_examples():
    assert karamata_ratio(RegVarFn(0.5), 1e6) == pytest.approx(0.5, abs=1e-3)
    x = 1e5
    assert karamata_ratio(RegVarFn(0.0), x) == pytest.approx(x / (x - 1), rel=1e-12)
    with pytest.raises(DomainError):
        karamata_ratio(RegVarFn(1.0), 10.0)


def test_karamata_logpow_closed_form():
    # gamma = 1 rebases the domain to a = e, where
    # int_e^x t^-1/2 (1 + ln t) dt = 2 sqrt(x) (ln x - 1)
    x = 1e8
    lx = math.log(x)
    exact = (1 + lx) / (2 * (lx - 1))
    assert karamata_ratio(RegVarFn(0.5, LogPow(1.0)), x) == pytest.approx(exact, rel=1e-9)
    assert exact == pytest.approx(0.5574, abs=1e-4)


KARAMATA_FAMILIES = [Const(1.0), Const(2.0), LogPow(0.5), LogPow(-0.5), LogPow(1.0), LogPow(-1.0), InvLog()]
# the slowly varying factor shifts the ratio by about gamma / ((1 - alpha) ln x),
# more than 10% at x = 2^20 for these combinations
KARAMATA_SLOW = {
    ("LogPow(gamma=0.5)", 0.75),
    ("LogPow(gamma=-0.5)", 0.75),
    ("LogPow(gamma=1.0)", 0.5),
    ("LogPow(gamma=1.0)", 0.75),
    ("LogPow(gamma=-1.0)", 0.25),
    ("LogPow(gamma=-1.0)", 0.5),
    ("LogPow(gamma=-1.0)", 0.75),
    ("InvLog()", 0.25),
    ("InvLog()", 0.5),
    ("InvLog()", 0.75),
}


def _karamata_cases():
    for fam in KARAMATA_FAMILIES:
        for alpha in (0.25, 0.5, 0.75):
            marks = ()
            if (repr(fam), alpha) in KARAMATA_SLOW:
                marks = pytest.mark.xfail(strict=True, reason="log-order correction exceeds 10% at 2^20")
            yield pytest.param(fam, alpha, marks=marks, id=f"{fam!r}-{alpha}")


@pytest.mark.parametrize("fam,alpha", list(_karamata_cases()))
def test_karamata_limit(fam, alpha):
    f = RegVarFn(alpha, fam)
    for j in (20, 24, 30):
        assert abs(karamata_ratio(f, 2.0**j) - (1 - alpha)) <= 0.1 * (1 - alpha)


@pytest.mark.parametrize("gamma", [0.5, -0.5, 1.0, -1.0])
@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_karamata_log_correction(gamma, alpha):
    x = 2.0**40
    dev = karamata_ratio(RegVarFn(alpha, LogPow(gamma)), x) / (1 - alpha) - 1
    assert dev == pytest.approx(gamma / ((1 - alpha) * math.log(x)), rel=0.25)


@pytest.mark.parametrize("fam", FAMILIES, ids=repr)
def test_K_closed_vs_quad(fam):
    f = RegVarFn(0.5, fam)
    for z in (1.5, 10.0, 1e4, 1e9):
        assert K_of(f, z) == pytest.approx(K_quad(f, z), rel=1e-10)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.7])
@pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
def test_M_closed_vs_quad(alpha, c):
    f = RegVarFn(alpha, Const(c))
    for n in (2.0, 1e3, 1e8):
        assert M_of(f, n) == pytest.approx(M_quad(f, n), rel=1e-10)


@pytest.mark.parametrize("fam", FAMILIES, ids=repr)
def test_K_monotone_and_kl2(fam):
    f = RegVarFn(0.5, fam)
    zs = [2.0**j for j in range(0, 60, 2)]
    ks = [K_of(f, z) for z in zs]
    assert ks[0] >= 1.0 and all(b >= a for a, b in zip(ks, ks[1:]))
    kappa = fam.kl2_constant
    for z, k in zip(zs, ks):
        assert k >= kappa * float(fam(z)) ** -2 * (1 - 1e-12)


@given(st.floats(0.0, 0.95), st.floats(2.0, 1e12))
def test_karamata_positive(alpha, x):
    assert karamata_ratio(RegVarFn(alpha), x) > 0
