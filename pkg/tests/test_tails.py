import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from renewal_memloss.errors import DomainError
from renewal_memloss.tails import (
    ExplicitP,
    FromQ,
    Geometric,
    PowerLawTail,
    RegVarTail,
    check_aperiodic,
    check_dfr,
    check_normalized,
    hazard,
    p_of,
    z_of,
)
from renewal_memloss.rv import InvLog, LogPow, RegVarFn

alphas = st.floats(0.05, 3.0)


def test_p_of_examples():
    assert p_of(Geometric(0.5), 3) == 0.125
    assert p_of(PowerLawTail(1.0), 1) == 0.5
    assert p_of(ExplicitP([0.3, 0.7]), 2) == 0.7
    assert p_of(ExplicitP([0.3, 0.7]), 5) == 0.0


def test_z_of_examples():
    assert z_of(PowerLawTail(0.5), 1) == pytest.approx(2**-0.5, abs=1e-15)
    assert z_of(Geometric(0.25), 4) == 0.31640625
    assert z_of(ExplicitP([0.3, 0.7]), 2) == 0.0
    assert z_of(PowerLawTail(0.3), 0) == 1.0


def test_hazard_examples():
    assert hazard(Geometric(0.5), 7) == 0.5
    # closed form 1 - (1/2)**0.75
    expected = 1.0 - 0.5**0.75
    assert hazard(PowerLawTail(0.75), 1) == pytest.approx(expected, abs=1e-15)
    assert hazard(PowerLawTail(0.75), 1) == pytest.approx(0.4053964425, abs=1e-10)
    assert hazard(ExplicitP([1.0]), 1) == 1.0
    with pytest.raises(DomainError):
        hazard(ExplicitP([1.0]), 2)


def test_check_aperiodic_examples():
    assert check_aperiodic(Geometric(0.5), 0.01, 4)
    assert not check_aperiodic(ExplicitP([0.0, 1.0]), 0.1, 8)
    assert check_aperiodic(PowerLawTail(0.75), 1e-6, 10)
    with pytest.raises(DomainError):
        check_aperiodic(Geometric(0.5), 0.9, 4)


def test_check_dfr_examples():
    assert check_dfr(Geometric(0.3), 10**4) == (True, None)
    assert check_dfr(PowerLawTail(0.6), 10**4) == (True, None)
    assert check_dfr(ExplicitP([0.1, 0.9]), 2) == (False, 1)


def test_check_normalized_examples():
    assert check_normalized(Geometric(0.5), 64, 1e-12)
    assert not check_normalized(ExplicitP([0.5, 0.4]), 2, 1e-12)
    assert check_normalized(PowerLawTail(0.75), 1 << 20, 1e-10)


def test_powerlaw_z_exact():
    m = PowerLawTail(0.75)
    n = np.arange(50)
    assert np.array_equal(m.z_array(49), (n + 1.0) ** -0.75)


def test_finite_support_exact_zeros():
    m = ExplicitP([0.2, 0.3, 0.5])
    z = m.z_array(10)
    assert m.cutoff == 3
    assert np.all(z[3:] == 0.0)


def test_construction_errors():
    for bad in (lambda: PowerLawTail(0.0), lambda: Geometric(1.0), lambda: ExplicitP([-0.1, 1.1])):
        with pytest.raises(DomainError):
            bad()
    with pytest.raises(DomainError):
        FromQ([0.5, 1.5])
    with pytest.raises(DomainError):
        RegVarTail(RegVarFn(0.0))


def _models():
    return [
        PowerLawTail(0.4),
        PowerLawTail(2.0),
        Geometric(0.3),
        ExplicitP([0.1, 0.2, 0.7]),
        FromQ(lambda n: 1.0 / (n + 2.0), name="harmonic"),
        RegVarTail(RegVarFn(0.75, LogPow(-1.0))),
        RegVarTail(RegVarFn(0.0, InvLog())),
    ]


@pytest.mark.parametrize("model", _models(), ids=repr)
def test_telescoping(model):
    p = model.p_array(4096)
    z = model.z_array(4096)
    assert z[0] == 1.0
    assert np.max(np.abs(z[:-1] - z[1:] - p[1:])) <= 1e-15
    assert np.all(p >= 0)
    assert np.all(np.diff(z) <= 0)


@pytest.mark.parametrize("model", _models(), ids=repr)
def test_fromq_round_trip(model):
    n = 10**4
    q = model.hazard_array(n)
    q = np.where(np.isfinite(q), q, 1.0)
    rebuilt = FromQ(q)
    assert np.max(np.abs(rebuilt.p_array(n) - model.p_array(n))) <= 1e-13


def test_fromq_identities():
    q = [0.1, 0.4, 0.25]
    m = FromQ(q)
    z = m.z_array(4)
    assert z[1] == pytest.approx(0.9)
    assert z[2] == pytest.approx(0.9 * 0.6)
    p = m.p_array(4)
    assert p[2] == pytest.approx(z[1] * 0.4)
    # padded with q = 1 after the listed hazards
    assert z[4] == 0.0 and m.cutoff == 4


@given(alphas)
def test_powerlaw_dfr(alpha):
    assert check_dfr(PowerLawTail(alpha), 10**5)[0]


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12).filter(lambda v: v[0] > 0))
def test_aperiodic_when_p1_positive(weights):
    p = np.asarray(weights) / math.fsum(weights)
    m = ExplicitP(p)
    if m.p[0] > 0:
        assert check_aperiodic(m, float(m.p[0]), len(p))


@given(alphas, st.floats(1e-12, 1.0))
def test_tail_quantile(alpha, u):
    m = PowerLawTail(alpha)
    n = int(m.tail_quantile(u))
    assert n >= 1
    if n >= 2**40:
        return  # consecutive z_n no longer resolved in double precision
    assert m.z_values(n) <= u
    if n > 1:
        assert m.z_values(n - 1) > u


def test_digest_and_equality():
    assert PowerLawTail(0.75) == PowerLawTail(0.75)
    assert PowerLawTail(0.75) != PowerLawTail(0.7)
    assert len({Geometric(0.5), Geometric(0.5)}) == 1
