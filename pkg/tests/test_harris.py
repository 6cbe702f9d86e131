import warnings
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from renewal_memloss import harris as H
from renewal_memloss.errors import (
    DivergentNormWarning,
    DomainError,
    MinorizationError,
    PreconditionError,
    TruncationWarning,
)
from renewal_memloss.memoryloss import tv_exact
from renewal_memloss.renewal import compute_u_fast
from renewal_memloss.rv import RegVarFn
from renewal_memloss.tails import ExplicitP, Geometric, PowerLawTail


def delta(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


@pytest.fixture(scope="module")
def examples():
    return {name: make() for name, make in H.EXAMPLES.items()}


def _start(model, mu):
    """Split model and lifted start for any example."""
    if model.epsilon < 1:
        return H.split(model), H.lift(model, mu)
    return model, mu


def test_split_identity_when_atom():
    m = H.model_chain_example(PowerLawTail(0.75), 50)
    s = H.split(m)
    lifted = H.lift(m, delta(50, 0))
    assert lifted[0] == 0.0 and lifted[50] == 1.0  # flag is 1 on S with certainty
    mu = np.full(50, 1 / 50)
    for n in (1, 7, 30):
        assert np.max(np.abs(H.project(s, s.evolve(H.lift(m, mu), n)) - m.evolve(mu, n))) <= 1e-15


def test_split_rows_stochastic():
    m = H.lazy_walk_example(12)
    s = H.split(m)
    rows = np.asarray(s.kernel.sum(axis=1)).ravel()
    assert np.max(np.abs(rows - 1)) <= 1e-12
    # S x {1} is an atom: all its rows coincide
    atom = np.flatnonzero(s.small_set)
    dense = s.kernel.toarray()
    assert all(np.array_equal(dense[atom[0]], dense[a]) for a in atom)


def test_minorization_witness():
    K = sp.csr_matrix(np.array([[0.5, 0.5], [1.0, 0.0]]))
    m = H.HarrisModel(K, np.array([True, False]), 0.9, np.array([0.2, 0.8]))
    with pytest.raises(MinorizationError) as exc:
        H.split(m)
    assert (exc.value.x, exc.value.y) == (0, 1)


def test_model_validation():
    K = sp.csr_matrix(np.array([[0.7, 0.5], [1.0, 0.0]]))
    with pytest.raises(DomainError):
        H.HarrisModel(K, np.array([True, False]), 1.0, np.array([0.5, 0.5]))
    K = sp.csr_matrix(np.eye(2))
    with pytest.raises(DomainError):
        H.HarrisModel(K, np.array([False, False]), 1.0, np.array([0.5, 0.5]))


def test_round_trip_model_chain():
    n = 1 << 12
    for tail in (PowerLawTail(0.75), Geometric(0.2), ExplicitP([0.1, 0.6, 0.3])):
        m = H.model_chain_example(tail, n + 2)
        rtd = H.return_time_dist(m, n)
        assert np.max(np.abs(rtd.p - tail.p_array(n))) <= 1e-12
        assert abs(rtd.p.sum() + rtd.tail_mass - 1) <= 1e-12


def test_geometric_return_closed_form():
    q = 0.3
    m = H.geometric_return_example(q, 300)
    rtd = H.return_time_dist(m, 200)
    k = np.arange(1, 201)
    assert np.max(np.abs(rtd.p[1:] - (1 - q) ** (k - 1) * q)) <= 1e-15


def _lazy_walk_oracle(K, steps):
    """Exact return law by the coin construction: at ``x in S`` regenerate w.p. ``eps``, else move by ``H0``."""
    eps, beta = Fraction(1, 2), {0: Fraction(1, 2), 1: Fraction(1, 2)}

    def row(x):
        d = {}
        for y, pr in ((x, Fraction(1, 2)), (min(x + 1, K), Fraction(1, 4)), (max(x - 1, 0), Fraction(1, 4))):
            d[y] = d.get(y, 0) + pr
        return d

    def row0(x):
        d = row(x)
        return {y: (d.get(y, 0) - eps * beta.get(y, 0)) / (1 - eps) for y in set(d) | set(beta)}

    w, out = dict(beta), [Fraction(0)]
    for _ in range(steps):
        out.append(eps * w.get(0, 0))
        nxt = {}
        for x, m in w.items():
            weight, r = ((1 - eps) * m, row0(x)) if x == 0 else (m, row(x))
            for y, pr in r.items():
                nxt[y] = nxt.get(y, 0) + weight * pr
        w = nxt
    return out


def test_lazy_walk_return_law():
    m = H.lazy_walk_example(20)
    rtd = H.return_time_dist(m, 64)
    # tau = 1 iff the start lands in the atom, prob eps * beta(S)
    assert rtd.p[1] == 0.25
    exact = _lazy_walk_oracle(20, 30)
    assert exact[:6] == [0, Fraction(1, 4), Fraction(3, 16), Fraction(1, 8), Fraction(21, 256), Fraction(7, 128)]
    assert rtd.p[:31] == pytest.approx([float(v) for v in exact], abs=1e-15)


def test_truncation_warning():
    m = H.model_chain_example(PowerLawTail(0.75), 20)
    with pytest.warns(TruncationWarning):
        rtd = H.return_time_dist(m, 100)
    assert rtd.leak > 0
    with pytest.warns(TruncationWarning):
        H.return_time_dist(H.model_chain_example(PowerLawTail(0.75), 200), 100, tail_threshold=0.01)


@pytest.mark.parametrize("name", list(H.EXAMPLES))
def test_dp_conservation(examples, name):
    assert H.dp_conservation(examples[name], 512) <= 1e-12


@pytest.mark.parametrize("name", list(H.EXAMPLES))
def test_split_marginal(examples, name):
    m = examples[name]
    mu = np.full(m.n_states, 1.0 / m.n_states)
    for n in (1, 17, 128, 256):
        assert H.split_marginal_gap(m, mu, n) <= 1e-12


def test_gen1_examples(examples):
    lazy = examples["lazy-walk"]
    s = H.split(lazy)
    rng = np.random.default_rng(0)
    for m, mu in ((examples["model-chain"], None), (s, None)):
        mu = rng.random(m.n_states)
        mu /= mu.sum()
        assert H.gen1_check(m, mu, 1) <= 1e-14
    chain = examples["model-chain"]
    assert H.gen1_check(chain, delta(chain.n_states, 0), 64) <= 1e-12
    uniform = np.full(lazy.n_states, 1.0 / lazy.n_states)
    assert H.gen1_check(s, H.lift(lazy, uniform), 128) <= 1e-11
    with pytest.raises(PreconditionError):
        H.gen1_check(lazy, uniform, 4)


def test_g_norm_equal_measures():
    m = H.model_chain_example(PowerLawTail(0.75), 100)
    with pytest.raises(DomainError):
        H.g_norm(m, delta(100, 0), delta(100, 0), lambda x: x, 64)


def test_g_norm_direct_sum():
    tail = PowerLawTail(0.75)
    n_max = 4096
    m = H.model_chain_example(tail, n_max + 2)
    d0 = delta(m.n_states, 0)
    mu_p = m.evolve(d0, 1)
    g = lambda x: np.asarray(x, dtype=float) ** 0.5  # noqa: E731
    res = H.g_norm(m, d0, mu_p, g, n_max)
    assert not res.infinite
    # |d0 - P d0| = (1 - q_0)(delta_0 + delta_1); from 1 the first return lands at l w.p. p_l / z_1
    p, z = tail.p_array(n_max), tail.z_array(1)
    q0 = p[1]
    ell = np.arange(2, n_max + 1)
    direct = (1 - q0) * (1.0 + np.sum(g(ell) * p[2:] / z[1]))
    assert res.value == pytest.approx(direct, rel=1e-12)


def test_g_norm_divergent_remark():
    m = H.model_chain_example(PowerLawTail(0.75), 1 << 14)
    n = m.n_states
    with pytest.warns(DivergentNormWarning):
        res = H.g_norm(m, delta(n, 0), delta(n, 1), lambda x: x**0.75, (1 << 14) - 2)
    assert res.infinite


def test_cor_har_single_term():
    # S = {0, 1} is an atom; both starts return at t = 1, so the bound is 2 b_0(n - 1) = 0
    beta = np.array([0.2, 0.3, 0.5])
    K = sp.csr_matrix(np.array([beta, beta, [0.5, 0.0, 0.5]]))
    m = H.HarrisModel(K, np.array([True, True, False]), 1.0, beta)
    b = lambda ell, n: 0.0 if ell == 0 else 1.0  # noqa: E731
    assert H.cor_har_bound(m, delta(3, 0), delta(3, 1), b, 5) == 0.0
    calls = []
    H.cor_har_bound(m, delta(3, 0), delta(3, 1), lambda ell, n: calls.append((ell, n)) or 0.0, 5)
    assert calls == [(0, 4)]
    assert H.direct_tv(m, delta(3, 0), delta(3, 1), 5) == 0.0


def test_cor_har_model_chain_vs_tv_exact():
    tail = PowerLawTail(0.75)
    n_top = 256
    m = H.model_chain_example(tail, 2 * n_top + 4)
    b = H.make_b_table(m, 2 * n_top)
    seq = compute_u_fast(tail, 2 * n_top)
    d0 = delta(m.n_states, 0)
    for ell in (1, 4, 16):
        mu_p = m.evolve(d0, ell)
        for n in (16, 64, 256):
            assert H.cor_har_bound(m, d0, mu_p, b, n) >= tv_exact(seq, tail, n, ell).tv - 1e-10


@pytest.mark.parametrize("name", list(H.EXAMPLES))
def test_domination(examples, name):
    m = examples[name]
    atomic, _ = _start(m, np.zeros(m.n_states))
    b = H.make_b_table(atomic, 128)
    pairs = [(0, 1), (0, 5), (3, 10)]
    for i, j in pairs:
        mu, mp = delta(m.n_states, i), delta(m.n_states, j)
        _, lmu = _start(m, mu)
        _, lmp = _start(m, mp)
        for n in (1, 8, 32, 128):
            bound = H.cor_har_bound(atomic, lmu, lmp, b, n)
            assert bound >= H.direct_tv(m, mu, mp, n) - 1e-10


def test_mixing_bound_ratio_bounded():
    tail = PowerLawTail(0.75)
    n_max = 1 << 13
    m = H.model_chain_example(tail, n_max + 2)
    d0, d1 = delta(m.n_states, 0), delta(m.n_states, 1)
    g = lambda x: np.asarray(x, dtype=float) ** 0.6  # noqa: E731
    ratios = [H.mixing_bound(m, d0, d1, tail.rv, g, 1 << j, n_max=n_max).ratio for j in range(2, 12)]
    assert max(ratios) < 3 * min(ratios[:3]) + 1
    assert all(0 < r < 10 for r in ratios)


def test_mixing_bound_closed_form():
    tail = ExplicitP([0.2, 0.3, 0.5])
    m = H.model_chain_example(tail, 8)
    d0, d1 = delta(8, 0), delta(8, 1)
    g = lambda x: np.asarray(x, dtype=float) ** 0.5  # noqa: E731
    f = RegVarFn(0.5)
    z1 = 0.8
    gnorm = 1.0 + (0.3 * 2**0.5 + 0.5 * 3**0.5) / z1
    res = H.mixing_bound(m, d0, d1, f, g, 9, n_max=64)
    assert res.value == pytest.approx((9**-0.5 + 9**-0.5) * gnorm, rel=1e-13)
    assert res.direct_tv == pytest.approx(H.direct_tv(m, d0, d1, 9))


def test_mixing_bound_divergent_raises():
    m = H.model_chain_example(PowerLawTail(0.75), 1 << 14)
    n = m.n_states
    with pytest.raises(DomainError):
        H.mixing_bound(m, delta(n, 0), delta(n, 1), RegVarFn(0.75), lambda x: x**0.75, 64, n_max=(1 << 14) - 2)


def test_mixing_bound_decays():
    m = H.geometric_return_example(0.5, 200)
    d0, d1 = delta(200, 0), delta(200, 3)
    g = lambda x: np.asarray(x, dtype=float)  # noqa: E731
    vals = [H.mixing_bound(m, d0, d1, RegVarFn(1.0), g, n).value for n in (4, 16, 64)]
    assert vals[0] > vals[1] > vals[2]


def test_edge_list(tmp_path):
    path = tmp_path / "chain.csv"
    path.write_text("from,to,prob\n0,0,0.5\n0,1,0.5\n1,0,0.25\n1,2,0.75\n2,0,1.0\n")
    m = H.load_edge_list(path, [0])
    assert m.epsilon == 1.0
    assert np.array_equal(m.beta, [0.5, 0.5, 0.0])
    rtd = H.return_time_dist(m, 50)
    assert rtd.p[1] == 0.5 and rtd.p[2] == pytest.approx(0.5 * 0.25)
    m2 = H.load_edge_list(path, [0, 1])
    assert m2.epsilon == pytest.approx(0.25)
    m2.check_minorization()
    # every row reaches 0, so {1, 2} still minorises with mass 1/4
    assert H.load_edge_list(path, [1, 2]).epsilon == pytest.approx(0.25)
    cycle = tmp_path / "cycle.csv"
    cycle.write_text("from,to,prob\n0,1,1.0\n1,0,1.0\n")
    with pytest.raises(DomainError, match="common mass"):
        H.load_edge_list(cycle, [0, 1])
