import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from fredkit.affine import compound_a, feld_table
from fredkit.errors import DomainError, ValidationError
from fredkit.models.counts import (BiNbarParams, InarParams, NbarParams, binbar_feld,
                                   binbar_feld_affine, binbar_one_step, binbar_recursion,
                                   binbar_var_representation, inar_affine, inar_feld,
                                   inar_feld_limit, nbar_affine, nbar_feld, nbar_feld_components)
from fredkit.models.markov import (BinaryChainParams, MarkovChain, binary_fekd_term,
                                   binary_to_transition, mc_feld, mc_feld_term, mc_fekd_term,
                                   mc_fevd, mc_fevd_binary, mc_fevd_term)
from fredkit.simulation import simulate, step_from

REF_BINBAR = BiNbarParams(0.118, -0.067, 0.647, 0.391, 1.20, 1.27, -0.075, 0.453, 1.492)
# the same with the negative loadings set to zero, so that it can be simulated
REF_BINBAR_GEN = BiNbarParams(0.118, 0.0, 0.647, 0.391, 1.20, 1.27, 0.0, 0.453, 1.492)


# -- binary and general chains -----------------------------------------------------

def test_binary_iid_columns_equal():
    p = binary_to_transition(BinaryChainParams(0.3, 0.0)).p
    assert p[:, 0] == pytest.approx([0.7, 0.3])
    assert p[:, 1] == pytest.approx([0.7, 0.3])


def test_binary_near_identity():
    p = binary_to_transition(BinaryChainParams(0.3, 1 - 1e-12)).p
    assert p == pytest.approx(np.eye(2), abs=1e-11)


def test_binary_power_closed_form():
    params = BinaryChainParams(0.3, 0.6)
    p3 = binary_to_transition(params).power(3)
    for y0 in (0, 1):
        assert p3[1, y0] == pytest.approx(0.3 + 0.6**3 * (y0 - 0.3), abs=1e-15)


def test_binary_fekd_general_vs_closed_form():
    params = BinaryChainParams(0.3, 0.6)
    chain = binary_to_transition(params)
    for h in range(2, 7):
        for k in range(h - 1):
            for y0 in (0, 1):
                assert mc_fekd_term(chain, 1, y0, h, k) == pytest.approx(
                    binary_fekd_term(params, y0, h, k), abs=1e-13)


def test_iid_binary_fekd_vanishes():
    chain = binary_to_transition(BinaryChainParams(0.4, 0.0))
    assert all(abs(mc_fekd_term(chain, 1, 0, 5, k)) < 1e-15 for k in range(4))


def test_fekd_matches_path_enumeration_three_states():
    rng = np.random.default_rng(4)
    p = oracles.random_stochastic(3, rng)
    chain = MarkovChain(p)
    h = 5
    for y in range(3):
        for x0 in range(3):
            brute, _ = oracles.brute_fred_terms(p, x0, h, lambda path: p[y, path[-2]])
            for k in range(h - 1):
                assert mc_fekd_term(chain, y, x0, h, k) == pytest.approx(brute[k], abs=1e-12)


def test_zero_transition_is_domain_error():
    chain = MarkovChain(np.array([[1.0, 0.5], [0.0, 0.5]]))
    with pytest.raises(DomainError, match="entry"):
        mc_fekd_term(chain, 1, 0, 2, 0)


def test_binary_fevd_iid():
    params = BinaryChainParams(0.3, 0.0)
    assert mc_fevd_binary(params, 1, 4, 1) == 0.0
    assert mc_fevd_binary(params, 1, 4, 3) == pytest.approx(0.21)


@pytest.mark.parametrize("pi,lam,y0", [(0.3, 0.6, 1), (0.3, 0.6, 0), (0.7, 0.2, 1), (0.5, 0.9, 0)])
def test_binary_fevd_sums_to_bernoulli_variance(pi, lam, y0):
    params = BinaryChainParams(pi, lam)
    for h in range(1, 7):
        ph = pi + lam**h * (y0 - pi)
        total = sum(mc_fevd_binary(params, y0, h, k) for k in range(h))
        assert total == pytest.approx(ph * (1 - ph), abs=1e-12)


@pytest.mark.parametrize("pi,lam", [(0.3, 0.6), (0.8, 0.5), (0.5, 0.1)])
def test_binary_fevd_matches_path_enumeration(pi, lam):
    params = BinaryChainParams(pi, lam)
    p = oracles.binary_matrix(pi, lam)
    for h in range(1, 6):
        for y0 in (0, 1):
            brute, _ = oracles.brute_fevd_terms(p, y0, h, [0.0, 1.0])
            closed = [mc_fevd_binary(params, y0, h, k) for k in range(h)]
            general = [mc_fevd_term(params.chain, y0, h, k) for k in range(h)]
            assert closed == pytest.approx(brute, abs=1e-12)
            assert general == pytest.approx(brute, abs=1e-12)


def test_feld_zero_argument():
    chain = binary_to_transition(BinaryChainParams(0.3, 0.6))
    assert all(abs(mc_feld_term(chain, [0.0, 0.0], 1, 4, k)) < 1e-15 for k in range(4))


def test_feld_matches_path_enumeration():
    params = BinaryChainParams(0.3, 0.6)
    p = oracles.binary_matrix(0.3, 0.6)
    u = np.array([0.4, 1.7])
    for h in range(1, 6):
        brute, total = oracles.brute_fred_terms(p, 0, h, lambda path: math.exp(-u[path[-1]]))
        tab = mc_feld(params.chain, u, 0, h)
        assert tab.terms_at(h) == pytest.approx(brute, abs=1e-12)
        assert tab.totals[h] == pytest.approx(total, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(pi=st.floats(0.05, 0.95), lam=st.floats(0.0, 0.95), u0=st.floats(-3, 3),
       u1=st.floats(-3, 3), h=st.integers(1, 6), x0=st.integers(0, 1))
def test_chain_feld_terms_nonnegative(pi, lam, u0, u1, h, x0):
    tab = mc_feld(BinaryChainParams(pi, lam).chain, [u0, u1], x0, h)
    assert np.all(tab.terms_at(h) >= -1e-12)


def test_general_fevd_values_and_weights():
    chain = MarkovChain(np.array([[0.5, 0.2, 0.1], [0.3, 0.5, 0.3], [0.2, 0.3, 0.6]]),
                        values=[1.0, 4.0, -2.0])
    brute, var = oracles.brute_fevd_terms(chain.p, 2, 4, chain.values)
    tab = mc_fevd(chain, 2, 4)
    assert tab.terms_at(4) == pytest.approx(brute, abs=1e-12)
    assert tab.totals[4] == pytest.approx(var, abs=1e-12)


def test_chain_validation():
    with pytest.raises(ValidationError):
        MarkovChain(np.array([[0.5, 0.5], [0.4, 0.5]]))
    with pytest.raises(ValidationError):
        BinaryChainParams(1.2, 0.3)


# -- INAR -----------------------------------------------------------------------------

def test_inar_unit_mass_and_poisson_marginal():
    model = inar_affine(InarParams(0.5, 2.0))
    assert model.a([0.0]) == pytest.approx([0.0], abs=1e-15)
    assert model.c([0.0]) == pytest.approx(0.0, abs=1e-15)
    # Poisson(4): log E e^{-uY} = -4 (1 - e^{-u})
    assert model.c([0.7]) == pytest.approx(-4 * (1 - math.exp(-0.7)), abs=1e-14)


def test_inar_iid_total():
    lam, u = 2.0, 1.5
    tab = inar_feld(InarParams(0.0, lam), u, 3, 4)
    for h in tab.horizons:
        assert tab.totals[h] == pytest.approx(lam * (u - 1 + math.exp(-u)), abs=1e-13)
        assert np.count_nonzero(np.abs(tab.terms_at(h)) > 1e-15) == 1


def test_inar_feld_matches_truncated_chain():
    mat = oracles.inar_transition(0.5, 2.0, 80)
    for h in (1, 3, 6):
        terms, total = oracles.truncated_feld(mat, 1.0, 3, h)
        tab = inar_feld(InarParams(0.5, 2.0), 1.0, 3, h)
        assert tab.terms_at(h) == pytest.approx(terms, abs=1e-11)
        assert tab.totals[h] == pytest.approx(total, abs=1e-11)


def test_inar_limit_values():
    assert round(inar_feld_limit(InarParams(0.05, 2.0), 0.1), 2) == 0.01
    assert round(inar_feld_limit(InarParams(0.95, 2.0), 2.8), 2) == 74.43
    assert inar_feld_limit(InarParams(0.5, 2.0), 1e-9) < 1e-15
    for p in (0.1, 0.5, 0.9, 0.95):
        tab = inar_feld(InarParams(p, 2.0), 1.0, 3, [500])
        assert tab.totals[500] == pytest.approx(inar_feld_limit(InarParams(p, 2.0), 1.0), abs=1e-8)


def test_inar_limit_linear_in_lambda():
    for p, u in [(0.3, 0.4), (0.85, 2.2)]:
        assert inar_feld_limit(InarParams(p, 4.0), u) == pytest.approx(
            2 * inar_feld_limit(InarParams(p, 2.0), u), rel=1e-14)


def test_inar_totals_increase_and_constant_share_grows():
    from fredkit.models.counts import inar_feld_components
    params = InarParams(0.7, 2.0)
    tab = inar_feld(params, 3.0, 3, 10)
    totals = [tab.totals[h] for h in tab.horizons]
    assert np.all(np.diff(totals) > 0)
    share = []
    for h in range(1, 11):
        comp = inar_feld_components(params, 3.0, h)
        share.append(comp.beta_total / comp.total([3.0]))
    assert np.all(np.diff(share) > 0)


def test_inar_requires_positive_u():
    with pytest.raises(ValidationError):
        inar_feld(InarParams(0.5, 2.0), 0.0, 3, 3)


# -- NBAR -------------------------------------------------------------------------

def test_nbar_one_step_exponent():
    model = nbar_affine(NbarParams(0.5, 2.0))
    assert model.a([1.3]) == pytest.approx([math.log(1 + 0.5 * (1 - math.exp(-1.3)))], abs=1e-15)


def test_nbar_compound_closed_form():
    params = NbarParams(0.5, 2.0)
    for h in range(1, 7):
        assert params.compound_a(1.0, h) == pytest.approx(compound_a(params.affine(), [1.0], h)[0],
                                                          abs=1e-12)


def test_nbar_mean_matches_simulation():
    params = NbarParams(0.5, 2.0)
    x = simulate(params, 3, 4, 100_000, seed=8).at(4).astype(float)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - params.mean(3.0, 4)) < 3 * se


def test_nbar_feld_matches_truncated_chain():
    mat = oracles.nbar_transition(0.5, 2.0, 200)
    for h in (1, 4):
        terms, total = oracles.truncated_feld(mat, 1.0, 3, h)
        tab = nbar_feld(NbarParams(0.5, 2.0), 1.0, 3, h)
        assert tab.terms_at(h) == pytest.approx(terms, abs=1e-10)
        assert tab.totals[h] == pytest.approx(total, abs=1e-10)


def test_nbar_low_persistence_single_term():
    tab = nbar_feld(NbarParams(1e-9, 2.0), 1.0, 3, 5)
    assert np.all(np.abs(tab.terms_at(5)[:-1]) < 1e-7)


def test_nbar_marginal_effect_decays():
    params = NbarParams(0.66, 1.69)
    coef = [nbar_feld_components(params, 1.0, h).alpha_total[0] for h in range(1, 15)]
    assert np.all(np.array(coef) > 0)
    assert np.all(np.diff(coef) < 0)


def test_nbar_pmf_is_negative_binomial():
    mat = oracles.nbar_transition(0.4, 1.5, 60)
    y = np.arange(20)
    got = np.exp(NbarParams(0.4, 1.5).log_pmf(y, 3))
    assert got == pytest.approx(mat[:20, 3], abs=1e-14)


# -- bivariate NBAR ------------------------------------------------------------------

def test_binbar_zero_argument():
    assert binbar_one_step(REF_BINBAR, 0.0, 0.0) == pytest.approx((0.0, 0.0, 0.0), abs=1e-15)


def test_binbar_decoupled_reduces_to_univariate():
    dec = BiNbarParams(0.0, 0.0, 0.5, 0.3, 2.0, 1.0, 0.0, 0.0, 1.0)
    a1, a2, _ = binbar_one_step(dec, 1.1, 0.0)
    assert a1 == pytest.approx(math.log(1 + 0.5 * (1 - math.exp(-1.1))), abs=1e-15)
    assert a2 == 0.0
    for h in (1, 3, 5):
        a1, a2, b = binbar_recursion(dec, [1.1, 0.7], h)
        one = NbarParams(0.5, 2.0)
        two = NbarParams(0.3, 1.0)
        assert a1 == pytest.approx(one.compound_a(1.1, h), abs=1e-13)
        assert a2 == pytest.approx(two.compound_a(0.7, h), abs=1e-13)


def test_binbar_decoupled_table_is_sum_of_univariate():
    dec = BiNbarParams(0.0, 0.0, 0.5, 0.3, 2.0, 1.0, 0.0, 0.0, 1.0)
    tab = binbar_feld(dec, [1.1, 0.7], [2.0, 4.0], 6)
    one = nbar_feld(NbarParams(0.5, 2.0), 1.1, 2.0, 6)
    two = nbar_feld(NbarParams(0.3, 1.0), 0.7, 4.0, 6)
    for h in tab.horizons:
        assert tab.terms_at(h) == pytest.approx(one.terms_at(h) + two.terms_at(h), abs=1e-12)


def test_binbar_recursion_base_case():
    a1, a2, b = binbar_one_step(REF_BINBAR, 0.4, 0.9)
    assert binbar_recursion(REF_BINBAR, [0.4, 0.9], 1) == pytest.approx((a1, a2, b))


def test_binbar_one_step_matches_simulation():
    params = REF_BINBAR_GEN
    y = np.array([2.0, 5.0])
    u = np.array([0.5, 0.3])
    states = np.tile(y, (100_000, 1)).astype(np.int64)
    nxt = step_from(params, states, seed=3)
    z = np.exp(-nxt @ u)
    a1, a2, b = binbar_one_step(params, *u)
    target = math.exp(-a1 * y[0] - a2 * y[1] - b)
    assert abs(z.mean() - target) < 3 * z.std(ddof=1) / math.sqrt(z.size)


def test_binbar_two_step_matches_simulation():
    params = REF_BINBAR_GEN
    u = [0.5, 0.3]
    x = simulate(params, [2, 5], 2, 100_000, seed=4).at(2)
    z = np.exp(-x @ np.asarray(u))
    a1, a2, b = binbar_recursion(params, u, 2)
    target = math.exp(-2 * a1 - 5 * a2 - b)
    assert abs(z.mean() - target) < 3 * z.std(ddof=1) / math.sqrt(z.size)


def test_binbar_var_representation():
    dec = BiNbarParams(0.0, 0.0, 0.5, 0.3, 2.0, 1.0, 0.0, 0.0, 1.0)
    C, A = binbar_var_representation(dec)
    assert A == pytest.approx(np.diag([0.5, 0.3]))
    C, A = binbar_var_representation(REF_BINBAR)
    # A = [[alpha1 sigma1 + beta1, alpha1 sigma2], [alpha2 sigma1, alpha2 sigma2 + beta2]]
    assert A == pytest.approx(np.array([[0.638150, 0.053454], [0.005025, 0.360649]]), abs=1e-6)


def test_binbar_closed_form_matches_engine():
    for u, y in [([0.5, 0.5], [0, 0]), ([2.0, 2.0], [5, 5]), ([0.1, 1.3], [3, 1])]:
        a = binbar_feld(REF_BINBAR, u, y, 8)
        b = binbar_feld_affine(REF_BINBAR, u, y, 8)
        for key in a.terms:
            assert a.terms[key] == pytest.approx(b.terms[key], abs=1e-10)


def test_binbar_monotone_in_u_and_state():
    base = binbar_feld(REF_BINBAR, [0.5, 0.5], [0, 0], 10)
    more_u = binbar_feld(REF_BINBAR, [2.0, 2.0], [0, 0], 10)
    more_y = binbar_feld(REF_BINBAR, [0.5, 0.5], [5, 5], 10)
    both = binbar_feld(REF_BINBAR, [2.0, 2.0], [5, 5], 10)
    for h in range(1, 11):
        assert both.totals[h] > base.totals[h]
        assert more_u.totals[h] > base.totals[h]
        assert more_y.totals[h] > base.totals[h]
        assert both.totals[h] > more_u.totals[h]


def test_binbar_rejects_negative_argument():
    with pytest.raises(ValidationError):
        binbar_feld(REF_BINBAR, [-0.5, 0.5], [0, 0], 3)
