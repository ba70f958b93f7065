import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpa import ModelParams
from bpa.distributions import (
    AttackSpec,
    Binomial,
    BinomialOfFriends,
    Constant,
    ExplicitPMF,
    Poisson,
    PoissonThinned,
    Zero,
    attack_mean,
    attack_mean_limit,
    mean,
    pgf,
    prob_zero,
    quantile,
    sample_attack,
    sample_offspring,
    second_moment,
    validate_assumptions,
)
from bpa.tables import symmetric_params

TABLE1_OFFSPRING = BinomialOfFriends(Poisson(4), 0.2667)
TABLE1_ATTACK = AttackSpec(BinomialOfFriends(Poisson(4), 0.053), 0.3)


# -- laws used by the property tests -----------------------------------------

pmf_laws = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8).filter(lambda w: sum(w) > 0.05).map(
    lambda w: ExplicitPMF(tuple(v / sum(w) for v in w))
)
laws = st.one_of(
    st.builds(Poisson, st.floats(0.0, 6.0)),
    st.builds(Binomial, st.integers(0, 12), st.floats(0.0, 1.0)),
    st.builds(Constant, st.integers(0, 6)),
    st.builds(PoissonThinned, st.floats(0.1, 8.0), st.floats(0.0, 1.0)),
    st.builds(BinomialOfFriends, st.builds(Poisson, st.floats(0.1, 8.0)), st.floats(0.0, 1.0)),
    st.builds(BinomialOfFriends, pmf_laws, st.floats(0.0, 1.0)),
    pmf_laws,
)


# -- deterministic examples --------------------------------------------------


def test_degenerate_samples():
    rng = np.random.default_rng(0)
    assert all(sample_offspring(Constant(2), rng) == 2 for _ in range(100))
    assert all(sample_offspring(Zero(), rng) == 0 for _ in range(100))


def test_means():
    assert mean(Constant(3)) == 3
    assert mean(TABLE1_OFFSPRING) == pytest.approx(1.0668, abs=1e-12)
    assert mean(ExplicitPMF((0.5, 0, 0, 0.5))) == pytest.approx(1.5)
    assert mean(Zero()) == 0


def test_pmf_must_sum_to_one():
    with pytest.raises(ValueError):
        ExplicitPMF((0.5, 0.4))
    with pytest.raises(ValueError):
        ExplicitPMF((1.2, -0.2))


def test_poisson_thinning_identity():
    a = BinomialOfFriends(Poisson(4), 0.2667)
    b = PoissonThinned(4, 0.2667)
    for s in np.linspace(0, 1, 11):
        assert pgf(a, s) == pytest.approx(math.exp(1.0668 * (s - 1)), rel=1e-13)
        assert pgf(b, s) == pytest.approx(pgf(a, s), rel=1e-13)


def test_binomial_of_pmf_friends_is_mixture():
    # F uniform on {0, 1, 2}; Bin(F, 1/2) has P(0) = (1 + 1/2 + 1/4) / 3
    law = BinomialOfFriends(ExplicitPMF((1 / 3, 1 / 3, 1 / 3)), 0.5)
    assert prob_zero(law) == pytest.approx(1.75 / 3)
    assert mean(law) == pytest.approx(0.5)


def test_pgf_endpoints_and_domain():
    for law in (TABLE1_OFFSPRING, Binomial(5, 0.3), ExplicitPMF((0.2, 0.3, 0.5)), Constant(2)):
        assert pgf(law, 1.0) == pytest.approx(1.0)
        assert pgf(law, 0.0) == pytest.approx(prob_zero(law))
    with pytest.raises(ValueError):
        pgf(TABLE1_OFFSPRING, 1.5)
    with pytest.raises(ValueError):
        pgf(TABLE1_OFFSPRING, -0.1)


def test_pgf_derivative_central_difference():
    mu = 1.0668
    h = 1e-5
    # f(s) = exp(mu (s - 1)) is analytic, so evaluate the central difference straddling 1
    f = lambda s: math.exp(mu * (s - 1))  # noqa: E731
    assert pgf(TABLE1_OFFSPRING, 1 - h) == pytest.approx(f(1 - h), rel=1e-13)
    deriv = (f(1 + h) - pgf(TABLE1_OFFSPRING, 1 - h)) / (2 * h)
    assert abs(deriv - mu) / mu <= 1e-6


def test_sample_mean_table1_offspring():
    rng = np.random.default_rng(1)
    from bpa.distributions import _canon

    draws = _canon(TABLE1_OFFSPRING).sample(rng, 10**6)
    assert abs(draws.mean() - 1.067) <= 0.01


def test_attack_examples():
    rng = np.random.default_rng(2)
    assert sample_attack(TABLE1_ATTACK, 0, rng) == 0
    assert sample_attack(AttackSpec(Constant(2), 1.0), 10, rng) == 2
    assert attack_mean(TABLE1_ATTACK, 0) == 0
    assert attack_mean(AttackSpec(Constant(2), 0.5), 1) == pytest.approx(0.5)
    assert attack_mean(TABLE1_ATTACK, 10**6) == pytest.approx(0.0636, abs=1e-10)


def test_attack_limits():
    assert attack_mean_limit(AttackSpec(Zero(), 0.7)) == 0
    assert attack_mean_limit(TABLE1_ATTACK) == pytest.approx(0.0636)
    assert attack_mean_limit(AttackSpec(Constant(5), 0.2)) == pytest.approx(1.0)


def test_attack_sample_mean_large_population():
    # draw the cap vectorised through the same canonical law, then thin
    rng = np.random.default_rng(3)
    from bpa.distributions import _canon

    caps = _canon(TABLE1_ATTACK.max_attack).sample(rng, 10**6)
    z = rng.binomial(np.minimum(caps, 10**6), 0.3)
    assert abs(z.mean() - 0.064) <= 0.002
    # the scalar sampler agrees on a smaller run
    rng = np.random.default_rng(4)
    s = np.array([sample_attack(TABLE1_ATTACK, 10**6, rng) for _ in range(20000)])
    assert abs(s.mean() - 0.0636) <= 4 * s.std() / math.sqrt(len(s))


def test_truncated_mean_oracle():
    # E[min(xi, y)] against a direct sum over the pmf
    from scipy import stats

    spec = AttackSpec(Poisson(3.0), 1.0)
    for y in range(0, 12):
        k = np.arange(0, 60)
        direct = float(np.sum(np.minimum(k, y) * stats.poisson.pmf(k, 3.0)))
        assert attack_mean(spec, y) == pytest.approx(direct, abs=1e-12)


def test_second_moments():
    assert second_moment(Poisson(2.0)) == pytest.approx(6.0)
    assert second_moment(Binomial(4, 0.5)) == pytest.approx(5.0)
    assert second_moment(ExplicitPMF((0.5, 0, 0.5))) == pytest.approx(2.0)


# -- assumption checks -------------------------------------------------------


def test_assumptions_table1():
    rep = validate_assumptions(symmetric_params(2, 2))
    assert rep.a1_ok and rep.a2_ok and rep.zero_mass_ok
    assert rep.m_x == pytest.approx(1.0668)
    assert rep.m_xy_star == pytest.approx(0.0636)


def test_assumptions_zero_share_fails_a1():
    p = ModelParams(lam=1.0, offspring_x=BinomialOfFriends(Poisson(4), 0.0),
                    offspring_y=BinomialOfFriends(Poisson(4), 0.2667), x0=1, y0=1)
    assert not validate_assumptions(p).a1_ok


def test_assumptions_bernoulli_attacks_pass_a4():
    bern = AttackSpec(ExplicitPMF((0.6, 0.4)), 0.5)
    p = ModelParams(lam=1.0, offspring_x=Poisson(2.0), offspring_y=Poisson(2.0),
                    attack_xy=bern, attack_yx=bern, x0=1, y0=1)
    rep = validate_assumptions(p)
    assert rep.a4_ok
    assert rep.a4_violation_grid == []


def test_unequal_bernoulli_attacks_break_a4_on_the_diagonal():
    # u m_uv(v) - v m_vu(u) = u (c_uv - c_vu) < 0 at u = v when the weaker side is larger
    p = ModelParams(lam=1.0, offspring_x=Poisson(2.0), offspring_y=Poisson(2.0),
                    attack_xy=AttackSpec(ExplicitPMF((0.6, 0.4)), 0.5),
                    attack_yx=AttackSpec(ExplicitPMF((0.6, 0.4)), 0.3), x0=1, y0=1)
    rep = validate_assumptions(p, a4_bound=20)
    assert not rep.a4_ok
    assert (1, 1) in [tuple(v) for v in rep.a4_violation_grid]


def test_assumption_report_never_raises_on_violation():
    p = ModelParams(lam=1.0, offspring_x=Poisson(0.5), offspring_y=Constant(2),
                    attack_xy=AttackSpec(Constant(50), 1.0), attack_yx=AttackSpec(Zero(), 0.0))
    rep = validate_assumptions(p, a4_bound=50)
    assert not rep.a1_ok
    assert not rep.zero_mass_ok  # Constant(2) never produces zero
    assert not rep.a4_ok and rep.a4_violation_count > 0


# -- properties --------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(laws)
def test_pgf_monotone_and_convex(law):
    s = np.linspace(0, 1, 100)
    f = np.array([pgf(law, v) for v in s])
    assert np.all(np.diff(f) >= -1e-12)
    assert np.all(f[:-2] - 2 * f[1:-1] + f[2:] >= -1e-10)


@settings(max_examples=60, deadline=None)
@given(laws)
def test_mean_is_pgf_slope_at_one(law):
    h = 1e-7
    slope = (pgf(law, 1.0) - pgf(law, 1.0 - h)) / h
    m = mean(law)
    # one-sided difference error is h f''(1) / 2 = h E[xi (xi - 1)] / 2
    assert abs(slope - m) <= max(1e-5 * m, h * second_moment(law) + 1e-7)


@pytest.mark.parametrize("law", [TABLE1_OFFSPRING, Binomial(7, 0.3), ExplicitPMF((0.1, 0.2, 0.3, 0.4)), Poisson(5.5)])
def test_sample_mean_within_four_standard_errors(law):
    from bpa.distributions import _canon

    rng = np.random.default_rng(11)
    draws = _canon(law).sample(rng, 10**6)
    se = math.sqrt((second_moment(law) - mean(law) ** 2) / len(draws))
    assert abs(draws.mean() - mean(law)) <= 4 * se


@settings(max_examples=40, deadline=None)
@given(laws, st.floats(0.0, 1.0))
def test_attack_mean_monotone_and_converges(law, p):
    spec = AttackSpec(law, p)
    ys = np.arange(0, 200)
    m = attack_mean(spec, ys)
    assert np.all(np.diff(m) >= -1e-15)
    far = quantile(law, 0.9999) + 1
    assert abs(attack_mean(spec, far) - attack_mean_limit(spec)) <= 1e-3 * max(attack_mean_limit(spec), 1)


@pytest.mark.parametrize("y", [0, 1, 2, 5])
def test_sample_attack_never_exceeds_opposite(y):
    rng = np.random.default_rng(y)
    spec = AttackSpec(Poisson(3.0), 0.9)
    draws = [sample_attack(spec, y, rng) for _ in range(10**5)]
    assert max(draws) <= y
    assert min(draws) >= 0
