import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpa import ModelParams
from bpa.distributions import AttackSpec, Constant, ExplicitPMF, Poisson, pgf
from bpa.tables import asymmetric_params, coexistence_params, symmetric_params
from bpa.theory import (
    asymmetric_ratio,
    bpna_probabilities,
    extinction_root,
    limit_fraction,
    limit_set,
    ratio_quadratic,
    symmetric_ratio,
    theory_report,
)

GOLDEN = (math.sqrt(5) - 1) / 2


def fixed_point_iteration(law, iters=100_000):
    """Oracle: q_{k+1} = f(q_k) from 0 converges monotonically to the smallest root."""
    q = 0.0
    for _ in range(iters):
        nxt = pgf(law, q)
        if nxt == q:
            break
        q = nxt
    return q


# -- extinction root ---------------------------------------------------------


def test_root_three_or_nothing():
    law = ExplicitPMF((0.5, 0, 0, 0.5))
    q = extinction_root(law)
    assert q == pytest.approx(GOLDEN, abs=1e-12)
    assert abs(pgf(law, q) - q) <= 1e-12


def test_root_table1_law():
    law = Poisson(1.0668)
    q = extinction_root(law)
    assert q == pytest.approx(fixed_point_iteration(law), abs=1e-9)
    assert q == pytest.approx(0.8773, abs=5e-4)
    assert abs(q**2 - 0.768) <= 0.03
    assert abs(q**4 - 0.592) <= 0.03


def test_root_small_zero_mass():
    law = ExplicitPMF((1e-6, 0.0, 1 - 1e-6))
    assert extinction_root(law) < 1e-5


def test_root_rejects_bad_laws():
    with pytest.raises(ValueError):
        extinction_root(Poisson(1.0))
    with pytest.raises(ValueError):
        extinction_root(Poisson(0.5))
    with pytest.raises(ValueError):
        extinction_root(Constant(2))  # P(xi = 0) = 0


def test_root_decreasing_in_mean():
    qs = [extinction_root(Poisson(m)) for m in (1.1, 1.5, 2, 3)]
    assert all(a > b for a, b in zip(qs, qs[1:]))
    for m, q in zip((1.1, 1.5, 2, 3), qs):
        assert abs(pgf(Poisson(m), q) - q) <= 1e-12 and 0 < q < 1


@settings(max_examples=50, deadline=None)
@given(st.floats(1.05, 8.0))
def test_root_matches_iteration(m):
    law = Poisson(m)
    assert extinction_root(law) == pytest.approx(fixed_point_iteration(law), abs=1e-8)


# -- BPNA probabilities ------------------------------------------------------


def test_bpna_probabilities_examples():
    ex, ey, es, co = bpna_probabilities(0.8773, 0.8773, 2, 2)
    assert ex == pytest.approx(0.7697, abs=1e-4)
    assert co == pytest.approx((1 - 0.7697) ** 2, abs=1e-4)
    assert es == pytest.approx(0.8773**4)
    assert bpna_probabilities(0.8773, 0.8773, 0, 2)[0] == 1.0
    assert bpna_probabilities(0.8773, 0.8773, 200, 2)[0] == pytest.approx(4e-12, rel=0.2)


# -- ratios ------------------------------------------------------------------


def test_symmetric_ratio_examples():
    assert symmetric_ratio(0.064, 0.064, 1.067)[0] == 0.5
    b, t = symmetric_ratio(3, 1, 2)
    assert (b, t) == (0.25, 0.25)
    assert symmetric_ratio(0.02, 0.02, 2)[0] == 0.5
    with pytest.raises(ValueError):
        symmetric_ratio(0, 0, 2)


@given(st.floats(1e-6, 100), st.floats(1e-6, 100))
def test_symmetric_ratio_complement(a, b):
    assert symmetric_ratio(a, b, 2)[0] + symmetric_ratio(b, a, 2)[0] == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize(
    "args, beta",
    [
        ((3.0, 2.98, 0.02, 0.02), 0.381966),
        ((300, 280, 10, 10), 0.292893),
        ((300, 290, 20, 20), 0.438447),
        ((450, 447, 20, 20), 0.481276),
    ],
)
def test_asymmetric_ratio_published_values(args, beta):
    b, psi, theta = asymmetric_ratio(*args)
    assert round(b, 6) == beta
    mx, my = args[:2]
    assert psi == pytest.approx(my - 1 + b * (mx - my))
    assert theta == pytest.approx(b * psi)


def test_asymmetric_ratio_rejects_wrong_orientation():
    with pytest.raises(ValueError):
        asymmetric_ratio(2.0, 2.0, 1, 1)
    with pytest.raises(ValueError):
        asymmetric_ratio(2.0, 3.0, 1, 1)


def test_asymmetric_ratio_tends_to_half():
    vals = [asymmetric_ratio(2.0 + d, 2.0, 0.5, 0.5)[0] for d in (1e-1, 1e-3, 1e-6)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(0.5, abs=1e-5)


asym_draws = st.tuples(
    st.floats(1.01, 500), st.floats(1e-3, 100), st.floats(1e-3, 50), st.floats(0.01, 0.99)
)


@settings(max_examples=100, deadline=None)
@given(asym_draws)
def test_asymmetric_ratio_below_half_and_sum_only(draw):
    my, d, c, split = draw
    mx = my + d
    b1 = asymmetric_ratio(mx, my, c * split, c * (1 - split))
    b2 = asymmetric_ratio(mx, my, c * (1 - split), c * split)
    # same sum, different split: results must be bit-identical
    c1, c2 = c * split + c * (1 - split), c * (1 - split) + c * split
    if c1 == c2:
        assert b1 == b2
    assert 0.0 < b1[0] < 0.5


@settings(max_examples=100, deadline=None)
@given(asym_draws)
def test_beta_a_solves_ratio_quadratic_for_balanced_attack(draw):
    my, d, c, _ = draw
    mx = my + d
    b = asymmetric_ratio(mx, my, c / 2, c / 2)[0]
    assert abs(ratio_quadratic(b, mx, my, c / 2, c / 2)) <= 1e-10 * max(1.0, d + c)


def test_displayed_sign_has_no_root_in_unit_interval():
    # with "- m*_yx" the product of the roots is negative and f(1) < 0: no root in (0, 1)
    mx, my, a = 3.0, 2.98, 0.02
    d, c = mx - my, 2 * a
    roots = np.roots([d, -(d + c), -a])
    assert not any(0 < r < 1 for r in roots.real)
    assert any(0 < r < 1 for r in np.roots([d, -(d + c), a]).real)


def test_limit_fraction_orientation():
    # y dominant: predicted x share is one minus the swapped formula
    p = coexistence_params(2.98, 3.0, 0.02, 10, 10)
    assert limit_fraction(p) == pytest.approx(1 - 0.381966, abs=1e-6)
    assert limit_fraction(coexistence_params(2.0, 2.0, 0.02, 10, 10)) == 0.5
    assert limit_fraction(symmetric_params(2, 2).without_attack()) is None


# -- limit set and report ----------------------------------------------------


def test_limit_set_symmetric():
    pts = {p.label: p for p in limit_set(symmetric_params(2, 2))}
    assert (pts["both-extinct"].psi, pts["both-extinct"].theta) == (0.0, 0.0)
    assert pts["x-only"].psi == pts["x-only"].theta == pytest.approx(0.0668)
    assert pts["coexist"].psi == pytest.approx(0.0668)
    assert pts["coexist"].theta == pytest.approx(0.0334)
    assert not pts["coexist"].conjecture


def test_theory_report_table1():
    r = theory_report(symmetric_params(2, 2))
    assert r.alpha_x == pytest.approx(0.0002 * 0.0668)
    assert r.q_star_x == pytest.approx(extinction_root(Poisson(1.0668)))
    assert r.beta_l == 0.5 and r.beta_a_l is None and not r.conjecture
    d = r.to_dict()
    assert d["limit_set"][0]["label"] == "both-extinct"


def test_theory_report_asymmetric_flags_conjecture():
    r = theory_report(asymmetric_params(2, 2))
    assert r.conjecture and r.beta_a_l is not None and r.beta_a_l < 0.5
    assert r.beta_l is None


def test_theory_report_table5_row():
    p = coexistence_params(3.0, 2.98, 0.02, 10**5, 161_812)
    assert round(theory_report(p).beta_a_l, 3) == 0.382


def test_theory_handles_subcritical_type():
    p = ModelParams(lam=1.0, offspring_x=Poisson(0.8), offspring_y=Poisson(1.5),
                    attack_xy=AttackSpec(Poisson(1), 0.1), attack_yx=AttackSpec(Poisson(1), 0.1))
    r = theory_report(p)
    assert r.q_star_x == 1.0 and 0 < r.q_star_y < 1
