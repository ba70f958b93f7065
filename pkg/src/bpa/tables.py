"""Parameter presets and runners that lay results out like the published tables.

Reduced scale is the default so every table finishes in minutes; ``full=True``
restores 3200 replications / 1000 paths, and for the co-existence table uses
seed sizes at the published scale with 10^7 transitions (the published
transition counts of ~10^9 are out of reach).

The co-existence tables do not state their laws; Poisson offspring at the given
means and Poisson attack caps with mean m_c* (every attack succeeds) stand in.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import ModelParams, StopRule
from .distributions import AttackSpec, BinomialOfFriends, Poisson
from .montecarlo import EstimatorConfig, estimate_extinction, estimate_limit_fraction
from .theory import limit_fraction

LAMBDA = 0.0002
FRIENDS = Poisson(4)
TIME_HORIZON = 1e7
SURVIVAL_CAP = 10**4


def symmetric_params(x0: int, y0: int) -> ModelParams:
    """F ~ Poisson(4), offspring Bin(F, 0.2667), attack caps Bin(F, 0.053), p = 0.3."""
    return ModelParams(
        lam=LAMBDA,
        offspring_x=BinomialOfFriends(FRIENDS, 0.2667),
        offspring_y=BinomialOfFriends(FRIENDS, 0.2667),
        attack_xy=AttackSpec(BinomialOfFriends(FRIENDS, 0.053), 0.3),
        attack_yx=AttackSpec(BinomialOfFriends(FRIENDS, 0.053), 0.3),
        x0=x0,
        y0=y0,
    )


def asymmetric_params(x0: int, y0: int) -> ModelParams:
    """As :func:`symmetric_params` but x has offspring Bin(F, 0.3325), caps Bin(F, 0.0667)."""
    return ModelParams(
        lam=LAMBDA,
        offspring_x=BinomialOfFriends(FRIENDS, 0.3325),
        offspring_y=BinomialOfFriends(FRIENDS, 0.2667),
        attack_xy=AttackSpec(BinomialOfFriends(FRIENDS, 0.0667), 0.3),
        attack_yx=AttackSpec(BinomialOfFriends(FRIENDS, 0.053), 0.3),
        x0=x0,
        y0=y0,
    )


def coexistence_params(mx: float, my: float, mc: float, x0: int, y0: int) -> ModelParams:
    return ModelParams(
        lam=1.0,
        offspring_x=Poisson(mx),
        offspring_y=Poisson(my),
        attack_xy=AttackSpec(Poisson(mc), 1.0),
        attack_yx=AttackSpec(Poisson(mc), 1.0),
        x0=x0,
        y0=y0,
    )


def extinction_stop() -> StopRule:
    return StopRule(time_horizon=TIME_HORIZON, survival_cap=SURVIVAL_CAP)


@dataclass(frozen=True)
class Table:
    columns: tuple
    rows: list


def _extinction_row(params, reps, seed, prefix=""):
    est = estimate_extinction(params, EstimatorConfig(reps, seed, extinction_stop()))
    return {
        prefix + "q_s": est.q_s.point,
        prefix + "q_x": est.q_x.point,
        prefix + "q_y": est.q_y.point,
        prefix + "p": est.p_coexist.point,
    }


def _with_without(maker, seeds, reps, seed, first="x0"):
    rows = []
    for a, b in seeds:
        p = maker(a, b)
        row = {first: a if first == "x0" else b}
        row.update(_extinction_row(p, reps, seed))
        row.update(_extinction_row(p.without_attack(), reps, seed, "bpna_"))
        rows.append(row)
    cols = (first, "q_s", "q_x", "q_y", "p", "bpna_q_s", "bpna_q_x", "bpna_q_y", "bpna_p")
    return Table(cols, rows)


def table1(full=False, seed=0, replications=None) -> Table:
    reps = replications or (3200 if full else 400)
    return _with_without(symmetric_params, [(x, 2) for x in (2, 4, 10, 16, 30)], reps, seed)


def table2(full=False, seed=0, replications=None) -> Table:
    reps = replications or (3200 if full else 200)
    rows = []
    for x0 in (200, 210, 220, 250):
        row = {"x0": x0}
        row.update(_extinction_row(symmetric_params(x0, 200), reps, seed))
        rows.append(row)
    return Table(("x0", "q_s", "q_x", "q_y", "p"), rows)


def table3(full=False, seed=0, replications=None) -> Table:
    reps = replications or (3200 if full else 200)
    rows = []
    for y0 in (105, 300, 450, 500):
        row = {"y0": y0}
        row.update(_extinction_row(asymmetric_params(100, y0), reps, seed))
        rows.append(row)
    return Table(("y0", "q_s", "q_x", "q_y", "p"), rows)


def table4(full=False, seed=0, replications=None) -> Table:
    reps = replications or (3200 if full else 400)
    return _with_without(asymmetric_params, [(x, 2) for x in (2, 6, 8, 10)], reps, seed)


# x0, x0/y0, m_x, m_y at published scale
TABLE5_ROWS = [
    (101_000, 1.005, 2.9998, 3.0),
    (1_000_000, 1.0, 2.0, 2.0),
    (1_000_000, 0.618, 3.0, 2.98),
    (1_000_000, 0.618, 2.92, 2.90),
]
TABLE5_MC = 0.02


def table5(full=False, seed=0, replications=None) -> Table:
    scale = 1.0 if full else 0.01
    N = 10**7 if full else 2 * 10**5
    paths = replications or (20 if full else 10)
    rows = []
    for x0, ratio, mx, my in TABLE5_ROWS:
        x0s = max(int(round(x0 * scale)), 1)
        y0s = max(int(round(x0s / ratio)), 1)
        p = coexistence_params(mx, my, TABLE5_MC, x0s, y0s)
        beta = limit_fraction(p)
        study = estimate_limit_fraction(p, EstimatorConfig(paths, seed, StopRule(max_transitions=N)), beta)
        rows.append({"x0": x0s, "x0_over_y0": ratio, "m_x": mx, "m_y": my, "N": N,
                     "X_N": study.mean_x, "beta": beta, "X_N_over_S_N": study.mean_fraction})
    return Table(("x0", "x0_over_y0", "m_x", "m_y", "N", "X_N", "beta", "X_N_over_S_N"), rows)


# m_x, m_y, m_c*, X(0), Y(0)
TABLE6_ROWS = [
    (300, 300, 10, 2500, 3001),
    (300, 300, 10, 3000, 3001),
    (300, 300, 10, 3000, 3601),
    (300, 300, 30, 3000, 3601),
    (300, 280, 10, 3000, 8692),
    (300, 290, 20, 3000, 4611),
    (450, 447, 20, 2500, 3001),
]


def table6_row(mx, my, mc, x0, y0, paths=1000, N=10**4, seed=0, band=0.05):
    p = coexistence_params(mx, my, mc, x0, y0)
    beta = limit_fraction(p)
    study = estimate_limit_fraction(p, EstimatorConfig(paths, seed, StopRule(max_transitions=N)), beta, band)
    return beta, study


def table6(full=False, seed=0, replications=None) -> Table:
    paths = replications or (1000 if full else 200)
    rows = []
    for mx, my, mc, x0, y0 in TABLE6_ROWS:
        beta, study = table6_row(mx, my, mc, x0, y0, paths=paths, seed=seed)
        rows.append({"m_x": mx, "m_y": my, "m_c": mc, "x0": x0, "y0": y0,
                     "beta": beta, "pct_in": 100.0 * study.within_band_share})
    return Table(("m_x", "m_y", "m_c", "x0", "y0", "beta", "pct_in"), rows)


TABLES = {1: table1, 2: table2, 3: table3, 4: table4, 5: table5, 6: table6}
