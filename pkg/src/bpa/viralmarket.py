"""Competing posts on a social network mapped onto the attack model.

A user holding a post shares it to Bin(F, eta) friends. A fraction ``gamma``
of any set of users already holds each post type, so a share reaches a fresh
user with probability 1 - 2 gamma (offspring) and a holder of the rival post
with probability gamma (potential attack). A rival holder switches with
probability ``p_xy``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import BPA, BPNA, ModelParams
from .distributions import AttackSpec, BinomialOfFriends, OffspringLaw, Poisson
from .montecarlo import EstimatorConfig, ProbabilityEstimates, estimate_extinction
from .theory import TheoryReport, theory_report


@dataclass(frozen=True)
class MarketParams:
    friend_law: OffspringLaw
    eta_x: float
    eta_y: float
    gamma: float
    p_xy: float
    p_yx: float
    seeds_x: int
    seeds_y: int
    lam: float = 1.0
    joint_friend_split: bool = False

    def __post_init__(self):
        for name in ("eta_x", "eta_y", "p_xy", "p_yx"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 <= self.gamma < 0.5:
            raise ValueError(f"gamma must lie in [0, 1/2), got {self.gamma}")
        if self.seeds_x < 0 or self.seeds_y < 0:
            raise ValueError("seed counts must be nonnegative")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


def to_bpa(market: MarketParams) -> ModelParams:
    g = market.gamma
    F = market.friend_law
    return ModelParams(
        lam=market.lam,
        offspring_x=BinomialOfFriends(F, market.eta_x * (1 - 2 * g)),
        offspring_y=BinomialOfFriends(F, market.eta_y * (1 - 2 * g)),
        attack_xy=AttackSpec(BinomialOfFriends(F, market.eta_x * g), market.p_xy),
        attack_yx=AttackSpec(BinomialOfFriends(F, market.eta_y * g), market.p_yx),
        x0=market.seeds_x,
        y0=market.seeds_y,
        mode=BPA,
        joint_friend_split=market.joint_friend_split,
    )


def to_bpna(market: MarketParams) -> ModelParams:
    """Two independent cascades: shares never meet the rival post."""
    F = market.friend_law
    return ModelParams(
        lam=market.lam,
        offspring_x=BinomialOfFriends(F, market.eta_x),
        offspring_y=BinomialOfFriends(F, market.eta_y),
        x0=market.seeds_x,
        y0=market.seeds_y,
        mode=BPNA,
    )


def from_share_laws(friend_mean: float, share_x: float, share_y: float, attack_x: float,
                    attack_y: float, p_xy: float, p_yx: float, seeds_x: int, seeds_y: int,
                    lam: float = 1.0) -> ModelParams:
    """Direct-law entry point: offspring Bin(F, share_*), attack caps Bin(F, attack_*)."""
    F = Poisson(friend_mean)
    return ModelParams(
        lam=lam,
        offspring_x=BinomialOfFriends(F, share_x),
        offspring_y=BinomialOfFriends(F, share_y),
        attack_xy=AttackSpec(BinomialOfFriends(F, attack_x), p_xy),
        attack_yx=AttackSpec(BinomialOfFriends(F, attack_y), p_yx),
        x0=seeds_x,
        y0=seeds_y,
    )


def invert_shares(offspring_share: float, attack_share: float) -> tuple[float, float]:
    """(eta, gamma) with eta (1 - 2 gamma) = offspring_share and eta gamma = attack_share."""
    ratio = attack_share / offspring_share
    gamma = ratio / (1 + 2 * ratio)
    return attack_share / gamma if gamma > 0 else offspring_share, gamma


@dataclass
class ComparisonReport:
    bpa: ProbabilityEstimates
    bpna: ProbabilityEstimates
    theory_bpa: TheoryReport
    theory_bpna: TheoryReport

    def to_dict(self):
        return {
            "bpa": self.bpa.to_dict(),
            "bpna": self.bpna.to_dict(),
            "theory_bpa": self.theory_bpa.to_dict(),
            "theory_bpna": self.theory_bpna.to_dict(),
        }


def compare(market: MarketParams | ModelParams, config: EstimatorConfig) -> ComparisonReport:
    """BPA against BPNA on the same seeds.

    A :class:`MarketParams` uses the market BPNA (offspring Bin(F, eta)); a
    :class:`ModelParams` is compared with itself stripped of attack.
    """
    if isinstance(market, MarketParams):
        bpa, bpna = to_bpa(market), to_bpna(market)
    else:
        bpa, bpna = market, market.without_attack()
    return ComparisonReport(
        bpa=estimate_extinction(bpa, config),
        bpna=estimate_extinction(bpna, config),
        theory_bpa=theory_report(bpa),
        theory_bpna=theory_report(bpna),
    )


def m_star(market: MarketParams) -> tuple[float, float]:
    """Closed-form attack limits m_f eta gamma p."""
    from .distributions import mean

    mf = mean(market.friend_law)
    return mf * market.eta_x * market.gamma * market.p_xy, mf * market.eta_y * market.gamma * market.p_yx


__all__ = [
    "MarketParams",
    "ComparisonReport",
    "to_bpa",
    "to_bpna",
    "compare",
    "from_share_laws",
    "invert_shares",
    "m_star",
]
