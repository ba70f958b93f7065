"""Offspring and attack laws, their moments and generating functions.

Every law reduces to one of four canonical forms (constant, Poisson, binomial,
finite table). Binomial thinning of a Poisson or binomial friend count is done
in closed form, so ``BinomialOfFriends(Poisson(4), 0.2667)`` is exactly
``Poisson(1.0668)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Union

import numpy as np
from scipy import special, stats

if TYPE_CHECKING:
    from .core import ModelParams

PMF_SUM_TOL = 1e-12
TAIL_TOL = 1e-12


# ---------------------------------------------------------------------------
# canonical representation


@dataclass(frozen=True)
class Canonical:
    """Reduced form of a count law: ``kind`` is constant/poisson/binomial/table."""

    kind: str
    mu: float = 0.0  # Poisson mean or binomial success probability
    n: int = 0  # constant value or binomial trial count
    probs: tuple = ()

    def mean(self) -> float:
        if self.kind == "constant":
            return float(self.n)
        if self.kind == "poisson":
            return self.mu
        if self.kind == "binomial":
            return self.n * self.mu
        return float(np.dot(np.arange(len(self.probs)), self.probs))

    def second_moment(self) -> float:
        if self.kind == "constant":
            return float(self.n) ** 2
        if self.kind == "poisson":
            return self.mu + self.mu**2
        if self.kind == "binomial":
            return self.n * self.mu * (1 - self.mu) + (self.n * self.mu) ** 2
        k = np.arange(len(self.probs))
        return float(np.dot(k * k, self.probs))

    def pgf(self, s: float) -> float:
        if self.kind == "constant":
            return s**self.n
        if self.kind == "poisson":
            return math.exp(self.mu * (s - 1.0))
        if self.kind == "binomial":
            return (1.0 - self.mu + self.mu * s) ** self.n
        return float(np.polynomial.polynomial.polyval(s, self.probs))

    def pmf(self, k):
        k = np.asarray(k)
        if self.kind == "constant":
            return (k == self.n).astype(float)
        if self.kind == "poisson":
            return stats.poisson.pmf(k, self.mu)
        if self.kind == "binomial":
            return stats.binom.pmf(k, self.n, self.mu)
        p = np.asarray(self.probs)
        inside = (k >= 0) & (k < len(p))
        return np.where(inside, p[np.clip(k, 0, len(p) - 1)], 0.0)

    def sf(self, k):
        """P(xi > k)."""
        k = np.asarray(k)
        if self.kind == "constant":
            return (k < self.n).astype(float)
        if self.kind == "poisson":
            return stats.poisson.sf(k, self.mu)
        if self.kind == "binomial":
            return stats.binom.sf(k, self.n, self.mu)
        tail = np.concatenate([1.0 - np.cumsum(self.probs), [0.0]])
        tail = np.clip(tail, 0.0, 1.0)
        return np.where(k < 0, 1.0, tail[np.clip(k, 0, len(self.probs))])

    def ppf(self, q: float) -> int:
        if self.kind == "constant":
            return self.n
        if self.kind == "poisson":
            return int(stats.poisson.ppf(q, self.mu))
        if self.kind == "binomial":
            return int(stats.binom.ppf(q, self.n, self.mu))
        cdf = np.cumsum(self.probs)
        return int(min(np.searchsorted(cdf, q - 1e-15), len(cdf) - 1))

    def support_max(self) -> float:
        if self.kind == "constant":
            return float(self.n)
        if self.kind == "binomial":
            return float(self.n)
        if self.kind == "table":
            nz = np.nonzero(self.probs)[0]
            return float(nz[-1]) if len(nz) else 0.0
        return math.inf

    def truncation_point(self) -> int:
        """Smallest K with P(xi > K) < TAIL_TOL (finite support: the max)."""
        top = self.support_max()
        if math.isfinite(top):
            return int(top)
        return int(stats.poisson.isf(TAIL_TOL, self.mu)) + 1

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "constant":
            return self.n if size is None else np.full(size, self.n, dtype=np.int64)
        if self.kind == "poisson":
            return rng.poisson(self.mu, size)
        if self.kind == "binomial":
            return rng.binomial(self.n, self.mu, size)
        cdf = np.cumsum(self.probs)
        u = rng.random(size)
        out = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
        return int(out) if size is None else out.astype(np.int64)


def _thin(c: Canonical, p: float) -> Canonical:
    """Law of Bin(xi, p) given xi ~ c."""
    if p == 0.0:
        return Canonical("constant", n=0)
    if c.kind == "constant":
        return Canonical("binomial", mu=p, n=c.n) if c.n > 0 else c
    if c.kind == "poisson":
        return Canonical("poisson", mu=c.mu * p)
    if c.kind == "binomial":
        return Canonical("binomial", mu=c.mu * p, n=c.n)
    # finite mixture of binomials
    probs = np.zeros(len(c.probs))
    for k, w in enumerate(c.probs):
        if w > 0:
            j = np.arange(k + 1)
            # direct form: scipy's binom.pmf overflows for subnormal p
            probs[: k + 1] += w * special.comb(k, j) * p**j * (1.0 - p) ** (k - j)
    return Canonical("table", probs=tuple(float(v) for v in probs))


# ---------------------------------------------------------------------------
# public law types


@dataclass(frozen=True)
class Zero:
    def canonical(self) -> Canonical:
        return Canonical("constant", n=0)


@dataclass(frozen=True)
class Constant:
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"Constant law needs a nonnegative integer, got {self.k}")

    def canonical(self) -> Canonical:
        return Canonical("constant", n=int(self.k))


@dataclass(frozen=True)
class Poisson:
    mean: float

    def __post_init__(self):
        if not (self.mean >= 0 and math.isfinite(self.mean)):
            raise ValueError(f"Poisson mean must be finite and >= 0, got {self.mean}")

    def canonical(self) -> Canonical:
        if self.mean == 0:
            return Canonical("constant", n=0)
        return Canonical("poisson", mu=float(self.mean))


@dataclass(frozen=True)
class Binomial:
    n: int
    p: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0 or not 0.0 <= self.p <= 1.0:
            raise ValueError(f"invalid Binomial({self.n}, {self.p})")

    def canonical(self) -> Canonical:
        return _thin(Canonical("constant", n=int(self.n)), float(self.p))


@dataclass(frozen=True)
class ExplicitPMF:
    probs: tuple

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if not probs or min(probs) < 0 or abs(sum(probs) - 1.0) > PMF_SUM_TOL:
            raise ValueError("ExplicitPMF probabilities must be >= 0 and sum to 1")

    def canonical(self) -> Canonical:
        return Canonical("table", probs=self.probs)


@dataclass(frozen=True)
class BinomialOfFriends:
    """Bin(F, share_prob) where F follows ``friend_law``."""

    friend_law: "OffspringLaw"
    share_prob: float

    def __post_init__(self):
        if not 0.0 <= self.share_prob <= 1.0:
            raise ValueError(f"share_prob must lie in [0, 1], got {self.share_prob}")

    def canonical(self) -> Canonical:
        return _thin(self.friend_law.canonical(), float(self.share_prob))


@dataclass(frozen=True)
class PoissonThinned:
    friend_mean: float
    share_prob: float

    def __post_init__(self):
        if not self.friend_mean > 0 or not 0.0 <= self.share_prob <= 1.0:
            raise ValueError("PoissonThinned needs friend_mean > 0 and share_prob in [0, 1]")

    def canonical(self) -> Canonical:
        return BinomialOfFriends(Poisson(self.friend_mean), self.share_prob).canonical()


OffspringLaw = Union[Zero, Constant, Poisson, Binomial, ExplicitPMF, BinomialOfFriends, PoissonThinned]
CountLaw = OffspringLaw


@dataclass(frozen=True)
class AttackSpec:
    """Attack of one type on the other: draw ``max_attack`` then thin by ``resist_prob``.

    ``resist_prob`` is the per-individual probability that an attack succeeds.
    """

    max_attack: OffspringLaw = field(default_factory=Zero)
    resist_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.resist_prob <= 1.0:
            raise ValueError(f"resist_prob must lie in [0, 1], got {self.resist_prob}")

    @property
    def is_zero(self) -> bool:
        c = self.max_attack.canonical()
        return self.resist_prob == 0.0 or (c.kind == "constant" and c.n == 0)


# ---------------------------------------------------------------------------
# operations


@lru_cache(maxsize=256)
def _canon(law) -> Canonical:
    return law.canonical()


def sample_offspring(law: OffspringLaw, rng: np.random.Generator) -> int:
    return int(_canon(law).sample(rng))


def sample_attack(spec: AttackSpec, opposite_count: int, rng: np.random.Generator) -> int:
    """Bin(min{xi_ij, opposite_count}, resist_prob); never exceeds ``opposite_count``."""
    cap = int(_canon(spec.max_attack).sample(rng))
    k = min(cap, opposite_count)
    if k <= 0:
        return 0
    return int(rng.binomial(k, spec.resist_prob))


def mean(law: OffspringLaw) -> float:
    return _canon(law).mean()


def second_moment(law: OffspringLaw) -> float:
    return _canon(law).second_moment()


def prob_zero(law: OffspringLaw) -> float:
    return float(_canon(law).pmf(0))


def pgf(law: OffspringLaw, s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"pgf argument must lie in [0, 1], got {s}")
    return _canon(law).pgf(float(s))


def quantile(law: OffspringLaw, q: float) -> int:
    return _canon(law).ppf(q)


@lru_cache(maxsize=256)
def _tail_table(law) -> tuple[np.ndarray, np.ndarray]:
    """(sf[k], cumulative sum of sf below k) for k up to the truncation point."""
    c = _canon(law)
    K = c.truncation_point()
    sf = np.asarray(c.sf(np.arange(K + 1)), dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(sf)])
    sf.setflags(write=False)
    cum.setflags(write=False)
    return sf, cum


def truncated_mean(law: OffspringLaw, y) -> float | np.ndarray:
    """E[min{xi, y}] = sum_{k < y} P(xi > k); real ``y`` interpolates linearly."""
    sf, cum = _tail_table(law)
    K = len(sf) - 1
    y = np.asarray(y, dtype=float)
    y = np.maximum(y, 0.0)
    fl = np.floor(np.minimum(y, K + 1)).astype(np.int64)
    frac = np.where(y < K + 1, y - fl, 0.0)
    out = cum[fl] + frac * sf[np.minimum(fl, K)]
    return float(out) if out.ndim == 0 else out


def attack_mean(spec: AttackSpec, opposite_count) -> float | np.ndarray:
    """Expected successful attacks against a population of ``opposite_count``.

    Exact for every supported law (all reduce to tractable PMFs); the tail is
    cut where P(xi > k) < 1e-12.
    """
    if spec.is_zero:
        y = np.asarray(opposite_count, dtype=float)
        return 0.0 if y.ndim == 0 else np.zeros_like(y)
    return spec.resist_prob * truncated_mean(spec.max_attack, opposite_count)


def attack_mean_limit(spec: AttackSpec) -> float:
    return spec.resist_prob * mean(spec.max_attack)


# ---------------------------------------------------------------------------
# assumption checks


@dataclass
class AssumptionReport:
    m_x: float
    m_y: float
    second_moments: tuple  # E[xi_x^2], E[xi_y^2], E[xi_xy^2], E[xi_yx^2]
    m_xy_star: float
    m_yx_star: float
    a1_ok: bool
    a2_ok: bool
    a3_ok: bool
    a4_ok: bool
    zero_mass_ok: bool
    a3_params: dict  # kappa_xy, kappa_yx, x_bar, y_bar
    a3_violations: list = field(default_factory=list)
    a4_violation_grid: list = field(default_factory=list)
    a4_violation_count: int = 0

    def to_dict(self) -> dict:
        return {
            "m_x": self.m_x,
            "m_y": self.m_y,
            "second_moments": list(self.second_moments),
            "m_xy_star": self.m_xy_star,
            "m_yx_star": self.m_yx_star,
            "a1_ok": self.a1_ok,
            "a2_ok": self.a2_ok,
            "a3_ok": self.a3_ok,
            "a4_ok": self.a4_ok,
            "zero_mass_ok": self.zero_mass_ok,
            "a3_params": dict(self.a3_params),
            "a3_violations": [list(v) for v in self.a3_violations],
            "a4_violation_grid": [list(v) for v in self.a4_violation_grid],
            "a4_violation_count": self.a4_violation_count,
        }


def _a3_check(spec: AttackSpec, label: str):
    """Piecewise-linear sandwich of m_ij(.) with estimated kappa and bar-j."""
    m_star = attack_mean_limit(spec)
    if m_star == 0.0:
        return 0.0, 0, []
    j_bar = max(quantile(spec.max_attack, 0.999), 1)
    kappa = m_star / j_bar
    grid = np.arange(1, j_bar + 1)
    m_j = attack_mean(spec, grid)
    # percentile truncation discards this much of m*; grant it as slack
    slack = m_star - float(attack_mean(spec, j_bar)) + 1e-12
    lower_bad = kappa * np.minimum(grid, j_bar) > m_j + slack
    upper_bad = m_j > m_star + 1e-12
    bad = [(label, int(j)) for j in grid[lower_bad | upper_bad]]
    return kappa, j_bar, bad


def _a4_check(params: ModelParams, bound: int, keep: int = 100):
    grid = np.arange(1, bound + 1)
    m_xy = attack_mean(params.attack_xy, grid)
    m_yx = attack_mean(params.attack_yx, grid)
    u = grid[:, None]
    v = grid[None, :]
    valid = u >= v
    # x is the larger population (u) in the first orientation, y in the second
    gap_x_max = u * m_xy[None, :] - v * m_yx[:, None]
    gap_y_max = u * m_yx[None, :] - v * m_xy[:, None]
    bad = valid & ((gap_x_max < -1e-12) | (gap_y_max < -1e-12))
    ui, vi = np.nonzero(bad)
    count = len(ui)
    pairs = [(int(grid[a]), int(grid[b])) for a, b in zip(ui[:keep], vi[:keep])]
    return count == 0, pairs, count


def validate_assumptions(params: ModelParams, a4_bound: int = 1000) -> AssumptionReport:
    """Diagnose A.1-A.4 for a configuration. Never raises on a violation.

    The A.4 grid horizon of 1000 is a heuristic: the infimum runs over all
    u >= 1, which no finite check can settle.
    """
    m_x = mean(params.offspring_x)
    m_y = mean(params.offspring_y)
    laws = (
        params.offspring_x,
        params.offspring_y,
        params.attack_xy.max_attack,
        params.attack_yx.max_attack,
    )
    second = tuple(second_moment(law) for law in laws)
    a1 = bool(math.isfinite(m_x) and math.isfinite(m_y) and m_x > 1 and m_y > 1)
    a2 = all(math.isfinite(v) for v in second)
    p0 = (prob_zero(params.offspring_x), prob_zero(params.offspring_y))
    zero_ok = all(0.0 < p < 1.0 for p in p0)
    k_xy, y_bar, bad_xy = _a3_check(params.attack_xy, "xy")
    k_yx, x_bar, bad_yx = _a3_check(params.attack_yx, "yx")
    a4_ok, a4_pairs, a4_count = _a4_check(params, a4_bound)
    return AssumptionReport(
        m_x=m_x,
        m_y=m_y,
        second_moments=second,
        m_xy_star=attack_mean_limit(params.attack_xy),
        m_yx_star=attack_mean_limit(params.attack_yx),
        a1_ok=a1,
        a2_ok=a2,
        a3_ok=not (bad_xy or bad_yx),
        a4_ok=a4_ok,
        zero_mass_ok=zero_ok,
        a3_params={"kappa_xy": k_xy, "kappa_yx": k_yx, "x_bar": x_bar, "y_bar": y_bar},
        a3_violations=bad_xy + bad_yx,
        a4_violation_grid=a4_pairs,
        a4_violation_count=a4_count,
    )
