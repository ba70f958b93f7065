"""Closed-form quantities: growth rates, extinction roots, BPNA probabilities,
and the limiting X/S ratios at co-existence."""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass
from typing import Optional

from scipy import optimize

from .core import ModelParams
from .distributions import OffspringLaw, attack_mean_limit, mean, pgf, prob_zero

ROOT_DELTA = 1e-9
ROOT_TOL = 1e-12
SYMMETRY_TOL = 1e-9


def extinction_root(law: OffspringLaw) -> float:
    """Smallest fixed point of the PGF, found by bisection on [0, 1 - 1e-9].

    Convexity of the PGF gives a single sign change of f(s) - s there when the
    law is supercritical.
    """
    m = mean(law)
    p0 = prob_zero(law)
    if not m > 1.0:
        raise ValueError(f"extinction root in [0, 1) needs mean > 1, got {m}")
    if not 0.0 < p0 < 1.0:
        raise ValueError(f"extinction root needs 0 < P(xi = 0) < 1, got {p0}")

    def g(s):
        return pgf(law, s) - s

    hi = 1.0 - ROOT_DELTA
    if g(hi) >= 0.0:
        raise ValueError("no sign change below 1; mean too close to 1 for the bracket")
    q = optimize.bisect(g, 0.0, hi, xtol=1e-16, rtol=4 * sys.float_info.epsilon, maxiter=200)
    if abs(g(q)) > ROOT_TOL or not 0.0 < q < 1.0:
        raise RuntimeError(f"bisection ended at {q} with residual {g(q)}")
    return q


def bpna_probabilities(q_star_x: float, q_star_y: float, x0: int, y0: int):
    """Without attack the types are independent branching processes.

    Returns (P(x dies), P(y dies), P(both die), P(both survive)).
    """
    ex = q_star_x**x0
    ey = q_star_y**y0
    return ex, ey, ex * ey, (1.0 - ex) * (1.0 - ey)


def symmetric_ratio(mxy_star: float, myx_star: float, m: float) -> tuple[float, float]:
    """(beta, theta) with beta = m*_yx / (m*_xy + m*_yx) and theta = (m - 1) beta."""
    total = mxy_star + myx_star
    if total == 0:
        raise ValueError("symmetric ratio undefined without attack")
    beta = myx_star / total
    return beta, (m - 1.0) * beta


def asymmetric_ratio(mx: float, my: float, mxy_star: float, myx_star: float) -> tuple[float, float, float]:
    """(beta_a, psi_a, theta_a) for a dominant x type (mx > my).

    beta_a depends on the attack limits only through their sum. The point is
    a conjectured co-existence limit, not a proved one.
    """
    if not mx > my:
        raise ValueError(f"asymmetric ratio needs mx > my, got mx={mx}, my={my}")
    d = mx - my
    c = mxy_star + myx_star
    beta = 0.5 + (c - math.sqrt(d * d + c * c)) / (2.0 * d)
    psi = my - 1.0 + beta * d
    return beta, psi, beta * psi


def ratio_quadratic(beta: float, mx: float, my: float, mxy_star: float, myx_star: float) -> float:
    """Zero set of the saturated ratio dynamics: d b^2 - (d + c) b + m*_yx."""
    d = mx - my
    return d * beta * beta - (d + mxy_star + myx_star) * beta + myx_star


def limit_fraction(params: ModelParams) -> Optional[float]:
    """Predicted X/S at co-existence in either orientation, or None without attack."""
    mx, my = mean(params.offspring_x), mean(params.offspring_y)
    axy, ayx = attack_mean_limit(params.attack_xy), attack_mean_limit(params.attack_yx)
    if axy + ayx == 0:
        return None
    if abs(mx - my) < SYMMETRY_TOL:
        return symmetric_ratio(axy, ayx, mx)[0]
    if mx > my:
        return asymmetric_ratio(mx, my, axy, ayx)[0]
    # y dominates: compute y's share with roles swapped
    return 1.0 - asymmetric_ratio(my, mx, ayx, axy)[0]


@dataclass(frozen=True)
class LimitPoint:
    label: str  # both-extinct, y-only, x-only, coexist
    psi: float
    theta: float
    conjecture: bool = False


def limit_set(params: ModelParams) -> list[LimitPoint]:
    """The four candidate limits of (psi_n, theta_n).

    Symmetric offspring means give the proved set; otherwise the x-only and
    y-only points use their own means and the co-existence point is the
    conjectured asymmetric equilibrium.
    """
    mx, my = mean(params.offspring_x), mean(params.offspring_y)
    axy, ayx = attack_mean_limit(params.attack_xy), attack_mean_limit(params.attack_yx)
    pts = [
        LimitPoint("both-extinct", 0.0, 0.0),
        LimitPoint("y-only", my - 1.0, 0.0),
        LimitPoint("x-only", mx - 1.0, mx - 1.0),
    ]
    if axy + ayx == 0:
        return pts
    if abs(mx - my) < SYMMETRY_TOL:
        beta, theta = symmetric_ratio(axy, ayx, mx)
        pts.append(LimitPoint("coexist", mx - 1.0, theta))
    else:
        beta = limit_fraction(params)
        psi = my - 1.0 + beta * (mx - my)
        pts.append(LimitPoint("coexist", psi, beta * psi, conjecture=True))
    return pts


@dataclass
class TheoryReport:
    alpha_x: float
    alpha_y: float
    q_star_x: Optional[float]
    q_star_y: Optional[float]
    bpna_extinct_x: float
    bpna_extinct_y: float
    bpna_extinct_total: float
    bpna_coexist: float
    beta_l: Optional[float]
    theta_l: Optional[float]
    beta_a_l: Optional[float]
    psi_a_l: Optional[float]
    theta_a_l: Optional[float]
    conjecture: bool
    limit_set: list

    def to_dict(self):
        d = asdict(self)
        d["limit_set"] = [asdict(p) for p in self.limit_set]
        return d


def _root_or_certain(law) -> Optional[float]:
    """q* when it exists; 1.0 for laws that die out surely; None otherwise."""
    if mean(law) <= 1.0 and prob_zero(law) > 0.0:
        return 1.0
    try:
        return extinction_root(law)
    except ValueError:
        return None


def theory_report(params: ModelParams) -> TheoryReport:
    mx, my = mean(params.offspring_x), mean(params.offspring_y)
    axy, ayx = attack_mean_limit(params.attack_xy), attack_mean_limit(params.attack_yx)
    qx, qy = _root_or_certain(params.offspring_x), _root_or_certain(params.offspring_y)
    bp = bpna_probabilities(
        0.0 if qx is None else qx, 0.0 if qy is None else qy, params.x0, params.y0
    )
    beta_l = theta_l = beta_a = psi_a = theta_a = None
    conjecture = False
    if axy + ayx > 0:
        if abs(mx - my) < SYMMETRY_TOL:
            beta_l, theta_l = symmetric_ratio(axy, ayx, mx)
        elif mx > my:
            beta_a, psi_a, theta_a = asymmetric_ratio(mx, my, axy, ayx)
            conjecture = True
        else:
            b, psi_a, _ = asymmetric_ratio(my, mx, ayx, axy)
            beta_a = 1.0 - b
            theta_a = beta_a * psi_a
            conjecture = True
    return TheoryReport(
        alpha_x=params.lam * (mx - 1.0),
        alpha_y=params.lam * (my - 1.0),
        q_star_x=qx,
        q_star_y=qy,
        bpna_extinct_x=bp[0],
        bpna_extinct_y=bp[1],
        bpna_extinct_total=bp[2],
        bpna_coexist=bp[3],
        beta_l=beta_l,
        theta_l=theta_l,
        beta_a_l=beta_a,
        psi_a_l=psi_a,
        theta_a_l=theta_a,
        conjecture=conjecture,
        limit_set=limit_set(params),
    )
