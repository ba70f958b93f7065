"""Stochastic-approximation view of the chain and its limit ODE.

The triplet (psi_n, theta_n, t_n) = (S_n/n, X_n/n, H_n) with H_n the n-th
harmonic number evolves as a stochastic approximation with step 1/(n+1). The
module tracks it along simulated paths, integrates the mean-field ODE with
classical RK4 and classifies end points against the candidate limits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import digamma

from .core import ModelParams
from .distributions import AttackSpec, attack_mean, attack_mean_limit, mean
from .theory import limit_fraction, limit_set

EULER_GAMMA = 0.5772156649015329
HARMONIC_CACHE_MAX = 10**7


@dataclass(frozen=True)
class Theta:
    psi: float
    theta: float
    t: float


# ---------------------------------------------------------------------------
# harmonic clock

_harmonic = np.zeros(1)  # _harmonic[n] = sum_{k<n} 1/(k+1), built by running sum


def _ensure_harmonic(n: int):
    global _harmonic
    if n < len(_harmonic):
        return
    size = min(max(n + 1, 2 * len(_harmonic)), HARMONIC_CACHE_MAX + 1)
    # sequential accumulation, identical to t_{n+1} = t_n + 1/(n+1)
    _harmonic = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, size))])


def harmonic(n: int) -> float:
    """t_n = sum_{k=0}^{n-1} 1/(k+1), accumulated in the same order as the SA clock."""
    if n <= HARMONIC_CACHE_MAX:
        _ensure_harmonic(n)
        return float(_harmonic[n])
    return float(digamma(n + 1)) + EULER_GAMMA


def eta(t: float) -> int:
    """eta(t) = max{n : t_n <= t}."""
    if t < 0:
        raise ValueError("eta needs t >= 0")
    if t <= 15.0:  # H_{10^7} ~ 16.7
        guess = int(math.exp(max(t - EULER_GAMMA, 0.0))) + 2
        if guess <= HARMONIC_CACHE_MAX:
            _ensure_harmonic(guess + 2)
            return int(np.searchsorted(_harmonic[: guess + 3], t, side="right") - 1)
    if math.isinf(t):
        raise ValueError("eta(inf) is unbounded")
    n = int(math.exp(t - EULER_GAMMA))
    n = max(n - 2, 0)
    while harmonic(n + 1) <= t:
        n += 1
    while n > 0 and harmonic(n) > t:
        n -= 1
    return n


# ---------------------------------------------------------------------------
# tracking along simulated paths


class TrackerDivergence(RuntimeError):
    pass


@dataclass
class ThetaPath:
    n: np.ndarray
    psi: np.ndarray
    theta: np.ndarray
    t: np.ndarray

    def __len__(self):
        return len(self.n)

    def __getitem__(self, i) -> Theta:
        return Theta(float(self.psi[i]), float(self.theta[i]), float(self.t[i]))

    @property
    def final(self) -> Theta:
        return self[-1]


def track(trajectory, events=None, rtol: float = 1e-9) -> ThetaPath:
    """Theta_n along a stride-1 path, by direct ratios and by the SA recursion.

    ``trajectory`` rows are (n, x, y) with n = 0, 1, 2, ... . ``events``
    optionally gives per-row (waker, offspring, attack) with waker 0 for x and
    1 for y; the recursion then uses the indicator form of the update instead
    of the count differences. Row 0 holds (x0 + y0, x0, 0); the first update
    starts from (S_1, X_1, 1) since a 1/(n+1) step at n = 0 would discard the
    seeds. Raises :class:`TrackerDivergence` if the two routes disagree by more
    than 1e-6 relative.
    """
    traj = np.asarray(trajectory, dtype=np.int64)
    n = traj[:, 0]
    if len(n) == 0 or n[0] != 0 or np.any(np.diff(n) != 1):
        raise ValueError("track needs consecutive rows starting at n = 0")
    x = traj[:, 1].astype(float)
    y = traj[:, 2].astype(float)
    s = x + y
    N = len(n)
    _ensure_harmonic(N)
    t = _harmonic[:N].copy()

    psi_d = np.empty(N)
    th_d = np.empty(N)
    psi_d[0], th_d[0] = s[0], x[0]
    psi_d[1:] = s[1:] / n[1:]
    th_d[1:] = x[1:] / n[1:]

    psi = np.empty(N)
    th = np.empty(N)
    psi[0], th[0] = s[0], x[0]
    if N > 1:
        psi[1], th[1] = s[1], x[1]
    for k in range(1, N - 1):
        eps = 1.0 / (k + 1)
        p, q = psi[k], th[k]
        K_ = p > 0
        J_ = p > 0 and q > 0
        I_ = q < p
        if events is not None:
            w, xi, z = events[k + 1]
            ds = xi - 1
            H = w == 0
            dx = (xi - 1 + z * I_) if H else -z * I_
        else:
            ds = s[k + 1] - s[k]
            dx = x[k + 1] - x[k]
        psi[k + 1] = p + eps * (ds - p) * K_
        th[k + 1] = q + eps * (dx - q) * J_

    scale = np.maximum(np.abs(psi_d), 1.0)
    err = np.max(np.abs(psi - psi_d) / scale) if N else 0.0
    err = max(err, np.max(np.abs(th - th_d) / scale) if N else 0.0)
    if err > 1e-6:
        raise TrackerDivergence(f"SA recursion left the direct ratios by {err:.3g}")
    return ThetaPath(n, psi, th, t)


def track_csv(path, fh) -> None:
    w = fh.write
    w("n,psi,theta,t\n")
    for i in range(len(path)):
        w(f"{int(path.n[i])},{float(path.psi[i])!r},{float(path.theta[i])!r},{float(path.t[i])!r}\n")


# ---------------------------------------------------------------------------
# mean-field ODE


def _attack(spec: AttackSpec, scale: float, saturated: bool) -> float:
    if saturated:
        return attack_mean_limit(spec)
    return float(attack_mean(spec, scale))


def ode_rhs_symmetric(state: Theta, m: float, attack_xy: AttackSpec, attack_yx: AttackSpec,
                      saturated: bool = False) -> tuple[float, float, float]:
    """Drift (g_psi, g_theta, 1) for equal offspring means ``m``.

    Attack means are evaluated at (psi - theta) eta(t) and theta eta(t);
    ``saturated=True`` substitutes their limits.
    """
    psi, theta, t = state.psi, state.theta, state.t
    if psi <= 0:
        return 0.0, 0.0, 1.0
    g_psi = m - 1.0 - psi
    if theta <= 0:
        return g_psi, 0.0, 1.0
    r = theta / psi
    if theta < psi:
        e = eta(max(t, 0.0))
        mxy = _attack(attack_xy, (psi - theta) * e, saturated)
        myx = _attack(attack_yx, theta * e, saturated)
    else:
        mxy = myx = 0.0
    g_theta = r * (m - 1.0 + mxy) - (1.0 - r) * myx - theta
    return g_psi, g_theta, 1.0


def ode_rhs_asymmetric(state: Theta, mx: float, my: float, attack_xy: AttackSpec,
                       attack_yx: AttackSpec, saturated: bool = False) -> tuple[float, float, float]:
    psi, theta, t = state.psi, state.theta, state.t
    if psi <= 0:
        return 0.0, 0.0, 1.0
    r = theta / psi
    g_psi = r * (mx - my) + my - 1.0 - psi
    if theta <= 0:
        return g_psi, 0.0, 1.0
    if theta < psi:
        e = eta(max(t, 0.0))
        mxy = _attack(attack_xy, (psi - theta) * e, saturated)
        myx = _attack(attack_yx, theta * e, saturated)
    else:
        mxy = myx = 0.0
    g_theta = r * (mx - 1.0 + mxy) - (1.0 - r) * myx - theta
    return g_psi, g_theta, 1.0


def rhs_for(params: ModelParams, saturated: bool = False) -> Callable[[Theta], tuple]:
    mx, my = mean(params.offspring_x), mean(params.offspring_y)
    if abs(mx - my) < 1e-12:
        return lambda s: ode_rhs_symmetric(s, mx, params.attack_xy, params.attack_yx, saturated)
    return lambda s: ode_rhs_asymmetric(s, mx, my, params.attack_xy, params.attack_yx, saturated)


def ratio_rhs(state: Theta, params: ModelParams, saturated: bool = False) -> float:
    """d(theta/psi)/dt, including the 1/psi factor."""
    psi, theta, t = state.psi, state.theta, state.t
    if psi <= 0:
        raise ValueError("ratio dynamics undefined at psi = 0")
    if not 0 < theta < psi:
        return 0.0
    mx, my = mean(params.offspring_x), mean(params.offspring_y)
    r = theta / psi
    e = eta(max(t, 0.0))
    mxy = _attack(params.attack_xy, (psi - theta) * e, saturated)
    myx = _attack(params.attack_yx, theta * e, saturated)
    d = mx - my
    return (r * (d + mxy + myx) - myx - r * r * d) / psi


@dataclass(frozen=True)
class OdeConfig:
    step_size: float = 0.01
    t_end: float = 10.0
    scheme: str = "RK4"
    clamp_theta: bool = True

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.scheme != "RK4":
            raise ValueError(f"unsupported scheme {self.scheme!r}")


def integrate(rhs: Callable[[Theta], tuple], start: Theta, config: OdeConfig) -> ThetaPath:
    """Classical RK4 from ``start.t`` to ``config.t_end``."""
    h = config.step_size
    steps = max(int(math.ceil((config.t_end - start.t) / h - 1e-9)), 0)
    out = np.empty((steps + 1, 3))
    y = np.array([start.psi, start.theta, start.t], dtype=float)
    out[0] = y

    def f(v):
        return np.asarray(rhs(Theta(v[0], v[1], v[2])), dtype=float)

    for i in range(steps):
        hh = min(h, config.t_end - y[2]) if i == steps - 1 else h
        k1 = f(y)
        k2 = f(y + 0.5 * hh * k1)
        k3 = f(y + 0.5 * hh * k2)
        k4 = f(y + hh * k3)
        y = y + hh / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if config.clamp_theta:
            y[1] = min(max(y[1], 0.0), max(y[0], 0.0))
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"non-finite ODE state at t={y[2]}")
        out[i + 1] = y
    return ThetaPath(np.arange(steps + 1), out[:, 0], out[:, 1], out[:, 2])


def ode_csv(path: ThetaPath, fh) -> None:
    fh.write("t,psi,theta\n")
    for i in range(len(path)):
        fh.write(f"{float(path.t[i])!r},{float(path.psi[i])!r},{float(path.theta[i])!r}\n")


# ---------------------------------------------------------------------------
# classification


class EquilibriumClass(enum.Enum):
    BOTH_EXTINCT = "BothExtinct"
    Y_ONLY = "YOnly"
    X_ONLY = "XOnly"
    COEXIST = "Coexist"
    UNRESOLVED = "Unresolved"


_LABELS = {
    "both-extinct": EquilibriumClass.BOTH_EXTINCT,
    "y-only": EquilibriumClass.Y_ONLY,
    "x-only": EquilibriumClass.X_ONLY,
    "coexist": EquilibriumClass.COEXIST,
}


def classify(final: Theta, params: ModelParams, tol: float = 0.05) -> EquilibriumClass:
    """Nearest candidate limit within ``tol`` (as a fraction of the psi scale).

    For unequal offspring means the co-existence candidate is conjectural.
    """
    pts = limit_set(params)
    scale = max(max(p.psi for p in pts), 1e-12)
    best, best_d = EquilibriumClass.UNRESOLVED, math.inf
    for p in pts:
        d = max(abs(final.psi - p.psi), abs(final.theta - p.theta)) / scale
        if d <= tol and d < best_d:
            best, best_d = _LABELS[p.label], d
    return best


def attraction_time(params: ModelParams, eps: float = 0.0, report=None) -> Optional[float]:
    """Smallest harmonic time T0 with eta(T0) beta (m - 1 - eps) >= max(y_bar k_xy / k_yx,
    x_bar k_yx / k_xy), using the numeric A.3 constants; None if undefined."""
    from .distributions import validate_assumptions

    if report is None:
        report = validate_assumptions(params, a4_bound=1)
    a3 = report.a3_params
    kxy, kyx = a3["kappa_xy"], a3["kappa_yx"]
    beta = limit_fraction(params)
    m = mean(params.offspring_x)
    if beta is None or kxy <= 0 or kyx <= 0 or m - 1 - eps <= 0:
        return None
    need = max(a3["y_bar"] * kxy / kyx, a3["x_bar"] * kyx / kxy)
    n = max(int(math.ceil(need / (beta * (m - 1.0 - eps)))), 1)
    return harmonic(n)


def classify_path(path: ThetaPath, params: ModelParams, tol: float = 0.05) -> EquilibriumClass:
    return classify(path.final, params, tol)


def direct_theta(n: int, x: int, y: int) -> Theta:
    """Theta at transition n computed from counts (n >= 1)."""
    return Theta((x + y) / n, x / n, harmonic(n))


def thetas(path: ThetaPath) -> Sequence[Theta]:
    return [path[i] for i in range(len(path))]
