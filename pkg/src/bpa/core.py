"""Embedded Markov chain of the two-type branching process with attack.

At each transition one individual wakes (type x with probability x/(x+y)),
produces offspring of its own type, converts up to ``min(xi_ij, opposite)``
individuals of the other type (each with probability ``resist_prob``) and dies.
The gap to the next wake-up is exponential with rate ``lambda * (x + y)``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np

from . import _kernel as K
from .distributions import (
    AttackSpec,
    BinomialOfFriends,
    OffspringLaw,
    _canon,
    attack_mean_limit,
    sample_attack,
    sample_offspring,
)

BPA = "BPA"
BPNA = "BPNA"
HALT_REASONS = ("extinction", "horizon", "transitions", "survivalCap", "overflow", "typeExtinction")


class AbsorbedStateError(ValueError):
    """Raised when stepping a chain whose total population is already zero."""


@dataclass(frozen=True)
class ModelParams:
    lam: float
    offspring_x: OffspringLaw
    offspring_y: OffspringLaw
    attack_xy: AttackSpec = field(default_factory=AttackSpec)
    attack_yx: AttackSpec = field(default_factory=AttackSpec)
    x0: int = 1
    y0: int = 1
    mode: str = BPA
    # draw offspring and attack counts from one friend count per wake-up
    joint_friend_split: bool = False

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be positive and finite, got {self.lam}")
        if self.x0 < 0 or self.y0 < 0 or self.x0 + self.y0 < 1:
            raise ValueError("initial sizes must be >= 0 with x0 + y0 >= 1")
        if self.mode not in (BPA, BPNA):
            raise ValueError(f"mode must be BPA or BPNA, got {self.mode!r}")
        if self.mode == BPNA and not (self.attack_xy.is_zero and self.attack_yx.is_zero):
            raise ValueError("BPNA mode requires zero attack on both sides")
        if self.joint_friend_split:
            for off, att in ((self.offspring_x, self.attack_xy), (self.offspring_y, self.attack_yx)):
                ok = (
                    isinstance(off, BinomialOfFriends)
                    and isinstance(att.max_attack, BinomialOfFriends)
                    and off.friend_law == att.max_attack.friend_law
                    and off.share_prob + att.max_attack.share_prob <= 1.0
                )
                if not ok:
                    raise ValueError(
                        "joint_friend_split needs BinomialOfFriends offspring and attack "
                        "laws over the same friend law with share probabilities summing to <= 1"
                    )

    @property
    def is_symmetric(self) -> bool:
        return _canon(self.offspring_x) == _canon(self.offspring_y)

    def without_attack(self) -> ModelParams:
        """The matched BPNA: same offspring laws and seeds, no attack."""
        return dataclasses.replace(
            self, attack_xy=AttackSpec(), attack_yx=AttackSpec(), mode=BPNA, joint_friend_split=False
        )

    def with_seeds(self, x0: int, y0: int) -> ModelParams:
        return dataclasses.replace(self, x0=x0, y0=y0)


@dataclass(frozen=True)
class ChainState:
    n: int
    x: int
    y: int
    tau: float = 0.0

    @property
    def absorbed(self) -> bool:
        return self.x + self.y == 0

    @property
    def total(self) -> int:
        return self.x + self.y

    @classmethod
    def initial(cls, params: ModelParams) -> ChainState:
        return cls(0, params.x0, params.y0, 0.0)


@dataclass(frozen=True)
class StopRule:
    max_transitions: Optional[int] = None
    time_horizon: Optional[float] = None
    # halt once every type is either extinct or at least this large
    survival_cap: Optional[int] = None
    # absorption is always terminal; kept so configs round-trip
    stop_on_extinction: bool = True
    # halt as soon as the named type ("x" or "y") is extinct
    watch: Optional[str] = None

    def __post_init__(self):
        if self.max_transitions is None and self.time_horizon is None and self.survival_cap is None:
            raise ValueError("StopRule needs at least one of max_transitions, time_horizon, survival_cap")
        if self.watch not in (None, "x", "y"):
            raise ValueError("watch must be None, 'x' or 'y'")


@dataclass
class StepEvent:
    waker: str  # "x" or "y"
    offspring: int
    attack: int


@dataclass
class ReplicationOutcome:
    x_extinct: bool
    y_extinct: bool
    total_extinct: bool
    extinct_epoch_x: Optional[int]
    extinct_epoch_y: Optional[int]
    final_state: ChainState
    terminal_fraction: float
    halt_reason: str


def max_min(state: ChainState) -> tuple[int, int]:
    return max(state.x, state.y), min(state.x, state.y)


def step_with_event(
    state: ChainState,
    params: ModelParams,
    rng: np.random.Generator,
    offspring_rng: Optional[np.random.Generator] = None,
) -> tuple[ChainState, StepEvent]:
    """One transition; every draw uses the pre-transition counts.

    ``offspring_rng``, when given, supplies the offspring draws alone, which
    lets two chains share an offspring stream while differing elsewhere.
    """
    if state.absorbed:
        raise AbsorbedStateError(f"cannot step absorbed state at n={state.n}")
    x, y = state.x, state.y
    s = x + y
    dt = rng.exponential(1.0 / (params.lam * s))
    x_wakes = rng.random() * s < x
    off_rng = offspring_rng if offspring_rng is not None else rng
    if x_wakes:
        xi = sample_offspring(params.offspring_x, off_rng)
        zeta = sample_attack(params.attack_xy, y, rng)
        x, y = x - 1 + xi + zeta, y - zeta
    else:
        xi = sample_offspring(params.offspring_y, off_rng)
        zeta = sample_attack(params.attack_yx, x, rng)
        x, y = x - zeta, y - 1 + xi + zeta
    new = ChainState(state.n + 1, x, y, state.tau + dt)
    return new, StepEvent("x" if x_wakes else "y", xi, zeta)


def step(state: ChainState, params: ModelParams, rng: np.random.Generator) -> ChainState:
    return step_with_event(state, params, rng)[0]


# ---------------------------------------------------------------------------
# trajectory sinks


class TrajectorySink(Protocol):
    stride: int

    def write(self, n, x, y, tau, waker, offspring, attack) -> None: ...


class MemorySink:
    """Collects (n, x, y, tau) rows, plus the event that produced each row."""

    def __init__(self, stride: int = 1):
        self.stride = stride
        self._chunks = []

    def write(self, n, x, y, tau, waker, offspring, attack):
        self._chunks.append(
            tuple(np.atleast_1d(np.asarray(a)).copy() for a in (n, x, y, tau, waker, offspring, attack))
        )

    def _col(self, i, dtype):
        if not self._chunks:
            return np.empty(0, dtype=dtype)
        return np.concatenate([c[i] for c in self._chunks]).astype(dtype)

    @property
    def n(self):
        return self._col(0, np.int64)

    @property
    def x(self):
        return self._col(1, np.int64)

    @property
    def y(self):
        return self._col(2, np.int64)

    @property
    def tau(self):
        return self._col(3, float)

    @property
    def waker(self):
        return self._col(4, np.int64)

    @property
    def offspring(self):
        return self._col(5, np.int64)

    @property
    def attack(self):
        return self._col(6, np.int64)

    def rows(self):
        return np.column_stack([self.n, self.x, self.y])


class CsvSink:
    """Streams ``n,x,y,tau`` rows; ``events=True`` adds ``waker,offspring,attack``.

    tau is written with ``repr`` so it round-trips exactly.
    """

    def __init__(self, fh: io.TextIOBase, stride: int = 1, events: bool = False):
        self.stride = stride
        self.events = events
        self._w = csv.writer(fh, lineterminator="\n")
        header = ["n", "x", "y", "tau"]
        if events:
            header += ["waker", "offspring", "attack"]
        self._w.writerow(header)

    def write(self, n, x, y, tau, waker, offspring, attack):
        cols = [np.atleast_1d(a) for a in (n, x, y, tau, waker, offspring, attack)]
        for i in range(len(cols[0])):
            row = [int(cols[0][i]), int(cols[1][i]), int(cols[2][i]), repr(float(cols[3][i]))]
            if self.events:
                w = int(cols[4][i])
                row += ["" if w < 0 else "xy"[w], int(cols[5][i]), int(cols[6][i])]
            self._w.writerow(row)


# ---------------------------------------------------------------------------
# compiled runner


@dataclass(frozen=True)
class CompiledParams:
    kinds: np.ndarray
    mus: np.ndarray
    ns: np.ndarray
    cdfs: np.ndarray
    lens: np.ndarray
    resist: np.ndarray
    joint: np.ndarray
    split: np.ndarray
    lam: float

    def args(self):
        return (self.kinds, self.mus, self.ns, self.cdfs, self.lens,
                self.resist, self.joint, self.split, self.lam)


_KIND_CODE = {"constant": K.K_CONST, "poisson": K.K_POISSON, "binomial": K.K_BINOM, "table": K.K_TABLE}


def compile_params(params: ModelParams) -> CompiledParams:
    laws = [
        params.offspring_x,
        params.offspring_y,
        params.attack_xy.max_attack,
        params.attack_yx.max_attack,
    ]
    if params.joint_friend_split:
        laws += [params.offspring_x.friend_law, params.offspring_y.friend_law]
    canon = [_canon(law) for law in laws] + [_canon(laws[0])] * (6 - len(laws))
    width = max([len(c.probs) for c in canon] + [1])
    kinds = np.zeros(6, dtype=np.int64)
    mus = np.zeros(6)
    ns = np.zeros(6, dtype=np.int64)
    cdfs = np.ones((6, width))
    lens = np.ones(6, dtype=np.int64)
    for i, c in enumerate(canon):
        kinds[i] = _KIND_CODE[c.kind]
        mus[i] = c.mu
        ns[i] = c.n
        if c.kind == "table":
            cdfs[i, : len(c.probs)] = np.cumsum(c.probs)
            lens[i] = len(c.probs)
    resist = np.array([params.attack_xy.resist_prob, params.attack_yx.resist_prob])
    joint = np.array([params.joint_friend_split] * 2)
    split = np.zeros((2, 2))
    if params.joint_friend_split:
        for i, (off, att) in enumerate(
            ((params.offspring_x, params.attack_xy), (params.offspring_y, params.attack_yx))
        ):
            a, b = off.share_prob, att.max_attack.share_prob
            split[i] = (a, b / (1.0 - a) if a < 1.0 else 0.0)
    return CompiledParams(kinds, mus, ns, cdfs, lens, resist, joint, split, float(params.lam))


def stop_args(stop: StopRule) -> tuple:
    max_n = -1 if stop.max_transitions is None else int(stop.max_transitions)
    horizon = math.inf if stop.time_horizon is None else float(stop.time_horizon)
    cap = -1 if stop.survival_cap is None else int(stop.survival_cap)
    watch = {None: -1, "x": 0, "y": 1}[stop.watch]
    return max_n, horizon, cap, watch


def outcome_from_arrays(st, tau: float) -> ReplicationOutcome:
    n, x, y, halt, ex, ey = (int(v) for v in st)
    state = ChainState(n, x, y, tau)
    return ReplicationOutcome(
        x_extinct=ex >= 0,
        y_extinct=ey >= 0,
        total_extinct=x + y == 0,
        extinct_epoch_x=ex if ex >= 0 else None,
        extinct_epoch_y=ey if ey >= 0 else None,
        final_state=state,
        terminal_fraction=x / (x + y) if x + y > 0 else 0.0,
        halt_reason=K.HALT_NAMES[halt],
    )


def seed_from_rng(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**32))


def run(
    params: ModelParams,
    stop: StopRule,
    rng: np.random.Generator,
    recorder: Optional[TrajectorySink] = None,
    buffer_rows: int = 65536,
) -> ReplicationOutcome:
    """Run one path until a stop bound trips or the population is absorbed.

    The recorder receives the initial state, every ``recorder.stride``-th
    state, and the final state.
    """
    cp = compile_params(params)
    max_n, horizon, cap, watch = stop_args(stop)
    K.seed(seed_from_rng(rng))
    st = np.array([0, params.x0, params.y0, K.RUNNING,
                   0 if params.x0 == 0 else -1, 0 if params.y0 == 0 else -1], dtype=np.int64)
    tau = np.zeros(1)
    stride = 0 if recorder is None else max(int(recorder.stride), 1)
    size = buffer_rows if recorder is not None else 0
    bufs = [np.empty(size, dtype=np.int64) for _ in range(3)]
    rec_tau = np.empty(size)
    ev = [np.empty(size, dtype=np.int64) for _ in range(3)]
    if recorder is not None:
        recorder.write(0, params.x0, params.y0, 0.0, -1, 0, 0)
    last_n = 0
    while True:
        count = K.advance(st, tau, *cp.args(), max_n, horizon, cap, watch,
                          stride, bufs[0], bufs[1], bufs[2], rec_tau, ev[0], ev[1], ev[2], 0)
        if recorder is not None and count:
            recorder.write(bufs[0][:count], bufs[1][:count], bufs[2][:count], rec_tau[:count],
                           ev[0][:count], ev[1][:count], ev[2][:count])
            last_n = int(bufs[0][count - 1])
        if st[K.I_HALT] != K.RUNNING:
            break
    if recorder is not None and int(st[K.I_N]) != last_n:
        recorder.write(st[K.I_N], st[K.I_X], st[K.I_Y], tau[0], -1, 0, 0)
    return outcome_from_arrays(st, float(tau[0]))


def run_python(
    params: ModelParams,
    stop: StopRule,
    rng: np.random.Generator,
    recorder: Optional[TrajectorySink] = None,
    offspring_rng: Optional[np.random.Generator] = None,
) -> ReplicationOutcome:
    """Reference implementation of :func:`run` built on :func:`step_with_event`.

    Slow; used for cross-checks and for coupled-stream experiments.
    """
    max_n, horizon, cap, watch = stop_args(stop)
    state = ChainState.initial(params)
    ext = [0 if params.x0 == 0 else None, 0 if params.y0 == 0 else None]
    stride = recorder.stride if recorder is not None else 0
    if recorder is not None:
        recorder.write(0, state.x, state.y, 0.0, -1, 0, 0)
    last_n = 0
    while True:
        x, y = state.x, state.y
        if x + y == 0:
            halt = K.H_EXTINCTION
        elif (watch == 0 and x == 0) or (watch == 1 and y == 0):
            halt = K.H_WATCHED
        elif cap > 0 and (x == 0 or x >= cap) and (y == 0 or y >= cap):
            halt = K.H_CAP
        elif 0 <= max_n <= state.n:
            halt = K.H_TRANSITIONS
        else:
            halt = K.RUNNING
        if halt != K.RUNNING:
            break
        new, ev = step_with_event(state, params, rng, offspring_rng)
        if new.tau > horizon:
            halt = K.H_HORIZON
            break
        state = new
        if state.x == 0 and ext[0] is None:
            ext[0] = state.n
        if state.y == 0 and ext[1] is None:
            ext[1] = state.n
        if stride and state.n % stride == 0:
            recorder.write(state.n, state.x, state.y, state.tau, "xy".index(ev.waker), ev.offspring, ev.attack)
            last_n = state.n
    if recorder is not None and state.n != last_n:
        recorder.write(state.n, state.x, state.y, state.tau, -1, 0, 0)
    st = [state.n, state.x, state.y, halt,
          -1 if ext[0] is None else ext[0], -1 if ext[1] is None else ext[1]]
    return outcome_from_arrays(st, state.tau)


def attack_limits(params: ModelParams) -> tuple[float, float]:
    return attack_mean_limit(params.attack_xy), attack_mean_limit(params.attack_yx)
