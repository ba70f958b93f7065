"""Replication harness: extinction and co-existence probabilities, limit
fractions and growth-rate diagnostics.

Replication ``i`` is seeded from ``SeedSequence(master_seed, spawn_key=(i,))``,
so any subset of replications can be rerun in isolation and estimates do not
depend on how the work is split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from . import _kernel as K
from .core import (
    MemorySink,
    ModelParams,
    StopRule,
    compile_params,
    outcome_from_arrays,
    run,
    stop_args,
)

Z95 = 1.959963984540054


@dataclass(frozen=True)
class EstimatorConfig:
    replications: int
    master_seed: int
    stop: StopRule
    parallelism: int = 1


def replication_seed(master_seed: int, index: int) -> int:
    """32-bit seed for replication ``index`` (SeedSequence spawn-key mix)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint32)[0])


def replication_seeds(master_seed: int, start: int, stop: int) -> np.ndarray:
    return np.array([replication_seed(master_seed, i) for i in range(start, stop)], dtype=np.int64)


@dataclass
class ReplicationBatch:
    """Per-replication results as flat arrays; merges by concatenation."""

    index: np.ndarray
    n: np.ndarray
    x: np.ndarray
    y: np.ndarray
    halt: np.ndarray
    ext_epoch_x: np.ndarray  # -1 when the type never died
    ext_epoch_y: np.ndarray
    tau: np.ndarray

    def __len__(self):
        return len(self.index)

    @property
    def x_extinct(self):
        return self.ext_epoch_x >= 0

    @property
    def y_extinct(self):
        return self.ext_epoch_y >= 0

    @property
    def total_extinct(self):
        return (self.x + self.y) == 0

    def merge(self, other: ReplicationBatch) -> ReplicationBatch:
        return ReplicationBatch(*(np.concatenate([a, b]) for a, b in zip(self._cols(), other._cols())))

    def _cols(self):
        return (self.index, self.n, self.x, self.y, self.halt, self.ext_epoch_x, self.ext_epoch_y, self.tau)

    def sorted(self) -> ReplicationBatch:
        order = np.argsort(self.index, kind="stable")
        return ReplicationBatch(*(c[order] for c in self._cols()))

    def outcome(self, i: int):
        st = [self.n[i], self.x[i], self.y[i], self.halt[i], self.ext_epoch_x[i], self.ext_epoch_y[i]]
        return outcome_from_arrays(st, float(self.tau[i]))

    def check_no_revival(self):
        """A type that died must still be dead at halt."""
        if np.any(self.x[self.x_extinct] != 0) or np.any(self.y[self.y_extinct] != 0):
            raise AssertionError("an extinct type revived; the chain update is broken")


def simulate_replications(
    params: ModelParams, config: EstimatorConfig, start: int = 0, stop: Optional[int] = None
) -> ReplicationBatch:
    """Run replications ``start .. stop-1`` of ``config`` through the compiled loop."""
    stop = config.replications if stop is None else stop
    seeds = replication_seeds(config.master_seed, start, stop)
    R = len(seeds)
    cp = compile_params(params)
    out_i = np.zeros((R, 6), dtype=np.int64)
    out_tau = np.zeros(R)
    fn = K.batch_parallel if config.parallelism > 1 else K.batch
    fn(seeds, params.x0, params.y0, *cp.args(), *stop_args(config.stop), out_i, out_tau)
    batch = ReplicationBatch(
        index=np.arange(start, stop, dtype=np.int64),
        n=out_i[:, K.I_N],
        x=out_i[:, K.I_X],
        y=out_i[:, K.I_Y],
        halt=out_i[:, K.I_HALT],
        ext_epoch_x=out_i[:, K.I_EXT_X],
        ext_epoch_y=out_i[:, K.I_EXT_Y],
        tau=out_tau,
    )
    batch.check_no_revival()
    return batch


# ---------------------------------------------------------------------------
# extinction probabilities


@dataclass(frozen=True)
class Estimate:
    point: float
    half_width: float
    lower: float
    upper: float
    count: int

    def to_dict(self):
        return {"point": self.point, "half_width": self.half_width,
                "lower": self.lower, "upper": self.upper, "count": self.count}


def proportion(count: int, total: int) -> Estimate:
    """95% interval: normal approximation, Clopper-Pearson when either tail count < 5."""
    p = count / total
    if count < 5 or total - count < 5:
        lo = 0.0 if count == 0 else float(stats.beta.ppf(0.025, count, total - count + 1))
        hi = 1.0 if count == total else float(stats.beta.ppf(0.975, count + 1, total - count))
        hw = max(p - lo, hi - p)
    else:
        hw = Z95 * math.sqrt(p * (1 - p) / total)
        lo, hi = max(p - hw, 0.0), min(p + hw, 1.0)
    return Estimate(p, hw, lo, hi, count)


@dataclass
class ProbabilityEstimates:
    q_s: Estimate
    q_x: Estimate
    q_y: Estimate
    p_coexist: Estimate
    replications_used: int
    exactly_one: int = 0

    @classmethod
    def from_batch(cls, batch: ReplicationBatch) -> ProbabilityEstimates:
        R = len(batch)
        xe, ye, te = batch.x_extinct, batch.y_extinct, batch.total_extinct
        both_alive = ~xe & ~ye
        est = cls(
            q_s=proportion(int(te.sum()), R),
            q_x=proportion(int(xe.sum()), R),
            q_y=proportion(int(ye.sum()), R),
            p_coexist=proportion(int(both_alive.sum()), R),
            replications_used=R,
            exactly_one=int((xe ^ ye).sum()),
        )
        est.check_consistency()
        return est

    def check_consistency(self):
        R = self.replications_used
        if self.q_s.count > min(self.q_x.count, self.q_y.count):
            raise AssertionError("total extinction counted without both types extinct")
        if self.p_coexist.count + self.exactly_one + self.q_s.count != R:
            raise AssertionError("outcome counts do not partition the replications")

    def to_dict(self):
        return {
            "q_s": self.q_s.to_dict(),
            "q_x": self.q_x.to_dict(),
            "q_y": self.q_y.to_dict(),
            "p_coexist": self.p_coexist.to_dict(),
            "replications_used": self.replications_used,
            "exactly_one_survives": self.exactly_one,
        }


def _check_config(config: EstimatorConfig):
    if config.replications < 10:
        raise ValueError(f"need at least 10 replications, got {config.replications}")


def estimate_extinction(params: ModelParams, config: EstimatorConfig, batch=None) -> ProbabilityEstimates:
    """Estimate q_s, q_x, q_y and the co-existence probability up to the stop rule."""
    _check_config(config)
    if config.stop.time_horizon is None and config.stop.survival_cap is None:
        raise ValueError("estimate_extinction needs a time horizon or a survival cap")
    if batch is None:
        batch = simulate_replications(params, config)
    return ProbabilityEstimates.from_batch(batch)


def high_separation_check(params: ModelParams, config: EstimatorConfig) -> float:
    """Estimated P(Y dies out) from (x0, y0); each path stops once y hits zero."""
    if params.y0 == 0:
        return 1.0
    _check_config(config)
    stop = StopRule(
        max_transitions=config.stop.max_transitions,
        time_horizon=config.stop.time_horizon,
        survival_cap=config.stop.survival_cap,
        watch="y",
    )
    cfg = EstimatorConfig(config.replications, config.master_seed, stop, config.parallelism)
    batch = simulate_replications(params, cfg)
    return float(batch.y_extinct.mean())


# ---------------------------------------------------------------------------
# limit fractions


@dataclass
class FractionStudy:
    samples: np.ndarray
    mean_fraction: float
    within_band_share: float
    target: float
    band: float
    paths: int
    mean_x: float = 0.0

    def to_dict(self):
        return {
            "mean_fraction": self.mean_fraction,
            "within_band_share": self.within_band_share,
            "target": self.target,
            "band": self.band,
            "surviving_paths": len(self.samples),
            "paths": self.paths,
            "mean_terminal_x": self.mean_x,
        }


def estimate_limit_fraction(
    params: ModelParams, config: EstimatorConfig, target: float, band: float = 0.05
) -> FractionStudy:
    """Terminal fractions X_N/S_N over paths still alive after N transitions.

    ``within_band_share`` counts all paths (not only survivors) whose fraction
    lies within ``band * target`` of ``target``.
    """
    if config.stop.max_transitions is None:
        raise ValueError("limit-fraction study needs max_transitions")
    batch = simulate_replications(params, config)
    s = batch.x + batch.y
    alive = (s > 0) & (batch.n >= config.stop.max_transitions)
    if not alive.any():
        raise RuntimeError("no path survived to the transition bound")
    frac = batch.x[alive] / s[alive]
    inside = np.abs(frac - target) <= band * target
    return FractionStudy(
        samples=frac,
        mean_fraction=float(frac.mean()),
        within_band_share=float(inside.sum() / len(batch)),
        target=target,
        band=band,
        paths=len(batch),
        mean_x=float(batch.x[alive].mean()),
    )


# ---------------------------------------------------------------------------
# growth diagnostics


@dataclass
class GrowthDiagnostic:
    per_path_slope: np.ndarray
    theoretical_alpha: float
    martingale_tail: np.ndarray

    @property
    def median_slope(self) -> float:
        return float(np.median(self.per_path_slope))

    def to_dict(self):
        return {
            "median_slope": self.median_slope,
            "theoretical_alpha": self.theoretical_alpha,
            "per_path_slope": self.per_path_slope.tolist(),
            "martingale_tail": self.martingale_tail.tolist(),
        }


def growth_check(
    params: ModelParams,
    config: EstimatorConfig,
    alpha: float,
    stride: int = 100,
    tail_fraction: float = 0.5,
) -> GrowthDiagnostic:
    """Least-squares slope of log S_n against tau_n over the last
    ``tail_fraction`` of each surviving path, plus S_N exp(-alpha tau_N)."""
    slopes, tails = [], []
    for i in range(config.replications):
        sink = MemorySink(stride)
        rng = np.random.default_rng(replication_seed(config.master_seed, i))
        out = run(params, config.stop, rng, sink)
        if out.total_extinct:
            continue
        s = (sink.x + sink.y).astype(float)
        tau = sink.tau
        keep = s > 0
        s, tau = s[keep], tau[keep]
        lo = int(len(s) * (1.0 - tail_fraction))
        if len(s) - lo < 3:
            continue
        slope = np.polyfit(tau[lo:], np.log(s[lo:]), 1)[0]
        slopes.append(slope)
        st = out.final_state
        tails.append(st.total * math.exp(-alpha * st.tau))
    if not slopes:
        raise RuntimeError("no path survived long enough for a growth fit")
    return GrowthDiagnostic(np.array(slopes), alpha, np.array(tails))
