#!/usr/bin/env python3
"""Compare the empirical growth rate of surviving paths with alpha = lam (m - 1).

For each configuration, fits log S against wall-clock time tau on the tail of
every surviving path and reports the median slope, its ratio to alpha, and the
spread of S exp(-alpha tau) (which should settle to a positive random limit).
"""

import argparse

import numpy as np

from bpa import ModelParams, StopRule
from bpa.distributions import Constant, mean
from bpa.montecarlo import EstimatorConfig, growth_check
from bpa.tables import asymmetric_params, coexistence_params, symmetric_params


def cases():
    yield "symmetric attack", symmetric_params(5, 5), StopRule(survival_cap=10**4, time_horizon=1e9)
    yield "asymmetric attack", asymmetric_params(5, 5), StopRule(survival_cap=10**4, time_horizon=1e9)
    yield "no attack", symmetric_params(5, 5).without_attack(), StopRule(survival_cap=10**4, time_horizon=1e9)
    yield "coexistence m=2", coexistence_params(2.0, 2.0, 0.02, 50, 50), StopRule(max_transitions=10**5)
    yule = ModelParams(lam=0.5, offspring_x=Constant(2), offspring_y=Constant(2), x0=1, y0=0)
    yield "Yule lam=0.5", yule, StopRule(max_transitions=20000)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'case':<20}{'alpha':>12}{'median slope':>14}{'ratio':>8}{'W median':>12}{'W IQR':>12}")
    for name, params, stop in cases():
        m = max(mean(params.offspring_x), mean(params.offspring_y))
        alpha = params.lam * (m - 1)
        g = growth_check(params, EstimatorConfig(args.paths, args.seed, stop), alpha)
        w = np.asarray(g.martingale_tail)
        q1, q3 = np.percentile(w, [25, 75])
        print(f"{name:<20}{alpha:>12.4g}{g.median_slope:>14.4g}{g.median_slope / alpha:>8.3f}"
              f"{np.median(w):>12.4g}{q3 - q1:>12.4g}")


if __name__ == "__main__":
    main()
