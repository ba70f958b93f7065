#!/usr/bin/env python3
"""Phase portrait of the mean-field ODE in (psi, theta).

Integrates from a grid of starting points, classifies every endpoint, and
writes ``phase_portrait.csv``. With matplotlib installed (``pip install
.[plot]``) it also saves ``phase_portrait.png`` showing the trajectories, the
limit set and the ratio line theta = beta psi.
"""

import argparse
import csv
import pathlib
from collections import Counter

import numpy as np

from bpa.sa_ode import OdeConfig, Theta, attraction_time, classify, integrate, rhs_for
from bpa.tables import coexistence_params, symmetric_params
from bpa.theory import limit_fraction, limit_set

PRESETS = {
    "symmetric": lambda: symmetric_params(2, 2),
    "coexist": lambda: coexistence_params(2.0, 2.0, 0.02, 100, 100),
    "asymmetric": lambda: coexistence_params(3.0, 2.98, 0.02, 100, 100),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", choices=sorted(PRESETS), default="coexist")
    ap.add_argument("--grid", type=int, default=9)
    ap.add_argument("--t-end", type=float, default=30.0)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    params = PRESETS[args.preset]()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = attraction_time(params) or 0.0
    limits = limit_set(params)
    psi_max = 1.5 * max(p.psi for p in limits) + 0.1
    beta = limit_fraction(params)
    rhs = rhs_for(params)

    paths, rows = [], []
    for psi0 in np.linspace(0.05, psi_max, args.grid):
        for frac in np.linspace(0.05, 0.95, args.grid):
            start = Theta(float(psi0), float(psi0 * frac), t0)
            path = integrate(rhs, start, OdeConfig(step_size=0.01, t_end=t0 + args.t_end))
            cls = classify(path.final, params)
            paths.append((path, cls))
            rows.append([psi0, psi0 * frac, path.final.psi, path.final.theta, cls.value])

    with (out / "phase_portrait.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["psi0", "theta0", "psi_end", "theta_end", "class"])
        w.writerows(rows)
    print(f"preset={args.preset} T0={t0:.3f} beta={beta}")
    print("endpoint classes:", dict(Counter(r[-1] for r in rows)))

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; wrote CSV only")
        return
    colours = {"Coexist": "tab:green", "XOnly": "tab:blue", "YOnly": "tab:orange",
               "BothExtinct": "black", "Unresolved": "grey"}
    fig, ax = plt.subplots(figsize=(6, 5))
    for path, cls in paths:
        ax.plot(path.psi, path.theta, lw=0.7, color=colours[cls.value], alpha=0.7)
    for p in limits:
        ax.plot(p.psi, p.theta, "o", ms=7, mfc="white", mec="red")
        ax.annotate(p.label, (p.psi, p.theta), textcoords="offset points", xytext=(5, 5), fontsize=8)
    if beta is not None:
        ax.plot([0, psi_max], [0, beta * psi_max], "r--", lw=0.8, label=f"theta = {beta:.3f} psi")
        ax.legend(loc="upper left")
    ax.set_xlabel("psi")
    ax.set_ylabel("theta")
    ax.set_title(f"mean-field ODE, preset '{args.preset}'")
    fig.tight_layout()
    fig.savefig(out / "phase_portrait.png", dpi=120)
    print(f"saved {out / 'phase_portrait.png'}")


if __name__ == "__main__":
    main()
