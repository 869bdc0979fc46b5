#!/usr/bin/env python3
"""Prevalence of regular directions on the unit sphere as energy grows.

Monte Carlo estimate of the fraction of directions whose entire ray through
the spherical shell ||xi|^2 - rho^2| <= 40 v avoids the resonant zones of the
short dual-lattice directions inside a ball of radius theta.  The fraction
should approach 1 as rho grows.
"""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from bloch_dos import (
    GeometryParams,
    Lattice,
    dual_lattice,
    fraction_ci_halfwidth,
    regular_direction_fraction,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rhos", type=str, default="1e2,1e3,1e4",
                        help="comma-separated spectral radii rho")
    parser.add_argument("--v", type=float, default=0.25, help="potential sup-norm scale")
    parser.add_argument("--theta", type=float, default=1.0,
                        help="radius of the ball of tested dual directions")
    parser.add_argument("--samples", type=int, default=100000)
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--out", type=Path, default=None, help="optional CSV path")
    args = parser.parse_args()

    D = dual_lattice(Lattice(basis=2 * math.pi * np.eye(2)))

    rows = []
    print(f"v={args.v:g}  theta={args.theta:g}  samples={args.samples}  seed={args.seed}")
    print(f"{'rho':>10} {'fraction':>10} {'ci_95':>10}")
    for rho in (float(s) for s in args.rhos.split(",")):
        params = GeometryParams(rho=rho, v=args.v, d=2, theta_radius=args.theta)
        frac = regular_direction_fraction(params, D, args.samples, seed=args.seed)
        ci = fraction_ci_halfwidth(frac, args.samples)
        print(f"{rho:>10g} {frac:>10.5f} {ci:>10.2e}")
        rows.append({"rho": rho, "v": args.v, "theta_radius": args.theta,
                     "samples": args.samples, "fraction": frac, "ci_halfwidth": ci})

    if args.out is not None:
        with args.out.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
