#!/usr/bin/env python3
"""Convergence of the quadrature IDS to the exact free value (V = 0).

Refines the Brillouin-zone grid and reports the relative error of the
computed integrated density of states against the closed-form reference
lambda/(4 pi) in two dimensions.  The error should shrink as G grows.
"""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from bloch_dos import (
    Lattice,
    PotentialSpec,
    QuadratureGrid,
    dual_lattice,
    ids,
    suggest_cutoff,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--energy", type=float, default=1.37,
                        help="energy lambda at which the IDS is evaluated")
    parser.add_argument("--grids", type=str, default="25,50,100,200",
                        help="comma-separated grid sizes G")
    parser.add_argument("--buffer", type=float, default=2.0,
                        help="basis-radius buffer beyond the spectral shell")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", type=Path, default=None, help="optional CSV path")
    args = parser.parse_args()

    D = dual_lattice(Lattice(basis=2 * math.pi * np.eye(2)))
    V = PotentialSpec(lattice=D, coeffs={})
    cutoff = suggest_cutoff(args.energy, 0.0, args.buffer)
    grids = [int(g) for g in args.grids.split(",")]

    rows = []
    print(f"lambda={args.energy:g}  cutoff={cutoff:g}  reference={args.energy / (4 * math.pi):.10f}")
    print(f"{'G':>6} {'value':>16} {'rel_error':>12}")
    for G in grids:
        rep = ids(V, args.energy, QuadratureGrid(D, G), cutoff, workers=args.workers)
        rel = abs(rep.value - rep.free_reference) / rep.free_reference
        print(f"{G:>6} {rep.value:>16.10f} {rel:>12.3e}")
        rows.append({"G": G, "value": rep.value, "reference": rep.free_reference,
                     "rel_error": rel})

    if args.out is not None:
        with args.out.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
