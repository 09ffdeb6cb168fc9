#!/usr/bin/env python3
"""Depth-width phase plane for square wells: where does the outer minimum
get trapped inside the well?

sqrt(depth) * width >= pi is a sufficient condition for interior attainment;
this scan probes how the observed attainment behaves around that curve (no
sharpness is claimed).  Writes
`beta,width,criterion,attained,argmin,m_estimate`.

Usage:
  python scripts/well_phase_plane.py --out wells.csv \
      --betas 1 2 4 9 --widths 0.5 1 1.5 2 --h 0.05 --step 0.1
"""

import argparse
import math

from supsharp.outer import minimize, trapped_mode_criterion
from supsharp.potential import Potential


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--betas", type=float, nargs="+",
                    default=[1.0, 2.0, 4.0, 9.0])
    ap.add_argument("--widths", type=float, nargs="+",
                    default=[0.5, 1.0, 1.5, 2.0])
    ap.add_argument("--h", type=float, default=0.05,
                    help="mesh width override (default 0.05 keeps runs quick)")
    ap.add_argument("--step", type=float, default=0.1)
    ap.add_argument("--out", default="well_phase_plane.csv")
    args = ap.parse_args()

    rows = ["beta,width,criterion,attained,argmin,m_estimate"]
    for beta in args.betas:
        for width in args.widths:
            b, c = -0.5 * width, 0.5 * width
            crit = trapped_mode_criterion(args.alpha, beta, b, c)
            p = Potential.square_well(args.alpha, beta, b, c)
            window = (b, c) if crit else None
            res = minimize(p, window=window, step=args.step,
                           h_target=args.h)
            rows.append(f"{beta:.6g},{width:.6g},{str(crit).lower()},"
                        f"{res.attained},{res.argmin:.6g},"
                        f"{res.m_estimate:.12g}")
            print(rows[-1])
    with open(args.out, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {args.out} ({len(rows) - 1} rows)")


if __name__ == "__main__":
    main()
