"""Bisection root p0 versus the closed-form approximation, over a (T, M) grid."""
import argparse
import csv
import sys

import numpy as np

from allocopt.errors import NoRootError
from allocopt.memory_limited import p0_approx, p0_solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budgets", type=float, nargs="+", default=[1.2, 1.4, 1.8, 2.4, 3.4, 4.4])
    ap.add_argument("--caps", type=float, nargs="+", default=list(np.round(np.arange(0.25, 0.95, 0.05), 2)))
    ap.add_argument("--out", help="CSV path (stdout when omitted)")
    args = ap.parse_args()

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["T", "M", "p0_bisection", "p0_approx", "abs_diff"])
    for T in args.budgets:
        for M in args.caps:
            if M >= T:
                continue
            try:
                exact = p0_solve(T, M)
            except NoRootError:
                exact = None
            approx = p0_approx(T, M)
            diff = abs(exact - approx) if exact is not None else None
            w.writerow([T, M, f"{exact:.12g}" if exact is not None else "none", f"{approx:.12g}",
                        f"{diff:.6g}" if diff is not None else ""])
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
