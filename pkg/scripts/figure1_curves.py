"""Exact and relaxed objective curves over the support size n (N=45, T=10)."""
import argparse
from pathlib import Path

from allocopt.exact_core import SystemParams
from allocopt.q_relaxation import argmax_p2, curve_csv, objective_curve, solve_p1, solve_p2


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=45)
    ap.add_argument("--budget", type=float, default=10.0)
    ap.add_argument("--probs", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    ap.add_argument("--outdir", default="figure1")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for p in args.probs:
        params = SystemParams(args.nodes, p, args.budget)
        path = out / f"curve_p{p:g}.csv"
        path.write_text(curve_csv(objective_curve(params)))
        p2 = solve_p2(params)
        print(f"p={p:g} pT={p * args.budget:g}: P1 n*={solve_p1(params).n_star}  "
              f"P2 {p2.case_label} n*={p2.n_star}  relaxed argmax={argmax_p2(params)}  -> {path}")


if __name__ == "__main__":
    main()
