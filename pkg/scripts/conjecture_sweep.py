"""Dispatched allocation versus grid optimum on random memory profiles."""
import argparse
import json
import statistics

import numpy as np

from allocopt.errors import EnumerationSizeError
from allocopt.exact_core import SystemParams
from allocopt.memory_limited import MemoryProfile
from allocopt.oracle import conjecture_report
from allocopt.q_relaxation import pt_relation


def sample(rng, max_nodes):
    N = int(rng.integers(3, max_nodes + 1))
    caps = np.round(rng.uniform(0.3, 1.6, N), 2)
    prof = MemoryProfile.from_caps(caps)
    lo = max(1.0, prof.caps[0]) + 0.05
    if prof.total <= lo:
        return None
    T = float(np.round(rng.uniform(lo, prof.total), 2))
    p = float(rng.uniform(0.02, 0.98))
    return SystemParams(N, p, T), prof


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--max-nodes", type=int, default=5)
    ap.add_argument("--granularity", type=int, default=10)
    ap.add_argument("--seed", type=int, default=20130)
    ap.add_argument("--out", help="JSON lines file with one report per instance")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    by_regime = {-1: [], 0: [], 1: []}
    reports = []
    while len(reports) < args.count:
        drawn = sample(rng, args.max_nodes)
        if drawn is None:
            continue
        params, prof = drawn
        try:
            rep = conjecture_report(params, prof, args.granularity)
        except EnumerationSizeError:
            continue
        reports.append(rep)
        by_regime[pt_relation(params.access_prob, params.budget)].append(rep["gap"])

    for key, name in ((-1, "pT<1"), (1, "pT>1")):
        g = by_regime[key]
        if g:
            print(f"{name}: n={len(g)} median gap={statistics.median(g):.4f} mean={statistics.fmean(g):.4f} "
                  f"max={max(g):.4f} share>0.02={sum(x > 0.02 for x in g) / len(g):.2f}")
    if args.out:
        with open(args.out, "w") as fh:
            for rep in reports:
                fh.write(json.dumps(rep) + "\n")


if __name__ == "__main__":
    main()
