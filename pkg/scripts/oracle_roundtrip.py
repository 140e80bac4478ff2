"""Recover random atomic measures from their extended moment tables and summarize the residuals.

    python3 scripts/oracle_roundtrip.py --n 100 --seed 2024
"""
import argparse
import time

import numpy as np

from moment2d import BoxSpec, match_measures, moments_of_measure, random_measure, solve_extended
from moment2d.extended import cyclic_residual, resolvent_residual


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--max-atoms", type=int, default=6)
    ap.add_argument("--box", default="2,2,3")
    ap.add_argument("--sub-box", default="1,1,1")
    args = ap.parse_args()
    box = BoxSpec(*map(int, args.box.split(",")))
    sub = BoxSpec(*map(int, args.sub_box.split(",")))

    rng = np.random.default_rng(args.seed)
    cols = ("loc", "weight", "sym", "comm", "cayley", "resolvent", "cyclic", "recon")
    rows, fails = [], []
    t0 = time.perf_counter()
    for j in range(args.n):
        mu = random_measure(rng, int(rng.integers(1, args.max_atoms + 1)))
        sol = solve_extended(moments_of_measure(mu, box), sub)
        if not sol.success:
            fails.append((j, sol.report.failed_stage, sol.report.message))
            continue
        loc, w = match_measures(sol.measure, mu)
        r = sol.report
        rows.append((loc, w, r.sym_residual, r.comm_residual, r.cayley_unitarity,
                     resolvent_residual(sol.gns, sol.operators), cyclic_residual(sol.gns, sol.operators),
                     r.reconstruction_residual))
    dt = time.perf_counter() - t0

    print(f"{args.n} measures, box {box.m_max},{box.n_max},{box.k_abs_max}, Gram sub-box {sub.m_max},{sub.n_max},{sub.k_abs_max}: {dt:.2f}s, {len(fails)} failures")
    if rows:
        arr = np.array(rows)
        print(f"{'':>10} {'median':>10} {'max':>10}")
        for name, col in zip(cols, arr.T):
            print(f"{name:>10} {np.median(col):10.2e} {col.max():10.2e}")
    for f in fails[:10]:
        print("failed:", *f)


if __name__ == "__main__":
    main()
