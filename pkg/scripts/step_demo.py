"""Run the step-wise extension on the power moments of a random measure.

Prints the size of each step system, the number of states kept, how the
oracle's own path fares against every system and norm bound, and the
candidate measures found.

    python3 scripts/step_demo.py --atoms 3 --degree 6 --depth 5
    python3 scripts/step_demo.py --atoms 2 --no-oracle      # flat guess only
"""
import argparse

from moment2d import match_measures, random_measure, real_moments_of_measure
from moment2d.algorithm import build_model_space, check_oracle_path, run_algorithm
from moment2d.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--atoms", type=int, default=3)
    ap.add_argument("--degree", type=int, default=6)
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--beam", type=int, default=32)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--no-oracle", action="store_true")
    ap.add_argument("--modified", action="store_true")
    args = ap.parse_args()

    mu = random_measure(args.seed, args.atoms)
    s = real_moments_of_measure(mu, args.degree)
    print("measure:")
    for a in mu.sorted().atoms:
        print("  x1={:+.6f} x2={:+.6f} w={:.6f}".format(*a))

    ms = build_model_space(s)
    print(f"H0 dimension {ms.h0_dim} (monomials of degree <= {ms.deg})")
    path = check_oracle_path(ms, mu, args.depth)
    for r, (res, bad, ok, gap) in enumerate(zip(path.residuals, path.inconsistencies,
                                                 path.bound_ok, path.d_over_M), start=1):
        print(f"  oracle r={r}: residual {res:.1e}  system inconsistency {bad:.1e}  "
              f"bounds {'ok' if ok else 'VIOLATED'}  d-M {gap:+.2e}")

    cfg = RunConfig(depth=args.depth, beam=args.beam, seed=args.seed, modified=args.modified,
                    oracle=None if args.no_oracle else mu)
    res = run_algorithm(s, args.depth, cfg)
    for log in res.steps:
        print(f"  step {log.r}: {log.equations} real equations, {log.states_in} -> {log.states_out} states")
    print(f"verdict {res.verdict} at {res.stage}: {res.message}")
    for i, c in enumerate(res.candidates):
        loc, w = match_measures(c.measure, mu)
        print(f"  candidate {i}: {len(c.measure)} atoms, location err {loc:.1e}, weight err {w:.1e}")


if __name__ == "__main__":
    main()
