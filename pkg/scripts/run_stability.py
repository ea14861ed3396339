"""Noisy sine pairs checked against the bound d_E <= 2 eps (rank + rank).

    python scripts/run_stability.py [--trials N] [--eps 0.02 0.05 0.1] [--seed N]
"""
import argparse

from treedist.experiments import StabilityConfig, run_stability


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--eps", type=float, nargs="+", default=[0.02, 0.05, 0.1])
    p.add_argument("--trials", type=int, default=17)
    p.add_argument("--grid-step", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    cfg = StabilityConfig(tuple(args.eps), args.trials, grid_step=args.grid_step, seed=args.seed)
    reports = run_stability(cfg)
    for eps in cfg.epsilons:
        rs = [r for r in reports if r.epsilon == eps]
        worst = max(r.distance / r.bound for r in rs)
        held = sum(r.satisfied for r in rs)
        print(f"eps {eps}: bound held in {held}/{len(rs)} trials, max d_E / bound {worst:.3f}")
    if not all(r.satisfied for r in reports):
        raise SystemExit(1)


if __name__ == "__main__":
    main()
