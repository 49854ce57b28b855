"""Run the reference triples over several seeds and render every run's figures."""

import argparse
from pathlib import Path

from prednm.harness import emit_plots, suite


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/suite")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--duration", type=float, default=1000.0)
    ap.add_argument("--no-plots", action="store_true")
    args = ap.parse_args()
    for seed in range(1, args.seeds + 1):
        out = Path(args.out) / f"seed{seed}"
        for rep in suite(out, seed=seed, duration=args.duration):
            if not args.no_plots:
                emit_plots(rep)
            print(f"seed {seed} {rep.label:22s} rollbacks={rep.rollbacks} polls={rep.polls} "
                  f"max_t_ahead={rep.max_t_ahead:g}")
        print(f"summary: {out / 'summary.csv'}")


if __name__ == "__main__":
    main()
