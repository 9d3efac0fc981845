"""Onset of the twin-peak ambiguity as feedback approaches the truth.

For each fixed theta, runs repeated trials and reports the median and
interquartile range of the measurement index at which the rival peak
first reaches half the main peak's height. Trials where that never
happens within the budget are censored and printed as "> max".
"""

import argparse

from su11sim import threshold_scan


def _fmt(value, max_measurements: int) -> str:
    return f"> {max_measurements}" if value is None else str(value)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--thetas", default="0.65,0.70,0.74,0.745",
                    help="comma-separated feedback phases")
    ap.add_argument("--phi-true", type=float, default=0.75)
    ap.add_argument("--mean-photons", type=float, default=4.0)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--max-measurements", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    result = threshold_scan(
        thetas=tuple(float(s) for s in args.thetas.split(",")),
        phi_true=args.phi_true,
        mean_photons=args.mean_photons,
        trials=args.trials,
        max_measurements=args.max_measurements,
        master_seed=args.seed,
    )

    print(f"phi_true={args.phi_true}, nbar={args.mean_photons}, "
          f"{args.trials} trials/theta, budget {args.max_measurements}, "
          f"seed {args.seed}")
    print(f"{'theta':>7} {'median':>8} {'q25':>8} {'q75':>8} {'censored':>9}")
    for row in result.rows:
        print(f"{row.theta:7.3f} {_fmt(row.median, args.max_measurements):>8} "
              f"{_fmt(row.q25, args.max_measurements):>8} "
              f"{_fmt(row.q75, args.max_measurements):>8} "
              f"{row.censored:6d}/{row.trials}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
