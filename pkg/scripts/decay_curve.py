"""Write the novelty-vs-staleness curve for a cell that is never revisited."""

import argparse
import csv
import sys

from decmarl.mental_state import time_novelty_curve


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--increment", type=float, default=0.01)
    args = p.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["step", "duration", "novelty"])
    for t, d, f in time_novelty_curve(args.steps, args.increment):
        w.writerow([t, repr(d), repr(f)])


if __name__ == "__main__":
    main()
