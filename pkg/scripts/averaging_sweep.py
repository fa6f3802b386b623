"""Sup-distance between the oscillatory and the averaged trajectory as eps shrinks.

    python scripts/averaging_sweep.py [--scenario de_classic] [--t-end 3] [--eps 0.1 0.05 0.025]
"""

import argparse

from esgen import scenario as scn
from esgen.cli import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="de_classic")
    ap.add_argument("--t-end", type=float, default=3.0)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.025])
    args = ap.parse_args()
    sc = scn.load(args.scenario).override("t_end", args.t_end)
    rows = run_sweep(sc, "eps", args.eps)
    print(f"{'eps':>8}{'sup |x - x_avg|':>18}{'ratio to first':>16}")
    first = rows[0]["sup_deviation"]
    for r in rows:
        print(f"{r['value']:>8.4g}{r['sup_deviation']:>18.5g}{r['sup_deviation'] / first:>16.4f}")


if __name__ == "__main__":
    main()
