"""Simulate every bundled scenario and summarise the final state and control amplitude.

    python scripts/run_scenarios.py [--out DIR]
"""

import argparse
import os

import numpy as np

from esgen import scenario as scn
from esgen.cli import run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs", help="directory for the trajectory CSVs")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    print(f"{'scenario':<22}{'x(T)':>12}{'|x(T)-x*|':>12}{'amp early':>12}{'amp late':>12}")
    for name in scn.bundled_names():
        sc = scn.load(name)
        system, traj = run_scenario(sc)
        cost = system.cost if hasattr(system, "cost") else system.clf
        xs = np.zeros(cost.dim) if cost.minimizer is None else cost.minimizer
        dist = float(np.linalg.norm(traj.final - xs))
        t_end = traj.times[-1]
        early = traj.control_amplitude(0.0, 0.2 * t_end)
        late = traj.control_amplitude(0.8 * t_end, t_end)
        traj.to_csv(os.path.join(args.out, f"{name}.csv"))
        print(f"{name:<22}{traj.final[0]:>12.5g}{dist:>12.4g}{early:>12.4g}{late:>12.4g}")


if __name__ == "__main__":
    main()
