"""Compute the eps certificate for a scenario and check it against a simulation.

    python scripts/certify_demo.py [--scenario ra_vanishing] [--no-sim]
"""

import argparse

from esgen import scenario as scn
from esgen.cli import certify_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="ra_vanishing")
    ap.add_argument("--no-sim", action="store_true", help="skip the follow-up simulation")
    args = ap.parse_args()
    res = certify_scenario(scn.load(args.scenario), run=not args.no_sim)
    cert = res.certificate
    print(f"case      {cert.case}")
    print(f"eps_bar   {cert.eps_bar:.6g}")
    for key in sorted(cert.intermediates):
        print(f"{key:<9} {cert.intermediates[key]:.6g}")
    for check in res.checks:
        print(check.line())


if __name__ == "__main__":
    main()
