"""Oscillator level sets on the occupation lattice and the (4,5) -> E=1 pulse plans.

Prints each level set with its degeneracy, the plans, and a rational versus
near-irrational frequency comparison.

    python scripts/fig2_oscillator.py [--n-max 10]
"""

import argparse
from fractions import Fraction

from qls.oscillator_lattice import degeneracy, level_set_points, plan_transition


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-max", type=int, default=10)
    args = ap.parse_args(argv)

    for E in range(1, 10):
        pts = level_set_points(E, 1, 1, args.n_max)
        print(f"E_{E}: degeneracy {len(pts):2d}  {[tuple(p) for p in pts]}")

    print("\nplans from (4,5) to E = 1:")
    for plan in plan_transition((4, 5), 1, 1, 1):
        steps = ", ".join(f"{s.axis}{s.delta:+d} ({s.label()})" for s in plan)
        print(f"  {steps:40s} path {[tuple(p) for p in plan.path((4, 5))]}")

    # 1 : sqrt(2) approximated by continued-fraction convergents: degeneracy thins out
    print("\nmax degeneracy over E <= 40 for w = (1, r):")
    for r in (Fraction(1), Fraction(3, 2), Fraction(7, 5), Fraction(17, 12), Fraction(41, 29), Fraction(99, 70)):
        energies = {i + j * r for i in range(41) for j in range(41) if i + j * r <= 40}
        worst = max(degeneracy(E, 1, r, 40) for E in energies)
        print(f"  r = {str(r):6s} ({float(r):.6f}): {worst}")
    return 0


if __name__ == "__main__":
    raise SystemExit(run())
