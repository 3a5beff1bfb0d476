#!/usr/bin/env python3
"""
Compare lid-driven cavity centerline profiles with the bundled Ghia tables.

Each Reynolds number is reached through the default continuation ladder.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from divcol import presets  # noqa: E402
from divcol.errors import InvalidInputError, SingularSystemError, SolverError  # noqa: E402
from divcol.utils import configure_logging  # noqa: E402
from divcol.verify import bundled_reference_path, load_reference_profiles, profile_deviation  # noqa: E402


def compare(re: float, formulation: str, kprime: int, mesh: int) -> dict:
    reference = load_reference_profiles(bundled_reference_path(re))
    solution, reports = presets.solve_case(presets.cavity2d(formulation, kprime=kprime, mesh=mesh, re=re))
    deviation = profile_deviation(solution, reference)
    deviation["stages"] = len(reports)
    return deviation


def main():
    parser = argparse.ArgumentParser(description='Cavity centerline profiles vs Ghia et al.')
    parser.add_argument('--re', default='100,400,1000', help='Comma separated Reynolds numbers')
    parser.add_argument('--formulation', default='vvp', choices=['vp', 'vvp'])
    parser.add_argument('--kprime', type=int, default=2, help="Pressure degree k'")
    parser.add_argument('--mesh', type=int, default=64, help='Elements per side (stretched)')

    args = parser.parse_args()
    configure_logging()

    failed = False
    for re in (float(r) for r in args.re.split(',')):
        print(f"\n🔄 Re = {re:g} ({args.formulation}, k'={args.kprime}, {args.mesh}x{args.mesh})")
        try:
            result = compare(re, args.formulation, args.kprime, args.mesh)
        except (InvalidInputError, SolverError, SingularSystemError) as e:
            print(f"❌ Re = {re:g} failed: {e}")
            failed = True
            continue
        print(f"   Continuation stages: {result['stages']}")
        print(f"   u_x vertical   RMS {result['ux_vertical_rms']:.3e}  max {result['ux_vertical_max']:.3e}")
        print(f"   u_y horizontal RMS {result['uy_horizontal_rms']:.3e}  max {result['uy_horizontal_max']:.3e}")

    print("\n✅ Done" if not failed else "\n⚠️  Some Reynolds numbers failed")
    return 1 if failed else 0


if __name__ == '__main__':
    sys.exit(main())
