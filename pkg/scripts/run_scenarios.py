"""Run each attack scenario with and without a folding destination and
print whether the planted outcome happened.

    python scripts/run_scenarios.py [-v]
"""

import argparse
import sys

from collide.refutils.scenarios import SCENARIOS, run_scenario


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="print the step log")
    args = ap.parse_args()

    unexpected = 0
    for name in SCENARIOS:
        folded, plain = run_scenario(name, fold=True), run_scenario(name, fold=False)
        print(f"{name:16} folding: {'compromised' if folded.compromised else 'intact':12} "
              f"plain: {'compromised' if plain.compromised else 'intact'}")
        if args.verbose:
            for line in folded.summary + folded.steps:
                print(f"    {line}")
        unexpected += (not folded.compromised) + plain.compromised
    return 1 if unexpected else 0


if __name__ == "__main__":
    sys.exit(main())
