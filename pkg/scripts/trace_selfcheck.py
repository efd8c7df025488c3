"""Trace every model over the collision matrix and its controls and report
how many runs the violation detector flags.

    python scripts/trace_selfcheck.py [--show CASE_ID]
"""

import argparse
import sys

from collide.casegen import generate_matrix, get_case
from collide.harness import prepare_image
from collide.refutils import run_model
from collide.tracer import detect, ingest, render_violation

TRACED = ("tar", "cp", "cp_star", "rsync")


def violations(tc, utility):
    return detect(ingest(run_model(utility, prepare_image(tc), trace=True).trace))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--show", metavar="CASE_ID", help="print the violation blocks for one case")
    args = ap.parse_args()

    if args.show:
        for utility in TRACED:
            print(f"== {utility}")
            for v in violations(get_case(args.show), utility):
                print(render_violation(v), end="")
        return 0

    missed = [(tc.id, u) for tc in generate_matrix() for u in TRACED if not violations(tc, u)]
    noisy = [(tc.id, u) for tc in generate_matrix(control=True) for u in TRACED if violations(tc, u)]
    print(f"collision runs flagged: {len(generate_matrix()) * len(TRACED) - len(missed)}"
          f"/{len(generate_matrix()) * len(TRACED)}")
    print(f"control runs flagged: {len(noisy)}")
    for case_id, utility in missed:
        print(f"missed {case_id} {utility}", file=sys.stderr)
    for case_id, utility in noisy:
        print(f"false alarm {case_id} {utility}", file=sys.stderr)
    return 1 if missed or noisy else 0


if __name__ == "__main__":
    sys.exit(main())
