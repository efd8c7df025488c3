"""Rebuild the utility-by-collision-type matrix from the models and check
every cell against the frozen expectations.

    python scripts/reproduce_table.py [--depth 1|2] [--json]
"""

import argparse
import json
import sys

from collide.harness import compare_golden, render_table, reproduce_table


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, choices=(1, 2), default=1)
    ap.add_argument("--json", action="store_true", help="print cells as JSON")
    args = ap.parse_args()

    table = reproduce_table(depth=args.depth)
    if args.json:
        cells = {row: {u: r.cell for u, r in cols.items()} for row, cols in table.items()}
        print(json.dumps(cells, ensure_ascii=False, indent=2))
    else:
        print(render_table(table))
    if args.depth != 1:
        return 0
    mismatches = compare_golden(table)
    for row, utility, want, got in mismatches:
        print(f"mismatch {row} {utility}: expected {want!r}, got {got!r}", file=sys.stderr)
    print(f"{sum(len(c) for c in table.values()) - len(mismatches)} cells match", file=sys.stderr)
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
