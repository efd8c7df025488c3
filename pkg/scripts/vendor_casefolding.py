"""Regenerate the embedded CaseFolding table from a UCD JSON dump.

The sandbox that produced the shipped table had no route to unicode.org, so
the source was the ``ucd-full`` npm package, which republishes the UCD files
as JSON. Usage::

    npm pack ucd-full@13.0.0 && tar xzf ucd-full-13.0.0.tgz
    python scripts/vendor_casefolding.py package/CaseFolding.json 13.0.0
"""

import argparse
import json
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "collide" / "data"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("json_path", type=Path)
    ap.add_argument("version")
    args = ap.parse_args()

    rows = json.loads(args.json_path.read_text())["CaseFolding"]
    out = OUT_DIR / f"CaseFolding-{args.version}.txt"
    with out.open("w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# CaseFolding-{args.version}.txt (UCD), fields: code; status; mapping;\n")
        for row in rows:
            fh.write(f"{row['codepoint']}; {row['status']}; {row['mapping']};\n")
    print(f"wrote {len(rows)} entries to {out}")


if __name__ == "__main__":
    main()
