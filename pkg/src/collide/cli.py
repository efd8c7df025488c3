"""Command-line entry point: ``collide <subcommand> ...``.

Exit codes: 0 nothing found, 3 findings (collisions, effects, violations or a
compromised scenario), 2 usage or input error, 4 environment unavailable
(live mode without a usable case-insensitive mount or utility).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__, foldcore
from .errors import CollideError, MountNotCaseInsensitive, PromptRequired, UtilityMissing

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE, EXIT_ENV = 0, 3, 2, 4
ERROR_PREFIX = "collide: error: "

# Per-command default profile when neither the config nor the flags set one.
COMMAND_PROFILE = {"fold": "ascii", "scan": "full-fold", "classify": "ascii", "model": "ascii", "trace": "ascii"}

EPILOG = """\
examples:
  $ collide fold --profile full-fold floß FLOSS
  collide
  $ collide fold --profile ascii floß FLOSS
  distinct
  $ collide fold --profile simple-fold Kelvin kelvin
  collide
  $ collide fold --profile ascii Kelvin kelvin
  distinct
  $ collide classify --utility tar --case file-file-d1-tf
  file-file-d1-tf tar (model): ×
"""


class UsageError(CollideError):
    """Bad flags or unreadable input."""


@dataclass
class RunConfig:
    profile: str | None = None
    format: str = "text"  # text | json
    mount: str | None = None
    timeout: float = 30.0
    strict: bool = False
    unicode_version: str = field(default=foldcore.UNICODE_VERSION, init=False)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path: str | os.PathLike) -> dict:
    """Read ``key = value`` lines. ``#`` starts a comment; values may be quoted."""
    known = {f.name for f in fields(RunConfig) if f.init}
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip().strip("'\"")
        if not sep or key not in known:
            raise UsageError(f"{path}:{lineno}: expected one of {', '.join(sorted(known))} = value")
        if key == "timeout":
            out[key] = float(value)
        elif key == "strict":
            out[key] = value.lower() in ("1", "true", "yes", "on")
        elif key == "format" and value not in ("text", "json"):
            raise UsageError(f"{path}:{lineno}: format must be text or json")
        else:
            out[key] = value
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if os.environ.get("COLLIDE_MOUNT"):
        cfg.mount = os.environ["COLLIDE_MOUNT"]
    if args.config:
        for key, value in load_config(args.config).items():
            setattr(cfg, key, value)
    if args.profile:
        cfg.profile = args.profile
    if args.json:
        cfg.format = "json"
    if getattr(args, "mount", None):
        cfg.mount = args.mount
    if args.timeout is not None:
        cfg.timeout = args.timeout
    if args.strict:
        cfg.strict = True
    if cfg.profile is None:
        cfg.profile = COMMAND_PROFILE.get(args.command, foldcore.DEFAULT_PROFILE)
    if cfg.profile not in foldcore.PROFILE_IDS:
        raise UsageError(f"unknown profile {cfg.profile!r}; choose from {', '.join(foldcore.PROFILE_IDS)}")
    return cfg


# --- output helpers ---------------------------------------------------------------


def _color(text: str, code: str, out) -> str:
    if os.environ.get("NO_COLOR") or not getattr(out, "isatty", lambda: False)():
        return text
    return f"\033[{code}m{text}\033[0m"


def _emit_json(payload: dict, cfg: RunConfig, out) -> None:
    out.write(json.dumps({**payload, "config": cfg.to_dict()}, ensure_ascii=False, indent=2) + "\n")


def _read_input(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8", errors="surrogateescape")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


# --- subcommands ------------------------------------------------------------------


def cmd_fold(args, cfg: RunConfig, out) -> int:
    prof = foldcore.get_profile(cfg.profile)
    folded = [{"name": n, "folded": foldcore.fold_text(n, prof)} for n in args.names]
    if len(args.names) < 2:
        verdict = None
    elif len(set(args.names)) == 1:
        verdict = "match"
    else:
        keys = {}
        verdict = "distinct"
        for n in args.names:
            prev = keys.setdefault(foldcore.fold_name(n, prof), n)
            if prev != n:
                verdict = "collide"
    if cfg.format == "json":
        _emit_json({"names": folded, "verdict": verdict}, cfg, out)
    elif verdict is None:
        out.write(folded[0]["folded"] + "\n")
    else:
        out.write(_color(verdict, "31", out) + "\n" if verdict == "collide" else verdict + "\n")
    return EXIT_FINDINGS if verdict == "collide" else EXIT_OK


def _listing_entries(path: str):
    from .scanner import parse_listing

    return parse_listing(_read_input(path).splitlines())


def cmd_scan(args, cfg: RunConfig, out) -> int:
    from . import scanner

    baseline = _listing_entries(args.baseline) if args.baseline else ()
    if args.tar:
        try:
            data = Path(args.tar).read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read {args.tar}: {exc.strerror}") from None
        report = scanner.scan_tar(data, cfg.profile, baseline=baseline)
    elif args.dir:
        if not Path(args.dir).is_dir():
            raise UsageError(f"{args.dir} is not a directory")
        report = scanner.scan_paths(scanner.walk_entries(args.dir), cfg.profile, baseline=baseline,
                                    strict=cfg.strict)
    else:
        report = scanner.scan_paths(_listing_entries(args.list), cfg.profile, baseline=baseline,
                                    strict=cfg.strict)
    if cfg.format == "json":
        _emit_json(report.to_dict(), cfg, out)
    else:
        out.write(f"# {scanner.CAVEAT}\n")
        out.write(f"# profile {report.profile}, Unicode {foldcore.UNICODE_VERSION}, {report.entries} entries\n")
        for g in report.groups:
            members = ", ".join(f"{m.path} ({m.kind})" for m in g.members)
            out.write(f"{_color('collision', '31', out)} {g.kind_pair}: {members}\n")
            out.write(f"  predicted survivor: {g.predicted_survivor}\n  effect: {g.predicted_effect}\n")
        for issue in report.issues:
            out.write(f"warning: {issue}\n")
        if not report.groups:
            out.write("no collisions\n")
    return EXIT_FINDINGS if report.groups else EXIT_OK


def _find_case(case_id: str):
    from .casegen import get_case

    try:
        return get_case(case_id)
    except KeyError:
        raise UsageError(f"unknown case {case_id!r}; see 'collide gen --list'") from None


def cmd_gen(args, cfg: RunConfig, out) -> int:
    from .casegen import FIXTURES, generate_matrix, materialize
    from .vfs import FsImage

    if args.list or not args.id:
        cases = generate_matrix() + (generate_matrix(control=True) if args.controls else [])
        if args.fixtures:
            cases += [make() for make in FIXTURES.values()]
        for tc in cases:
            out.write(tc.to_json() + "\n")
        return EXIT_OK
    tc = _find_case(args.id)
    if not args.out:
        out.write(tc.to_json() + "\n")
        return EXIT_OK
    if args.out == "-" or args.out.endswith(".dump"):
        image = FsImage()
        report = materialize(tc, image)
        text = image.dump()
        if args.out == "-":
            out.write(text)
        else:
            Path(args.out).write_text(text, encoding="utf-8")
    else:
        dest = Path(args.out)
        dest.mkdir(parents=True, exist_ok=True)
        report = materialize(tc, dest)
    for path, reason in report.skipped:
        print(f"collide: warning: skipped {path}: {reason}", file=sys.stderr)
    if args.out != "-":
        out.write(f"{tc.id}: {len(report.created)} entries written to {args.out}\n")
    return EXIT_OK


def _prompt_script(args):
    if not args.answer:
        from .harness import DEFAULT_PROMPT_SCRIPT

        return DEFAULT_PROMPT_SCRIPT
    return args.answer[0] if len(args.answer) == 1 and args.sticky else list(args.answer)


def cmd_model(args, cfg: RunConfig, out) -> int:
    from .harness import prepare_image
    from .refutils import run_model

    tc = _find_case(args.case)
    image = prepare_image(tc, cfg.profile)
    outcome = run_model(args.utility, image, "/src", "/dst", prompt_script=_prompt_script(args), trace=args.trace)
    if cfg.format == "json":
        payload = {"case": tc.id, "utility": args.utility, "terminated": outcome.terminated,
                   "events": [asdict(e) for e in outcome.events], "warnings": outcome.warnings}
        if args.dump:
            payload["dump"] = outcome.final_image.dump()
        if args.trace:
            payload["trace"] = [r.to_line() for r in outcome.trace]
        _emit_json(payload, cfg, out)
        return EXIT_OK
    for e in outcome.events:
        extra = f" ({e.detail})" if e.detail else ""
        out.write(f"{e.op:8} {e.result:14} {e.path}{extra}\n")
    out.write(f"terminated: {outcome.terminated}\n")
    if args.dump:
        out.write(outcome.final_image.dump())
    if args.trace:
        out.write("".join(r.to_line() + "\n" for r in outcome.trace))
    return EXIT_OK


def cmd_classify(args, cfg: RunConfig, out) -> int:
    from .harness import CODE_ORDER, run_case, run_live

    tc = _find_case(args.case)
    script = _prompt_script(args)
    model = run_case(tc, args.utility, profile=cfg.profile, prompt_script=script)
    result, mode, discrepancies = model, "model", []
    if args.live:
        if not cfg.mount:
            raise MountNotCaseInsensitive("live mode needs --mount or COLLIDE_MOUNT")
        result = run_live(tc, args.utility, mount=cfg.mount, prompt_script=script, timeout=cfg.timeout)
        mode = "live"
        if set(model.classification.codes) != set(result.classification.codes):
            discrepancies.append({"case": tc.id, "utility": args.utility,
                                  "model": model.cell, "live": result.cell})
    cls = result.classification
    codes = sorted(cls.codes, key=CODE_ORDER.index)
    if cfg.format == "json":
        _emit_json({"case": tc.id, "utility": args.utility, "mode": mode, "codes": codes,
                    "evidence": [{"code": c, "text": t} for c, t in cls.evidence],
                    "note": cls.note, "discrepancies": discrepancies}, cfg, out)
    else:
        out.write(f"{tc.id} {args.utility} ({mode}): {cls.cell or '-'}\n")
        if args.verbose:
            for code, text in cls.evidence:
                out.write(f"  {code} {text}\n")
            if cls.note:
                out.write(f"  note: {cls.note}\n")
        for d in discrepancies:
            out.write(f"  discrepancy: model {d['model'] or '-'} vs live {d['live'] or '-'}\n")
    return EXIT_FINDINGS if codes or discrepancies else EXIT_OK


def cmd_table(args, cfg: RunConfig, out) -> int:
    from .harness import LABELS, compare_golden, render_table, reproduce_table

    table = reproduce_table(depth=args.depth)
    mismatches = compare_golden(table)
    if cfg.format == "json":
        cells = {row: {LABELS.get(u, u): r.cell for u, r in cols.items()} for row, cols in table.items()}
        _emit_json({"depth": args.depth, "cells": cells,
                    "mismatches": [dict(zip(("row", "utility", "expected", "got"), m)) for m in mismatches]},
                   cfg, out)
    else:
        out.write(render_table(table))
        for row, utility, expected, got in mismatches:
            out.write(f"mismatch {row} {utility}: expected {expected}, got {got}\n")
    return EXIT_FINDINGS if mismatches else EXIT_OK


def cmd_trace(args, cfg: RunConfig, out) -> int:
    from . import tracer

    table = tracer.ingest(_read_input(args.input).splitlines())
    violations = tracer.detect(table, cfg.profile, device_filter=args.device_filter or None)
    for err in table.parse_errors:
        print(f"collide: warning: {err}", file=sys.stderr)
    if table.unresolved_dirfd:
        print(f"collide: warning: {table.unresolved_dirfd} record(s) with an unknown dirfd skipped", file=sys.stderr)
    if cfg.format == "json" and not args.fig4:
        _emit_json({"violations": [v.to_dict() for v in violations], "records": len(table.records),
                    "parse_errors": len(table.parse_errors), "unresolved_dirfd": table.unresolved_dirfd},
                   cfg, out)
    else:
        out.write("".join(tracer.render_violation(v) for v in violations))
    return EXIT_FINDINGS if violations else EXIT_OK


def cmd_adapt_auditd(args, cfg: RunConfig, out) -> int:
    from .tracer import adapt_auditd

    for line in adapt_auditd(_read_input(args.input).splitlines()):
        out.write(line + "\n")
    return EXIT_OK


def cmd_scenario(args, cfg: RunConfig, out) -> int:
    from .refutils.scenarios import SCENARIOS, run_scenario

    names = list(SCENARIOS) if args.name == "all" else [args.name]
    results = []
    for name in names:
        try:
            results.append(run_scenario(name, fold=not args.no_fold))
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    if cfg.format == "json":
        _emit_json({"fold": not args.no_fold, "scenarios": [r.to_dict() for r in results]}, cfg, out)
    else:
        for r in results:
            status = _color("COMPROMISED", "31", out) if r.compromised else "ok"
            out.write(f"{r.name}: {status}\n")
            for line in r.summary:
                out.write(f"  {line}\n")
            if args.verbose:
                for step in r.steps:
                    out.write(f"    {step}\n")
    return EXIT_FINDINGS if any(r.compromised for r in results) else EXIT_OK


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .refutils import UTILITIES

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key = value defaults (flags win)")
    common.add_argument("--profile", choices=foldcore.PROFILE_IDS, help="fold profile")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--timeout", type=float, help="seconds per live utility run")
    common.add_argument("--strict", action="store_true", help="treat malformed input as an error")

    parser = argparse.ArgumentParser(
        prog="collide", description="Find and reproduce file-name collisions on case-insensitive file systems.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        return p

    p = add("fold", cmd_fold, "fold names and report whether they collide")
    p.add_argument("names", nargs="+", metavar="NAME")

    p = add("scan", cmd_scan, "list colliding entries in a tar archive, directory or listing")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--tar", metavar="FILE", help="tar archive (optionally gzip, bzip2 or xz compressed)")
    src.add_argument("--dir", metavar="PATH", help="host directory tree")
    src.add_argument("--list", metavar="FILE", help="listing: one 'name<TAB>kind' per line ('-' for stdin)")
    p.add_argument("--baseline", metavar="FILE", help="listing of entries already in the destination")

    p = add("gen", cmd_gen, "list test cases or build one")
    p.add_argument("--list", action="store_true", help="print every case as a JSON line")
    p.add_argument("--controls", action="store_true", help="include the no-collision controls")
    p.add_argument("--fixtures", action="store_true", help="include the scenario fixtures")
    p.add_argument("--id", metavar="CASE")
    p.add_argument("--out", metavar="DIR|FILE.dump|-", help="empty host dir, or an image dump file")

    for name, func, text in (("model", cmd_model, "run a utility model on a case"),
                             ("classify", cmd_classify, "classify what a utility does to a case")):
        p = add(name, func, text)
        p.add_argument("--utility", required=True, choices=UTILITIES)
        p.add_argument("--case", required=True, metavar="CASE")
        p.add_argument("--answer", action="append", metavar="ANSWER",
                       help="scripted unzip answer (repeatable; default: overwrite every prompt)")
        p.add_argument("--sticky", action="store_true", help="use a single --answer for every prompt")
        if name == "model":
            p.add_argument("--dump", action="store_true", help="print the final image")
            p.add_argument("--trace", action="store_true", help="print the emitted trace records")
        else:
            p.add_argument("--live", action="store_true", help="also run the installed utility")
            p.add_argument("--mount", metavar="PATH", help="case-insensitive mount (default $COLLIDE_MOUNT)")
            p.add_argument("-v", "--verbose", action="store_true", help="print evidence")

    p = add("table", cmd_table, "reproduce the utility-by-resource result table")
    p.add_argument("--depth", type=int, choices=(1, 2), default=1)

    p = add("trace", cmd_trace, "detect create/use name inconsistencies in a trace")
    p.add_argument("--in", dest="input", required=True, metavar="FILE", help="normalized trace ('-' for stdin)")
    p.add_argument("--device-filter", action="append", metavar="DEV", help="only watch this device (repeatable)")
    p.add_argument("--fig4", action="store_true", help="print USE/CREATE blocks even with --json")

    p = add("adapt-auditd", cmd_adapt_auditd, "convert raw auditd records to the normalized trace format")
    p.add_argument("--in", dest="input", required=True, metavar="FILE")

    p = add("scenario", cmd_scenario, "run an end-to-end attack scenario")
    p.add_argument("name", help="git_cve, rsync_traversal, httpd_migration, dpkg_db or all")
    p.add_argument("--no-fold", action="store_true", help="control run on a case-sensitive destination")
    p.add_argument("-v", "--verbose", action="store_true", help="print every step")
    return parser


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = build_config(args)
        return args.func(args, cfg, out)
    except (MountNotCaseInsensitive, UtilityMissing) as exc:
        print(f"{ERROR_PREFIX}{exc}", file=sys.stderr)
        return EXIT_ENV
    except PromptRequired as exc:
        print(f"{ERROR_PREFIX}{exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # Reader went away (e.g. piped into head); keep the interpreter from
        # complaining again when it flushes stdout on exit.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except (CollideError, OSError, ValueError) as exc:
        print(f"{ERROR_PREFIX}{exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
