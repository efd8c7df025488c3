"""Create-use name-inconsistency detection over normalized file-operation traces.

A resource is identified by its device and inode. The spelling used when a
resource is created is remembered; a later successful access that reaches the
same device|inode through a path that folds equal but differs bytewise is a
case-inconsistent use. A delete followed by a create whose name folds equal to
the deleted entry (but is spelled differently) is a delete-and-replace.

Input format, one record per line, tab separated::

    seq  op_class  syscall  program  pid  device  inode  path  dirfd  outcome

``op_class`` is create, use, delete, rename or opendir. ``dirfd`` is ``-`` or
a descriptor number; for opendir records it is the descriptor returned. A
relative ``path`` is resolved against the directory opened on that descriptor
by the same pid.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator

from . import foldcore
from .errors import ParseError

OP_CLASSES = ("create", "use", "delete", "rename", "opendir")
FIELDS = ("seq", "op_class", "syscall", "program", "pid", "device", "inode", "path", "dirfd", "outcome")


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    op_class: str
    syscall: str
    program: str
    pid: int
    device: str
    inode: int
    path: str
    dirfd: int | None = None
    outcome: str = "success"

    @property
    def ok(self) -> bool:
        return self.outcome == "success"

    def to_line(self) -> str:
        dirfd = "-" if self.dirfd is None else str(self.dirfd)
        return "\t".join(
            [str(self.seq), self.op_class, self.syscall, self.program, str(self.pid),
             self.device, str(self.inode), self.path, dirfd, self.outcome]
        )

    @classmethod
    def from_line(cls, line: str, lineno: int = 0) -> "TraceRecord":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != len(FIELDS):
            raise ParseError(lineno, f"expected {len(FIELDS)} tab-separated fields, got {len(parts)}")
        seq, op, syscall, program, pid, device, inode, path, dirfd, outcome = parts
        if op not in OP_CLASSES:
            raise ParseError(lineno, f"unknown op_class {op!r}")
        if outcome not in ("success", "failure"):
            raise ParseError(lineno, f"outcome must be success or failure, got {outcome!r}")
        try:
            return cls(int(seq), op, syscall, program, int(pid), device, int(inode), path,
                       None if dirfd in ("-", "") else int(dirfd), outcome)
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None


@dataclass(frozen=True)
class Violation:
    resource: tuple[str, int]
    created_as: str
    used_as: str
    create_ref: int
    use_ref: int
    kind: str  # case-inconsistent-use | delete-and-replace
    create_call: tuple[str, str] = ("?", "?")  # (program, syscall)
    use_call: tuple[str, str] = ("?", "?")
    replacement_inode: int | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["resource"] = list(self.resource)
        d["create_call"] = list(self.create_call)
        d["use_call"] = list(self.use_call)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Violation":
        d = dict(d)
        d["resource"] = tuple(d["resource"])
        d["create_call"] = tuple(d["create_call"])
        d["use_call"] = tuple(d["use_call"])
        return cls(**d)


@dataclass
class TraceTable:
    records: list[TraceRecord] = field(default_factory=list)
    parse_errors: list[ParseError] = field(default_factory=list)
    unresolved_dirfd: int = 0

    @property
    def inodes(self) -> dict[tuple[str, int], list[TraceRecord]]:
        out: dict[tuple[str, int], list[TraceRecord]] = {}
        for rec in self.records:
            if rec.op_class != "opendir":
                out.setdefault((rec.device, rec.inode), []).append(rec)
        return out


def _join(base: str, rel: str) -> str:
    return base.rstrip("/") + "/" + rel


def ingest(lines: Iterable[str | TraceRecord]) -> TraceTable:
    """Parse records, resolving dirfd-relative paths. Bad lines are counted
    and skipped; records whose descriptor is unknown are dropped with a
    warning count."""
    table = TraceTable()
    dirs: dict[tuple[int, int], str] = {}
    for lineno, line in enumerate(lines, 1):
        if isinstance(line, TraceRecord):
            rec = line
        else:
            if not line.strip() or line.startswith("#"):
                continue
            try:
                rec = TraceRecord.from_line(line, lineno)
            except ParseError as exc:
                table.parse_errors.append(exc)
                continue
        path = rec.path
        if rec.op_class == "opendir":
            if not path.startswith("/"):
                table.unresolved_dirfd += 1
                continue
            if rec.ok and rec.dirfd is not None:
                dirs[(rec.pid, rec.dirfd)] = path
            table.records.append(rec)
            continue
        if not path.startswith("/"):
            base = dirs.get((rec.pid, rec.dirfd)) if rec.dirfd is not None else None
            if base is None:
                table.unresolved_dirfd += 1
                continue
            rec = TraceRecord(rec.seq, rec.op_class, rec.syscall, rec.program, rec.pid,
                              rec.device, rec.inode, _join(base, path), rec.dirfd, rec.outcome)
        table.records.append(rec)
    table.records.sort(key=lambda r: r.seq)
    return table


def _components(path: str) -> tuple[str, ...]:
    return tuple(c for c in path.split("/") if c and c != ".")


def _fold_path(comps: tuple[str, ...], profile) -> tuple[str, ...] | None:
    try:
        return foldcore.fold_components(comps, profile)
    except Exception:
        return None


@dataclass
class _Tracked:
    spellings: list[tuple[str, ...]]
    first: TraceRecord


def detect(table: TraceTable, profile="ascii", device_filter: Iterable[str] | None = None) -> list[Violation]:
    """Flag case-inconsistent uses and delete-and-replace sequences."""
    prof = foldcore.get_profile(profile)
    devices = set(device_filter) if device_filter else None
    tracked: dict[tuple[str, int], _Tracked] = {}
    pending: dict[tuple[str, tuple[str, ...]], tuple[TraceRecord, tuple[str, ...], TraceRecord]] = {}
    out: list[Violation] = []

    def inconsistent(state: _Tracked, comps) -> tuple[str, ...] | None:
        if comps in state.spellings:
            return None
        folded = _fold_path(comps, prof)
        for spelling in state.spellings:
            if len(spelling) == len(comps) and _fold_path(spelling, prof) == folded:
                return spelling
        return None

    for rec in table.records:
        if rec.op_class == "opendir" or not rec.ok:
            continue
        if devices is not None and rec.device not in devices:
            continue
        key = (rec.device, rec.inode)
        comps = _components(rec.path)
        state = tracked.get(key)
        if rec.op_class in ("use", "delete") and state is not None:
            spelling = inconsistent(state, comps)
            if spelling is not None:
                out.append(Violation(key, "/" + "/".join(spelling), rec.path, state.first.seq, rec.seq,
                                     "case-inconsistent-use", (state.first.program, state.first.syscall),
                                     (rec.program, rec.syscall)))
        if rec.op_class == "create":
            folded = _fold_path(comps, prof)
            hit = pending.pop((rec.device, folded), None) if folded is not None else None
            if hit is not None:
                created, spelling, _deleted = hit
                if spelling != comps:
                    out.append(Violation((rec.device, created.inode), "/" + "/".join(spelling), rec.path,
                                         created.seq, rec.seq, "delete-and-replace",
                                         (created.program, created.syscall), (rec.program, rec.syscall),
                                         replacement_inode=rec.inode))
            if state is None:
                tracked[key] = _Tracked([comps], rec)
            elif comps not in state.spellings:
                state.spellings.append(comps)
        elif rec.op_class == "rename":
            if state is None:
                tracked[key] = _Tracked([comps], rec)
            else:
                state.spellings = [comps]
        elif rec.op_class == "delete" and state is not None:
            folded = _fold_path(comps, prof)
            match = next((s for s in state.spellings if _fold_path(s, prof) == folded), None)
            if match is not None:
                state.spellings.remove(match)
                pending[(rec.device, folded)] = (state.first, match, rec)
            if not state.spellings:
                del tracked[key]
    return out


def render_violation(v: Violation) -> str:
    """Two-line USE/CREATE block (REPLACE for delete-and-replace)."""
    device, inode = v.resource
    head = "REPLACE" if v.kind == "delete-and-replace" else "USE"
    use_inode = v.replacement_inode if v.replacement_inode is not None else inode
    return (
        f"{head} [msg={v.use_ref},'{v.use_call[0]}'.{v.use_call[1]}] {device}|{use_inode}| {v.used_as}\n"
        f"CREATE [msg={v.create_ref},'{v.create_call[0]}'.{v.create_call[1]}] {device}|{inode}| {v.created_as}\n"
    )


def violations_to_json(violations: list[Violation]) -> str:
    return json.dumps([v.to_dict() for v in violations], ensure_ascii=False, indent=2)


def violations_from_json(text: str) -> list[Violation]:
    return [Violation.from_dict(d) for d in json.loads(text)]


# --- auditd adapter ---------------------------------------------------------------

# x86_64 syscall numbers for the calls that matter here.
_SYSCALLS = {
    2: "open", 4: "stat", 6: "lstat", 82: "rename", 83: "mkdir", 84: "rmdir", 85: "creat",
    86: "link", 87: "unlink", 88: "symlink", 90: "chmod", 92: "chown", 133: "mknod",
    257: "openat", 258: "mkdirat", 259: "mknodat", 262: "newfstatat", 263: "unlinkat",
    264: "renameat", 265: "linkat", 266: "symlinkat", 268: "fchmodat", 316: "renameat2",
    437: "openat2",
}
_RENAMES = {"rename", "renameat", "renameat2"}
_KV = re.compile(r'(\w+)=("(?:[^"\\]|\\.)*"|\S+)')
_MSG = re.compile(r"msg=audit\([\d.]+:(\d+)\)")


def _kv(line: str) -> dict[str, str]:
    return {k: v.strip('"') for k, v in _KV.findall(line)}


def adapt_auditd(lines: Iterable[str]) -> Iterator[str]:
    """Best-effort rewrite of raw auditd SYSCALL/CWD/PATH records into the
    normalized format. PARENT path items are dropped; CREATE and DELETE items
    map to create and delete, everything else to use."""
    events: dict[str, dict] = {}
    order: list[str] = []
    for line in lines:
        m = _MSG.search(line)
        if not m:
            continue
        serial = m.group(1)
        ev = events.get(serial)
        if ev is None:
            ev = events[serial] = {"paths": [], "syscall": None, "cwd": "/"}
            order.append(serial)
        kv = _kv(line)
        rtype = kv.get("type")
        if rtype == "SYSCALL":
            ev["syscall"] = kv
        elif rtype == "CWD":
            ev["cwd"] = kv.get("cwd", "/")
        elif rtype == "PATH":
            ev["paths"].append(kv)
    for serial in order:
        ev = events[serial]
        sc = ev["syscall"]
        if sc is None:
            continue
        try:
            name = _SYSCALLS.get(int(sc.get("syscall", "-1")), sc.get("syscall", "?"))
        except ValueError:
            name = sc.get("syscall", "?")
        program = sc.get("comm") or sc.get("exe", "?").rsplit("/", 1)[-1]
        outcome = "success" if sc.get("success") == "yes" else "failure"
        for item in ev["paths"]:
            nametype = item.get("nametype", "NORMAL")
            if nametype == "PARENT" or "inode" not in item:
                continue
            op = {"CREATE": "create", "DELETE": "delete"}.get(nametype, "use")
            if name in _RENAMES and op == "create":
                op = "rename"
            path = item.get("name", "")
            if not path.startswith("/"):
                path = _join(ev["cwd"], path)
            rec = TraceRecord(int(serial), op, str(name), program, int(sc.get("pid", 0)),
                              item.get("dev", "00:00"), int(item["inode"]), path, None, outcome)
            yield rec.to_line()
