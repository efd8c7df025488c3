"""Run collision cases through utility models (or real binaries) and classify
the effects into the response codes used by the results table.

Codes:
    ×  the entry at the colliding name is spelled like the source and holds its data
    +  the entry keeps the target's spelling but holds source data
    ≠  name or metadata of the result mixes target and source
    T  something outside the target directory changed
    C  a non-colliding entry was corrupted (content or hard-link set)
    R  source data shows up under a new, non-colliding name
    E  the utility reported an error
    A  the utility asked the user what to do
    −  the utility skipped or degraded a colliding resource
    ∞  the utility did not terminate
"""

from __future__ import annotations

import fcntl
import glob
import json
import os
import shutil
import subprocess
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import foldcore
from .casegen import (
    ROW_BY_TOKEN,
    MATRIX_ROWS,
    Order,
    TestCase,
    build_case,
    materialize,
    probe_case_insensitive,
)
from .errors import AmbiguousEvidence, MountNotCaseInsensitive, UtilityMissing
from .refutils import (
    DEGRADE,
    ERROR,
    LABELS,
    OK,
    PROMPT,
    SKIP,
    STEP_LIMIT_HIT,
    UTILITIES,
    CopyOutcome,
    Event,
    run_model,
)
from .scanner import leaf_groups, scan_paths, walk_entries
from .vfs import FsImage, Kind, Metadata, join_path, snapshot_diff

CROSS, PLUS, NEQ, LOOP, MINUS = "×", "+", "≠", "∞", "−"
CODE_ORDER = ("C", CROSS, PLUS, "E", "A", MINUS, LOOP, "R", NEQ, "T")
CREATE_OPS = ("create", "mkdir", "link", "write")
DEFAULT_DST_PROFILE = "ascii"
DEFAULT_PROMPT_SCRIPT = "overwrite"  # a single string answers every prompt
NO_COLLISION = "no collision exercised"

GOLDEN = {
    "file-file": {"tar": CROSS, "zip": "A", "cp": "E", "cp_star": PLUS + NEQ, "rsync": PLUS + NEQ, "dropbox": "R"},
    "symf-file": {"tar": CROSS, "zip": "A", "cp": "E", "cp_star": PLUS + "T", "rsync": PLUS + NEQ, "dropbox": "R"},
    "pipe-file": {"tar": CROSS, "zip": MINUS, "cp": "E", "cp_star": PLUS, "rsync": PLUS, "dropbox": MINUS},
    "hlink-file": {"tar": CROSS, "zip": MINUS, "cp": "E", "cp_star": PLUS + NEQ, "rsync": PLUS + NEQ, "dropbox": MINUS},
    "hlink-hlink": {"tar": "C" + CROSS, "zip": MINUS, "cp": "E", "cp_star": "C" + CROSS, "rsync": "C" + PLUS + NEQ,
                    "dropbox": MINUS},
    "dir-dir": {"tar": PLUS + NEQ, "zip": PLUS + NEQ, "cp": "E", "cp_star": PLUS + NEQ, "rsync": PLUS + NEQ,
                "dropbox": "R"},
    "symd-dir": {"tar": PLUS, "zip": LOOP, "cp": "E", "cp_star": "E", "rsync": PLUS + "T", "dropbox": "R"},
}


def render_codes(codes) -> str:
    return "".join(c for c in CODE_ORDER if c in codes)


def parse_cell(cell: str) -> frozenset[str]:
    out = set(cell)
    unknown = out - set(CODE_ORDER)
    if unknown:
        raise ValueError(f"unknown code(s) {''.join(sorted(unknown))!r} in {cell!r}")
    return frozenset(out)


@dataclass
class GroupVerdict:
    paths: list[str]
    target: str
    codes: list[str]
    evidence: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class Classification:
    """Effect codes plus at least one (code, text) evidence item per code."""

    codes: frozenset[str]
    groups: list[GroupVerdict] = field(default_factory=list)
    evidence: list[tuple[str, str]] = field(default_factory=list)
    note: str = ""

    @property
    def cell(self) -> str:
        return render_codes(self.codes)

    def evidence_for(self, code: str) -> list[str]:
        return [text for c, text in self.evidence if c == code]

    def to_dict(self) -> dict:
        return {"cell": self.cell, "codes": sorted(self.codes, key=CODE_ORDER.index),
                "groups": [asdict(g) for g in self.groups],
                "evidence": [{"code": c, "text": t} for c, t in self.evidence], "note": self.note}


# --- classification ------------------------------------------------------------------


def _stored(image: FsImage, root: str, rel: str) -> tuple[str | None, int | None]:
    """Stored spelling of ``rel`` below ``root`` and its inode (final symlink
    not followed). Intermediate symlinks are followed but keep their own name."""
    res = image.resolve(root, follow=True)
    if res is None or res.inode is None:
        return None, None
    cur = res.inode
    names: list[str] = []
    comps = rel.split("/")
    for i, comp in enumerate(comps):
        node = image.nodes[cur]
        if node.kind is Kind.SYMLINK:
            via = image.resolve(join_path(root, *names), follow=True)
            if via is None or via.inode is None:
                return None, None
            node = image.nodes[via.inode]
        if not node.is_dir:
            return None, None
        found = image._find(node, comp)
        if found is None:
            return None, None
        raw, cur = found
        names.append(raw)
    return "/".join(names), cur


def _followed(image: FsImage, path: str):
    try:
        res = image.resolve(path, follow=True)
    except OSError:
        return None
    if res is None or res.inode is None:
        return None
    return image.nodes[res.inode]


def _fold_rel(rel: str, prof) -> tuple[str, ...]:
    return foldcore.fold_components(rel.split("/"), prof)


def _touches(event: Event, paths) -> bool:
    if not event.source:
        return True
    return any(event.source == p or event.source.startswith(p + "/") for p in paths)


def _meta(node, strict_times: bool) -> tuple:
    m = node.meta
    return (m.mode, m.uid, m.gid, m.mtime) if strict_times else (m.mode, m.uid, m.gid)


def _children(image: FsImage, node, prof) -> set[str]:
    return {foldcore.fold_text(n, prof) for n in (node.entries or {})} if node is not None and node.is_dir else set()


def _carries(before: FsImage, after: FsImage, src_node, entry_path: str, entry, prof) -> bool:
    """Does the destination entry hold this source member's data?"""
    if src_node.kind is Kind.SYMLINK:
        return entry.kind is Kind.SYMLINK and entry.target == src_node.target
    if src_node.kind in (Kind.PIPE, Kind.DEVICE):
        return entry.kind is src_node.kind and entry.rdev == src_node.rdev
    if entry.kind in (Kind.PIPE, Kind.DEVICE):
        return src_node.kind is Kind.FILE and bool(src_node.data) and src_node.data in entry.data
    real = _followed(after, entry_path) if entry.kind is Kind.SYMLINK else entry
    if real is None:
        return False
    if src_node.is_dir:
        return bool(_children(before, src_node, prof) & _children(after, real, prof))
    return real.kind is Kind.FILE and real.data == src_node.data


def _first_created(events: list[Event], members: list[str]) -> str | None:
    for e in events:
        if e.op in CREATE_OPS and e.result == "ok" and e.source in members:
            return e.source
    return None


def classify(before: FsImage, after: FsImage, source: str = "/src", outcome: CopyOutcome | None = None, *,
             target: str = "/dst", profile=DEFAULT_DST_PROFILE, strict_times: bool = False) -> Classification:
    """Classify what a copy from ``source`` into ``target`` did to each
    collision group. ``before`` is the image handed to the utility and
    ``after`` the image it left behind."""
    prof = foldcore.get_profile(profile)
    events = outcome.events if outcome is not None else []
    groups = leaf_groups(scan_paths(walk_entries(before, source), prof).groups)
    if not groups:
        return Classification(frozenset(), note=NO_COLLISION)
    if not snapshot_diff(before, after, "/").lines() and all(e.result == OK for e in events):
        return Classification(frozenset(), note=NO_COLLISION)
    members = [m.path for g in groups for m in g.members]

    # Termination-level outcomes override anything seen in the tree.
    for result, code in ((SKIP, MINUS), (DEGRADE, MINUS), (STEP_LIMIT_HIT, LOOP), (PROMPT, "A")):
        hits = [e for e in events if e.result == result and (code != MINUS or _touches(e, members))]
        if hits:
            return Classification(frozenset({code}), evidence=[(code, f"{e.op} {e.path}: {e.result}" + (f" ({e.detail})" if e.detail else ""))
                                            for e in hits])

    codes: set[str] = set()
    evidence: list[tuple[str, str]] = []
    verdicts: list[GroupVerdict] = []
    errors = [e for e in events if e.result == ERROR]
    if errors:
        codes.add("E")
        evidence += [("E", e.detail or f"{e.op} {e.path}") for e in errors]

    for g in groups:
        paths = g.paths
        tgt = _first_created(events, paths) or paths[0]
        others = [p for p in paths if p != tgt]
        gcodes: set[str] = set()
        gev: list[tuple[str, str]] = []
        spelled, _ = _stored(after, target, tgt)
        entry_path = join_path(target, spelled) if spelled else None
        entry = after.lstat(entry_path) if entry_path else None
        tnode = before.lstat(join_path(source, tgt))
        if entry is not None:
            for sp in others:
                snode = before.lstat(join_path(source, sp))
                if not _carries(before, after, snode, entry_path, entry, prof):
                    continue
                if spelled == sp:
                    code = CROSS
                elif spelled == tgt:
                    code = PLUS
                else:
                    code = CROSS if spelled.rsplit("/", 1)[-1] == sp.rsplit("/", 1)[-1] else PLUS
                gcodes.add(code)
                gev.append((code, f"{entry_path} ({entry.kind}) holds data of {sp}, spelled {spelled!r}"))
            if entry.kind in (Kind.FILE, Kind.DIRECTORY):
                for sp in others:
                    snode = before.lstat(join_path(source, sp))
                    if _mixed(before, after, tnode, snode, entry, spelled, tgt, sp, prof, strict_times):
                        gcodes.add(NEQ)
                        gev.append((NEQ, f"{entry_path} mixes name or metadata of {tgt} and {sp}"))
        verdicts.append(GroupVerdict(paths, tgt, [c for c in CODE_ORDER if c in gcodes], gev))
        codes |= gcodes
        evidence += gev

    # T: any change outside the destination tree.
    delta = snapshot_diff(before, after, "/", strict_times=strict_times)
    outside = [line for line in delta.lines() if not _under(line.split(" ", 2)[1], target)]
    if outside:
        codes.add("T")
        evidence += [("T", f"outside {target}: {line}") for line in outside]

    corrupted = _corrupted(before, after, source, target, members, errors, prof)
    if corrupted:
        codes.add("C")
        evidence += [("C", text) for text in corrupted]

    renamed = _renamed(before, after, source, target, prof)
    if renamed:
        codes.add("R")
        evidence += [("R", text) for text in renamed]

    if not codes:
        raise AmbiguousEvidence(f"collision groups {[g.paths for g in groups]} left no classifiable effect")
    return Classification(frozenset(codes), verdicts, evidence)


def _under(path: str, root: str) -> bool:
    return path == root or path.startswith(root.rstrip("/") + "/")


def _mixed(before, after, tnode, snode, entry, spelled, tgt, sp, prof, strict_times) -> bool:
    if tnode is None or snode is None:
        return False
    tmeta, smeta, emeta = _meta(tnode, strict_times), _meta(snode, strict_times), _meta(entry, strict_times)
    if entry.kind is Kind.DIRECTORY:
        kids = _children(after, entry, prof)
        merged = bool(_children(before, tnode, prof) & kids) and bool(_children(before, snode, prof) & kids)
        return merged and tmeta != smeta
    has_source = snode.kind is Kind.FILE and entry.data == snode.data
    has_target = tnode.kind is Kind.FILE and entry.data == tnode.data
    if has_source:
        if spelled != sp:
            return True
        return any(e == t != s for e, t, s in zip(emeta, tmeta, smeta))
    if has_target:
        return any(e == s != t for e, t, s in zip(emeta, tmeta, smeta))
    return False


def _link_sets(image: FsImage, root: str, keep, prof) -> dict[tuple[str, ...], frozenset]:
    prefix = root.rstrip("/")
    out: dict[tuple[str, ...], frozenset] = {}
    for ino, paths in image.paths_by_inode(root).items():
        node = image.nodes[ino]
        if node.is_dir:
            continue
        rels = [p[len(prefix) + 1:] for p in paths]
        keys = frozenset(_fold_rel(r, prof) for r in rels if keep(r))
        for r in rels:
            out[_fold_rel(r, prof)] = keys
    return out


def _corrupted(before, after, source, target, members, errors, prof) -> list[str]:
    """Non-colliding source paths whose destination copy has other content or
    another set of hard-link partners. Partners whose copy failed with an
    error are not counted; their loss is reported as E."""
    member_keys = {_fold_rel(m, prof) for m in members}
    failed = {e.source for e in errors if e.source}
    prefix = source.rstrip("/")
    src_sets = _link_sets(before, source, lambda r: not any(r == f or r.startswith(f + "/") for f in failed), prof)
    dst_sets = _link_sets(after, target, lambda r: True, prof)
    out = []
    for path, node in before.walk(source):
        rel = path[len(prefix) + 1:]
        key = _fold_rel(rel, prof)
        if key in member_keys or node.is_dir:
            continue
        spelled, ino = _stored(after, target, rel)
        if ino is None:
            continue
        dnode = after.nodes[ino]
        if dnode.kind is not node.kind:
            out.append(f"{rel}: kind {node.kind} became {dnode.kind}")
        elif node.kind is Kind.SYMLINK and dnode.target != node.target:
            out.append(f"{rel}: symlink target changed")
        elif node.kind is Kind.FILE and dnode.data != node.data:
            out.append(f"{rel}: content differs from the source")
        elif node.kind is Kind.FILE and src_sets.get(key, frozenset({key})) != dst_sets.get(key, frozenset({key})):
            out.append(f"{rel}: hard-link partners changed")
    return out


def _renamed(before, after, source, target, prof) -> list[str]:
    src_keys = {}
    src_contents = set()
    prefix = source.rstrip("/")
    for path, node in before.walk(source):
        src_keys[_fold_rel(path[len(prefix) + 1:], prof)] = node
        if not node.is_dir:
            src_contents.add((node.kind, node.data if node.kind is not Kind.SYMLINK else node.target.encode()))
    out = []
    tprefix = target.rstrip("/")
    for path, node in after.walk(target):
        rel = path[len(tprefix) + 1:]
        if _fold_rel(rel, prof) in src_keys:
            continue
        if node.is_dir:
            out.append(f"{rel}: new directory name not present in the source")
            continue
        data = node.data if node.kind is not Kind.SYMLINK else node.target.encode()
        if (node.kind, data) in src_contents:
            out.append(f"{rel}: source data under a new name")
    return out


# --- running cases against the models -----------------------------------------------------


@dataclass
class CaseResult:
    case_id: str
    utility: str
    cell: str
    classification: Classification
    outcome: CopyOutcome

    def to_dict(self) -> dict:
        return {"case": self.case_id, "utility": self.utility, "cell": self.cell,
                "classification": self.classification.to_dict(), "terminated": self.outcome.terminated,
                "events": [asdict(e) for e in self.outcome.events], "warnings": list(self.outcome.warnings)}


def prepare_image(tc: TestCase, profile=DEFAULT_DST_PROFILE) -> FsImage:
    """Materialize ``tc`` at / and add an empty case-insensitive /dst."""
    image = FsImage()
    materialize(tc, image)
    image.mkdir("/", "dst", Metadata(mode=0o755), fold_flag=True, profile_id=foldcore.get_profile(profile).id)
    return image


def run_case(tc: TestCase, utility: str, *, profile=DEFAULT_DST_PROFILE, prompt_script=DEFAULT_PROMPT_SCRIPT,
             trace: bool = False) -> CaseResult:
    image = prepare_image(tc, profile)
    outcome = run_model(utility, image, "/src", "/dst", prompt_script=prompt_script, trace=trace)
    cls = classify(image, outcome.final_image, "/src", outcome, target="/dst", profile=profile)
    return CaseResult(tc.id, utility, cls.cell, cls, outcome)


def _first_occupant_is_target(tc: TestCase, result: CaseResult) -> bool:
    rel_t = tc.target_path.partition("/")[2]
    rel_s = tc.source_path.partition("/")[2]
    first = _first_created(result.outcome.events, [rel_t, rel_s])
    if first is None:
        return True
    return (tc.target_kind if first == rel_t else tc.source_kind) is tc.target_kind


def table_cell(row_token: str, utility: str, *, depth: int = 1, profile=DEFAULT_DST_PROFILE) -> CaseResult:
    """Run both build orders and keep the one where the target-kind resource
    is the first to occupy the colliding name in the destination."""
    row = ROW_BY_TOKEN[row_token]
    results = []
    for order in (Order.TARGET_FIRST, Order.SOURCE_FIRST):
        tc = build_case(row, order, depth)
        res = run_case(tc, utility, profile=profile)
        if _first_occupant_is_target(tc, res):
            return res
        results.append(res)
    return results[0]


def reproduce_table(*, depth: int = 1, utilities=UTILITIES) -> dict[str, dict[str, CaseResult]]:
    return {row.token: {u: table_cell(row.token, u, depth=depth) for u in utilities} for row in MATRIX_ROWS}


def render_table(table: dict[str, dict[str, CaseResult | str]], utilities=UTILITIES) -> str:
    header = ["row".ljust(12)] + [LABELS[u].ljust(8) for u in utilities]
    lines = [" ".join(header).rstrip()]
    for token, cells in table.items():
        vals = [(c.cell if isinstance(c, CaseResult) else c) or "." for c in (cells[u] for u in utilities)]
        lines.append(" ".join([token.ljust(12)] + [v.ljust(8) for v in vals]).rstrip())
    return "\n".join(lines) + "\n"


def compare_golden(table: dict[str, dict[str, CaseResult]]) -> list[tuple[str, str, str, str]]:
    """(row, utility, expected, got) for every cell that differs."""
    out = []
    for token, cells in GOLDEN.items():
        for utility, expected in cells.items():
            got = table[token][utility].cell if utility in table.get(token, {}) else None
            if got is None:
                continue
            if parse_cell(got) != parse_cell(expected):
                out.append((token, utility, expected, got))
    return out


# --- live runs on a real case-insensitive mount ----------------------------------------------


LIVE_TIMEOUT = 30.0


@dataclass
class Discrepancy:
    case_id: str
    utility: str
    model_cell: str
    live_cell: str
    note: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


def mount_from_env() -> str | None:
    return os.environ.get("COLLIDE_MOUNT") or None


def check_mount(mount) -> Path:
    mount = Path(mount)
    if not mount.is_dir() or not probe_case_insensitive(mount):
        raise MountNotCaseInsensitive(f"{mount} does not fold case; set COLLIDE_MOUNT to a casefold directory")
    return mount


def live_commands(utility: str, work: Path, dst: Path) -> list[list[str]]:
    src = work / "src"
    if utility == "cp":
        return [["cp", "-a", f"{src}/.", f"{dst}/"]]
    if utility == "cp_star":
        return [["cp", "-a", *sorted(glob.glob(f"{src}/*")), f"{dst}/"]]
    if utility == "rsync":
        return [["rsync", "-aH", f"{src}/", f"{dst}/"]]
    if utility == "tar":
        return [["tar", "-cf", str(work / "a.tar"), "-C", str(src), "."],
                ["tar", "-xf", str(work / "a.tar"), "-C", str(dst)]]
    if utility == "zip":
        return [["zip", "-q", "-r", "--symlinks", str(work / "a.zip"), "."],
                ["unzip", "-q", str(work / "a.zip"), "-d", str(dst)]]
    raise UtilityMissing(f"{utility} has no local command-line client to drive")


def _host_snapshot(parts: dict[str, tuple[Path, bool]], ident: dict[tuple[int, int], int],
                   profile, warnings: list[str] | None = None) -> FsImage:
    """Copy host trees into one image; ``parts`` maps an image directory to
    (host path, casefold). Host (dev, ino) pairs map to stable inode numbers
    through ``ident`` so two snapshots can be diffed by identity. Host names
    that the profile folds together but the mount kept apart are left out and
    noted in ``warnings``: the mount does not fold like the profile."""
    warnings = [] if warnings is None else warnings
    image = FsImage()
    owner: dict[int, tuple[int, int]] = {}
    seen: dict[tuple[int, int], str] = {}
    for name, (host, fold) in parts.items():
        image.mkdir("/", name, Metadata(mode=0o755), fold_flag=fold or None,
                    profile_id=foldcore.get_profile(profile).id if fold else None)
        stack = [(host, f"/{name}")]
        while stack:
            hdir, vdir = stack.pop()
            for entry in sorted(os.scandir(hdir), key=lambda e: e.name):
                st = entry.stat(follow_symlinks=False)
                meta = Metadata(mode=st.st_mode & 0o777, uid=st.st_uid, gid=st.st_gid)
                key = (st.st_dev, st.st_ino)
                vpath = join_path(vdir, entry.name)
                clash = image.entry_name(vpath)
                if clash is not None:
                    warnings.append(f"{vpath}: host keeps {clash!r} and {entry.name!r} apart, "
                                    f"but profile {foldcore.get_profile(profile).id} folds them together")
                    continue
                if key in seen and not entry.is_dir(follow_symlinks=False):
                    image.link(seen[key], vdir, entry.name, replace=False)
                    continue
                if entry.is_symlink():
                    ino = image.symlink(vdir, entry.name, os.readlink(entry.path), meta)
                elif entry.is_dir(follow_symlinks=False):
                    ino = image.mkdir(vdir, entry.name, meta)
                    stack.append((Path(entry.path), vpath))
                elif entry.is_file(follow_symlinks=False):
                    ino = image.create(vdir, entry.name, Kind.FILE, meta, exclusive=True,
                                       content=Path(entry.path).read_bytes())
                else:
                    kind = Kind.PIPE if (st.st_mode & 0o170000) == 0o010000 else Kind.DEVICE
                    ino = image.mknod(vdir, entry.name, kind, meta)
                seen[key] = vpath
                owner[ino] = key
    # Renumber so the same host inode gets the same image inode in every snapshot.
    base = max(ident.values(), default=1000) + 1
    remap = {}
    for ino in list(image.nodes):
        if ino in owner:
            remap[ino] = ident.setdefault(owner[ino], base + len(ident))
        else:
            remap[ino] = ino
    image.nodes = {remap[i]: n for i, n in image.nodes.items()}
    for node in image.nodes.values():
        node.inode = remap.get(node.inode, node.inode)
        if node.entries is not None:
            node.entries = {k: remap.get(v, v) for k, v in node.entries.items()}
    image.next_inode = max(image.nodes) + 1
    return image


def run_live(tc: TestCase, utility: str, *, mount=None, prompt_script=DEFAULT_PROMPT_SCRIPT,
             timeout: float = LIVE_TIMEOUT, profile="full-fold") -> CaseResult:
    """Run the real utility with the case's source on a case-sensitive temp
    directory and the destination on a case-insensitive mount."""
    mount = check_mount(mount or mount_from_env() or "")
    cmds = live_commands(utility, Path("/nonexistent"), Path("/nonexistent"))
    for cmd in cmds:
        if shutil.which(cmd[0]) is None:
            raise UtilityMissing(f"{cmd[0]} is not installed")
    lock = open(mount / ".collide.lock", "w")
    fcntl.flock(lock, fcntl.LOCK_EX)
    try:
        with tempfile.TemporaryDirectory(prefix="collide-src-") as wdir, \
                tempfile.TemporaryDirectory(prefix="run-", dir=mount) as rdir:
            work, run_root = Path(wdir), Path(rdir)
            materialize(tc, work)
            dst = run_root / "dst"
            dst.mkdir()
            os.symlink(work / "outside", run_root / "outside")
            parts = {"src": (work / "src", False), "outside": (work / "outside", False), "dst": (dst, True)}
            if not (work / "outside").exists():
                del parts["outside"]
            ident: dict[tuple[int, int], int] = {}
            notes: list[str] = []
            before = _host_snapshot(parts, ident, profile, notes)
            events: list[Event] = []
            terminated = OK
            if isinstance(prompt_script, str):
                prompt_script = [prompt_script] * 64
            stdin = ("\n".join(prompt_script) + "\n") if prompt_script else ""
            for cmd in live_commands(utility, work, dst):
                cwd = work / "src" if cmd[0] == "zip" else None
                try:
                    proc = subprocess.run(cmd, cwd=cwd, input=stdin.encode(), capture_output=True, timeout=timeout)
                except subprocess.TimeoutExpired:
                    events.append(Event("exec", str(dst), STEP_LIMIT_HIT, "", f"{cmd[0]} timed out"))
                    terminated = STEP_LIMIT_HIT
                    break
                text = (proc.stdout + proc.stderr).decode(errors="replace")
                if "[y]es" in text and "replace" in text:
                    events.append(Event("exec", str(dst), PROMPT, "", text.strip()))
                    terminated = PROMPT
                if cmd[0] == "zip" and "ignoring" in text:
                    events.append(Event("exec", str(dst), SKIP, "", text.strip()))
                if proc.returncode != 0 and not any(e.result == PROMPT for e in events):
                    events.append(Event("exec", str(dst), ERROR, "", text.strip()))
            if utility == "zip":
                for path, node in before.walk("/src"):
                    if node.kind is Kind.FILE and node.nlink > 1:
                        events.append(Event("archive", path[5:], DEGRADE, path[5:], "hard link stored as a copy"))
            after = _host_snapshot(parts, ident, profile, notes)
            if terminated == OK and any(e.result == ERROR for e in events):
                terminated = ERROR
            outcome = CopyOutcome(utility, after, events, terminated, warnings=notes)
            try:
                cls = classify(before, after, "/src", outcome, target="/dst", profile=profile)
            except AmbiguousEvidence as exc:
                if not notes:
                    raise
                raise AmbiguousEvidence(f"{exc}; {notes[0]}") from exc
            return CaseResult(tc.id, utility, cls.cell, cls, outcome)
    finally:
        fcntl.flock(lock, fcntl.LOCK_UN)
        lock.close()


def compare_live(tc: TestCase, utility: str, **kwargs) -> Discrepancy | None:
    model = run_case(tc, utility)
    try:
        live = run_live(tc, utility, **kwargs)
    except AmbiguousEvidence as exc:
        return Discrepancy(tc.id, utility, model.cell, "?", str(exc))
    if parse_cell(model.cell or "") != parse_cell(live.cell or ""):
        return Discrepancy(tc.id, utility, model.cell, live.cell)
    return None
