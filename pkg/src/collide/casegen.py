"""Collision test-case matrix and fixtures.

Every case is a list of build steps relative to a materialization root. The
tree under ``src/`` is what a utility copies; ``outside/`` holds symlink
referents and hard-link partners that must not be copied. The colliding
member built first gets the lowercase spelling (``foo``, ``dir``) and the one
built second the uppercase spelling (``FOO``, ``DIR``); ``order`` says whether
the target-kind resource or the source-kind resource is built first.
"""

from __future__ import annotations

import json
import os
import posixpath
import shutil
import stat
import tempfile
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

from .errors import DestNotEmpty, HostIsCaseInsensitive
from .vfs import FsImage, Kind, Metadata, join_path, split_path


class ResourceKind(str, Enum):
    FILE = "file"
    DIRECTORY = "directory"
    SYMLINK_TO_FILE = "symlink_to_file"
    SYMLINK_TO_DIR = "symlink_to_dir"
    HARDLINK = "hardlink"
    PIPE = "pipe"
    DEVICE = "device"


class Order(str, Enum):
    TARGET_FIRST = "target-first"
    SOURCE_FIRST = "source-first"


@dataclass(frozen=True)
class BuildStep:
    path: str
    kind: str  # file | dir | symlink | hardlink | pipe | device
    mode: int = 0o644
    content: bytes | str = b""  # file bytes, symlink target, or hard-link source path
    uid: int = 0
    gid: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["content"] = self.content.decode("latin-1") if isinstance(self.content, bytes) else self.content
        d["content_is_bytes"] = isinstance(self.content, bytes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BuildStep":
        d = dict(d)
        if d.pop("content_is_bytes", False):
            d["content"] = d["content"].encode("latin-1")
        return cls(**d)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # keep pytest from collecting this class

    id: str
    target_kind: ResourceKind | None
    source_kind: ResourceKind | None
    order: Order | None
    depth: int
    tree: tuple[BuildStep, ...]
    target_path: str = ""
    source_path: str = ""
    description: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "target_kind": self.target_kind.value if self.target_kind else None,
            "source_kind": self.source_kind.value if self.source_kind else None,
            "order": self.order.value if self.order else None,
            "depth": self.depth,
            "target_path": self.target_path,
            "source_path": self.source_path,
            "description": self.description,
            "tree": [s.to_dict() for s in self.tree],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestCase":
        return cls(
            id=d["id"],
            target_kind=ResourceKind(d["target_kind"]) if d["target_kind"] else None,
            source_kind=ResourceKind(d["source_kind"]) if d["source_kind"] else None,
            order=Order(d["order"]) if d["order"] else None,
            depth=d["depth"],
            tree=tuple(BuildStep.from_dict(s) for s in d["tree"]),
            target_path=d.get("target_path", ""),
            source_path=d.get("source_path", ""),
            description=d.get("description", ""),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True)


@dataclass(frozen=True)
class Row:
    token: str
    target: ResourceKind
    source: ResourceKind


RK = ResourceKind
MATRIX_ROWS = (
    Row("file-file", RK.FILE, RK.FILE),
    Row("symf-file", RK.SYMLINK_TO_FILE, RK.FILE),
    Row("pipe-file", RK.PIPE, RK.FILE),
    Row("hlink-file", RK.HARDLINK, RK.FILE),
    Row("hlink-hlink", RK.HARDLINK, RK.HARDLINK),
    Row("dir-dir", RK.DIRECTORY, RK.DIRECTORY),
    Row("symd-dir", RK.SYMLINK_TO_DIR, RK.DIRECTORY),
)
ROW_BY_TOKEN = {row.token: row for row in MATRIX_ROWS}

DATA = {"target": b"target", "source": b"source"}
FILE_MODE = {"target": 0o600, "source": 0o644}
DIR_MODE = {"target": 0o700, "source": 0o755}
OWNER = {"target": (0, 0), "source": (1000, 1000)}
CHILD = {"target": "tfile", "source": "sfile"}
REF_FILE = "outside/ref_file"
REF_DIR = "outside/ref_dir"
CONTROL_NAMES = {"FOO": "qux", "ZZZ": "yyy", "DIR": "alt"}


def case_id(row: Row, depth: int, order: Order) -> str:
    return f"{row.token}-d{depth}-{'tf' if order is Order.TARGET_FIRST else 'sf'}"


def _rel(target: str, link_path: str) -> str:
    return posixpath.relpath(target, posixpath.dirname(link_path))


def _member(kind: ResourceKind, role: str, path: str, outside: list[BuildStep]) -> list[BuildStep]:
    uid, gid = OWNER[role]
    if kind is RK.FILE:
        return [BuildStep(path, "file", FILE_MODE[role], DATA[role], uid, gid)]
    if kind is RK.DIRECTORY:
        return [
            BuildStep(path, "dir", DIR_MODE[role], b"", uid, gid),
            BuildStep(f"{path}/{CHILD[role]}", "file", FILE_MODE[role], DATA[role], uid, gid),
        ]
    if kind is RK.SYMLINK_TO_FILE:
        outside.append(BuildStep(REF_FILE, "file", 0o644, b"referent"))
        return [BuildStep(path, "symlink", 0o777, _rel(REF_FILE, path), uid, gid)]
    if kind is RK.SYMLINK_TO_DIR:
        outside += [BuildStep(REF_DIR, "dir", 0o755), BuildStep(f"{REF_DIR}/keep", "file", 0o644, b"keep")]
        return [BuildStep(path, "symlink", 0o777, _rel(REF_DIR, path), uid, gid)]
    if kind is RK.PIPE:
        return [BuildStep(path, "pipe", FILE_MODE[role], b"", uid, gid)]
    if kind is RK.DEVICE:
        return [BuildStep(path, "device", 0o600, "1:3", uid, gid)]
    if kind is RK.HARDLINK:
        # The other link lives outside the copied tree, so inside the tree
        # this is a regular file whose inode is shared.
        partner = f"outside/h{posixpath.basename(path).lower()}_{role}"
        outside.append(BuildStep(partner, "file", FILE_MODE[role], DATA[role], uid, gid))
        return [BuildStep(path, "hardlink", FILE_MODE[role], partner, uid, gid)]
    raise ValueError(kind)


def build_case(row: Row, order: Order, depth: int, *, control: bool = False) -> TestCase:
    """Build one matrix case; ``control`` renames the second member so that
    nothing collides."""
    if depth not in (1, 2):
        raise ValueError("depth must be 1 or 2")
    first_role, second_role = ("target", "source") if order is Order.TARGET_FIRST else ("source", "target")
    kinds = {"target": row.target, "source": row.source}
    pair_links = row.target is RK.HARDLINK and row.source is RK.HARDLINK
    low = "zzz" if pair_links else "foo"

    def upper(name: str) -> str:
        return CONTROL_NAMES[name] if control else name

    if depth == 1:
        first, second = f"src/{low}", f"src/{upper(low.upper())}"
        parents = []
    else:
        first, second = f"src/dir/{low}", f"src/{upper('DIR')}/{low}"
        parents = [BuildStep("src/dir", "dir", 0o755), BuildStep(posixpath.dirname(second), "dir", 0o755)]

    outside: list[BuildStep] = []
    if pair_links:
        data = {"target": b"foo", "source": b"bar"}
        d1, d2 = posixpath.dirname(first), posixpath.dirname(second)
        p1, p2 = f"{d1}/hfoo", f"{d2}/hbar"
        r1, r2 = first_role, second_role
        body = [
            BuildStep(p2, "file", FILE_MODE[r2], data[r2], *OWNER[r2]),
            BuildStep(first, "file", FILE_MODE[r1], data[r1], *OWNER[r1]),
            BuildStep(second, "hardlink", FILE_MODE[r2], p2, *OWNER[r2]),
            BuildStep(p1, "hardlink", FILE_MODE[r1], first, *OWNER[r1]),
        ]
    else:
        body = _member(kinds[first_role], first_role, first, outside)
        body += _member(kinds[second_role], second_role, second, outside)

    tree = [BuildStep("src", "dir", 0o755)]
    if outside:
        tree.append(BuildStep("outside", "dir", 0o755))
        seen = set()
        for step in outside:
            if step.path not in seen:
                seen.add(step.path)
                tree.append(step)
    tree += parents + body
    target_path, source_path = (first, second) if first_role == "target" else (second, first)
    cid = case_id(row, depth, order) + ("-ctl" if control else "")
    desc = f"{row.target.value} <- {row.source.value}, {order.value}, depth {depth}"
    return TestCase(cid, row.target, row.source, order, depth, tuple(tree), target_path, source_path,
                    desc + (" (control)" if control else ""))


def generate_matrix(*, control: bool = False) -> list[TestCase]:
    """All matrix rows x both orders x depths 1 and 2 (28 cases)."""
    return [
        build_case(row, order, depth, control=control)
        for row in MATRIX_ROWS
        for depth in (1, 2)
        for order in Order
    ]


def get_case(case: str) -> TestCase:
    for tc in generate_matrix() + generate_matrix(control=True):
        if tc.id == case:
            return tc
    if case in FIXTURES:
        return FIXTURES[case]()
    raise KeyError(f"unknown case {case!r}")


def control_for(tc: TestCase) -> TestCase:
    row = next(r for r in MATRIX_ROWS if r.target is tc.target_kind and r.source is tc.source_kind)
    return build_case(row, tc.order, tc.depth, control=True)


# --- scenario fixtures -------------------------------------------------------------

POST_CHECKOUT = b"#!/bin/sh\necho 'adversary code runs here'\n"


def fixture_git() -> TestCase:
    """Repository whose checkout plants a hook on a case-insensitive clone."""
    tree = (
        BuildStep("repo", "dir", 0o755),
        BuildStep("repo/.git", "dir", 0o755),
        BuildStep("repo/.git/hooks", "dir", 0o755),
        BuildStep("repo/A", "dir", 0o755),
        BuildStep("repo/A/file1", "file", 0o644, b"file1\n"),
        BuildStep("repo/A/file2", "file", 0o644, b"file2\n"),
        BuildStep("repo/A/post-checkout", "file", 0o755, POST_CHECKOUT),
        BuildStep("repo/a", "symlink", 0o777, ".git/hooks"),
    )
    return TestCase("git-hook", RK.SYMLINK_TO_DIR, RK.DIRECTORY, None, 1, tree,
                    "repo/a", "repo/A", "git repository with A/post-checkout and a -> .git/hooks")


def fixture_rsync() -> TestCase:
    tree = (
        BuildStep("tmp", "dir", 0o777),
        BuildStep("src", "dir", 0o755),
        BuildStep("src/topdir", "dir", 0o755),
        BuildStep("src/topdir/secret", "symlink", 0o777, "/tmp"),
        BuildStep("src/TOPDIR", "dir", 0o755),
        BuildStep("src/TOPDIR/secret", "dir", 0o755),
        BuildStep("src/TOPDIR/secret/confidential", "file", 0o600, b"confidential\n"),
    )
    return TestCase("rsync-escape", RK.SYMLINK_TO_DIR, RK.DIRECTORY, None, 2, tree,
                    "src/topdir/secret", "src/TOPDIR/secret", "rsync link-traversal source tree")


WWW_DATA = 33
MALLORY = 1001
HTACCESS = b'AuthType Basic\nAuthName "members"\nAuthUserFile /etc/apache2/.htpasswd\nRequire valid-user\n'


def fixture_httpd(adversary: bool = True) -> TestCase:
    steps = [
        BuildStep("www", "dir", 0o755),
        BuildStep("www/hidden", "dir", 0o700),
        BuildStep("www/hidden/secret.txt", "file", 0o600, b"top secret\n"),
    ]
    if adversary:
        steps.append(BuildStep("www/HIDDEN", "dir", 0o755, b"", MALLORY, MALLORY))
    steps += [
        BuildStep("www/protected", "dir", 0o750, b"", 0, WWW_DATA),
        BuildStep("www/protected/.htaccess", "file", 0o640, HTACCESS, 0, WWW_DATA),
        BuildStep("www/protected/user-file1.txt", "file", 0o640, b"members only\n", 0, WWW_DATA),
    ]
    if adversary:
        steps += [
            BuildStep("www/PROTECTED", "dir", 0o755, b"", MALLORY, MALLORY),
            BuildStep("www/PROTECTED/.htaccess", "file", 0o644, b"", MALLORY, MALLORY),
        ]
    steps.append(BuildStep("www/index.html", "file", 0o644, b"<html>hello</html>\n"))
    cid = "httpd-adversary" if adversary else "httpd-plain"
    return TestCase(cid, RK.DIRECTORY if adversary else None, RK.DIRECTORY if adversary else None,
                    None, 1, tuple(steps), "www/hidden" if adversary else "",
                    "www/HIDDEN" if adversary else "", "httpd document root")


FIXTURES = {
    "git-hook": fixture_git,
    "hardlink-pair": lambda: build_case(ROW_BY_TOKEN["hlink-hlink"], Order.TARGET_FIRST, 1),
    "rsync-escape": fixture_rsync,
    "httpd-plain": lambda: fixture_httpd(False),
    "httpd-adversary": fixture_httpd,
}


# --- materialization -----------------------------------------------------------------


@dataclass
class BuildReport:
    created: list[tuple[str, int | None]] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)

    @property
    def paths(self) -> list[str]:
        return [p for p, _ in self.created]


def _parse_rdev(content) -> tuple[int, int]:
    text = content.decode() if isinstance(content, bytes) else str(content or "1:3")
    major, _, minor = text.partition(":")
    return int(major or 1), int(minor or 3)


def _apply_vfs(image: FsImage, base: str, steps, report: BuildReport) -> None:
    for step in steps:
        full = join_path(base, step.path)
        parent = join_path(*split_path(full)[:-1]) if len(split_path(full)) > 1 else "/"
        name = split_path(full)[-1]
        meta = Metadata(mode=step.mode, uid=step.uid, gid=step.gid)
        if step.kind == "file":
            ino = image.create(parent, name, Kind.FILE, meta, exclusive=True, content=step.content)
        elif step.kind == "dir":
            ino = image.mkdir(parent, name, meta)
        elif step.kind == "symlink":
            target = step.content
            if target.startswith("/") and base != "/":
                target = join_path(base, target)
            ino = image.symlink(parent, name, target, meta)
        elif step.kind == "hardlink":
            ino = image.link(join_path(base, step.content), parent, name, replace=False)
        elif step.kind == "pipe":
            ino = image.mknod(parent, name, Kind.PIPE, meta)
        elif step.kind == "device":
            ino = image.mknod(parent, name, Kind.DEVICE, meta, rdev=_parse_rdev(step.content))
        else:
            raise ValueError(f"unknown step kind {step.kind!r}")
        report.created.append((step.path, ino))


def probe_case_insensitive(directory: "str | os.PathLike") -> bool:
    """Create ``cOLLIDE.probe`` and check whether ``Collide.probe`` resolves."""
    probe = Path(directory) / "cOLLIDE.probe"
    probe.write_bytes(b"")
    try:
        return (Path(directory) / "Collide.probe").exists()
    finally:
        probe.unlink()


def _apply_host(tmp: Path, dest: Path, steps, report: BuildReport) -> list[tuple[Path, int]]:
    dir_modes: list[tuple[Path, int]] = []
    am_root = hasattr(os, "geteuid") and os.geteuid() == 0
    for step in steps:
        path = tmp / step.path
        if step.kind == "file":
            path.write_bytes(step.content if isinstance(step.content, bytes) else step.content.encode())
            os.chmod(path, step.mode)
        elif step.kind == "dir":
            path.mkdir()
            dir_modes.append((path, step.mode))
        elif step.kind == "symlink":
            target = step.content
            if target.startswith("/"):
                # Re-root absolute targets under dest so a fixture never points at the host.
                target = os.path.relpath(dest / target.lstrip("/"), (dest / step.path).parent)
            os.symlink(target, path)
        elif step.kind == "hardlink":
            os.link(tmp / step.content, path)
        elif step.kind == "pipe":
            os.mkfifo(path, step.mode)
        elif step.kind == "device":
            try:
                os.mknod(path, stat.S_IFCHR | step.mode, os.makedev(*_parse_rdev(step.content)))
            except PermissionError:
                report.skipped.append((step.path, "device nodes need privilege; skipped"))
                continue
        if am_root and step.kind != "hardlink":
            os.lchown(path, step.uid, step.gid)
        report.created.append((step.path, None))
    return dir_modes


def materialize(tc: TestCase, dest, *, root: str = "/") -> BuildReport:
    """Apply the case's build steps to an FsImage (under ``root``) or to an
    empty, case-sensitive host directory."""
    report = BuildReport()
    if isinstance(dest, FsImage):
        node = dest.stat(root)
        if node.entries:
            raise DestNotEmpty(root)
        scratch = dest.copy()
        _apply_vfs(scratch, root, tc.tree, report)
        sink = dest.trace
        dest.__dict__.update(scratch.__dict__)
        dest.trace = sink
        return report
    dest = Path(dest)
    if not dest.is_dir():
        raise FileNotFoundError(dest)
    if any(dest.iterdir()):
        raise DestNotEmpty(str(dest))
    if probe_case_insensitive(dest):
        raise HostIsCaseInsensitive(str(dest))
    tmp = Path(tempfile.mkdtemp(prefix=".collide-build-", dir=dest))
    try:
        dir_modes = _apply_host(tmp, dest, tc.tree, report)
        for path, mode in reversed(dir_modes):
            os.chmod(path, mode)
        for child in list(tmp.iterdir()):
            os.rename(child, dest / child.name)
        tmp.rmdir()
    except BaseException:
        for path, _ in dir_modes if "dir_modes" in locals() else []:
            if path.exists():
                os.chmod(path, 0o755)
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return report
