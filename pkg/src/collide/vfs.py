"""In-memory file-system image with per-directory case-insensitivity.

The image is a plain inode table. Directories hold an insertion-ordered map
from raw (case-preserved) names to inode numbers; a directory with its fold
flag set resolves children by canonical key under its profile, the way an
ext4 directory with ``chattr +F`` does. Paths are absolute strings.

Operations can emit normalized trace records (see :mod:`collide.tracer`) so
that behavior models double as trace generators.
"""

from __future__ import annotations

import copy
import hashlib
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator

from . import foldcore
from .errors import (
    CollidesDifferingName,
    Exists,
    InvalidName,
    IsADirectory,
    LoopLimitExceeded,
    NotADirectory,
    NotEmpty,
    NotFound,
    ParentMissing,
)
from .tracer import TraceRecord

SYMLINK_LIMIT = 40
ROOT_INODE = 1
DEFAULT_FOLD_PROFILE = "full-fold"


class Kind(str, Enum):
    FILE = "file"
    DIRECTORY = "directory"
    SYMLINK = "symlink"
    PIPE = "pipe"
    DEVICE = "device"

    def __str__(self) -> str:
        return self.value


SPECIAL_KINDS = (Kind.PIPE, Kind.DEVICE)


@dataclass
class Metadata:
    mode: int = 0o644
    uid: int = 0
    gid: int = 0
    mtime: int = 0
    xattrs: dict[str, bytes] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.mode <= 0o777:
            raise ValueError(f"mode {self.mode:o} outside 0o000..0o777")

    def copy(self) -> "Metadata":
        return Metadata(self.mode, self.uid, self.gid, self.mtime, dict(self.xattrs))


@dataclass
class FsNode:
    inode: int
    kind: Kind
    meta: Metadata
    nlink: int = 1
    data: bytes = b""  # file content; bytes written through a pipe or device
    target: str = ""  # symlink target
    entries: dict[str, int] | None = None  # directories only
    fold_flag: bool = False
    profile_id: str | None = None
    rdev: tuple[int, int] = (0, 0)
    index: dict[bytes, str] = field(default_factory=dict, repr=False)

    @property
    def is_dir(self) -> bool:
        return self.kind is Kind.DIRECTORY

    @property
    def content(self):
        if self.kind is Kind.DIRECTORY:
            return dict(self.entries or {})
        if self.kind is Kind.SYMLINK:
            return self.target
        return self.data


@dataclass(frozen=True)
class Resolution:
    """Result of walking a path: the containing directory and the entry in it."""

    parent: int | None
    name: str | None  # final component as spelled by the caller
    entry: str | None  # raw name actually stored, if the entry exists
    inode: int | None


@dataclass(frozen=True)
class NodeView:
    """Comparable, image-independent view of one path's node."""

    inode: int
    kind: str
    mode: int
    uid: int
    gid: int
    mtime: int
    xattrs: tuple[tuple[str, bytes], ...]
    content: bytes
    nlink: int

    def without_identity(self) -> "NodeView":
        return replace(self, inode=0)


@dataclass
class Delta:
    added: dict[str, NodeView] = field(default_factory=dict)
    removed: dict[str, NodeView] = field(default_factory=dict)
    retargeted: dict[str, tuple[NodeView, NodeView]] = field(default_factory=dict)
    changed: dict[str, tuple[NodeView, NodeView, tuple[str, ...]]] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.retargeted or self.changed)

    def lines(self) -> list[str]:
        out = [f"+ {p} ({v.kind})" for p, v in sorted(self.added.items())]
        out += [f"- {p} ({v.kind})" for p, v in sorted(self.removed.items())]
        out += [f"~ {p} inode {a.inode}->{b.inode}" for p, (a, b) in sorted(self.retargeted.items())]
        for p, (a, b, fields) in sorted(self.changed.items()):
            parts = []
            for f in fields:
                before, after = getattr(a, f), getattr(b, f)
                if f == "mode":
                    parts.append(f"mode {before:o}->{after:o}")
                elif f == "content":
                    parts.append(f"content {len(before)}B->{len(after)}B")
                else:
                    parts.append(f"{f} {before!r}->{after!r}")
            out.append(f"* {p} " + ", ".join(parts))
        return out


def split_path(path: str) -> list[str]:
    return [c for c in path.split("/") if c]


def join_path(*parts: str) -> str:
    comps: list[str] = []
    for part in parts:
        comps.extend(split_path(part))
    return "/" + "/".join(comps)


def _check_component(name: str) -> None:
    if name in (".", ".."):
        raise InvalidName(f"reserved name {name!r}")
    foldcore.fold_name(name, "sensitive")  # validates emptiness, separators, encoding


class FsImage:
    """A single-owner mutable in-memory file system."""

    def __init__(self, device_id: str = "00:2a"):
        self.device_id = device_id
        self.nodes: dict[int, FsNode] = {
            ROOT_INODE: FsNode(ROOT_INODE, Kind.DIRECTORY, Metadata(mode=0o755), entries={})
        }
        self.next_inode = ROOT_INODE + 1
        self.trace: list[TraceRecord] | None = None
        self.program = "vfs"
        self.pid = 1
        self._seq = 0

    # --- snapshots ---------------------------------------------------------

    def copy(self) -> "FsImage":
        """Deep copy; trace sinks are not shared with the copy."""
        sink, self.trace = self.trace, None
        try:
            dup = copy.deepcopy(self)
        finally:
            self.trace = sink
        return dup

    # --- tracing -----------------------------------------------------------

    @contextmanager
    def tracing(self, sink: list[TraceRecord] | None, program: str, pid: int = 1000):
        prev = (self.trace, self.program, self.pid)
        self.trace, self.program, self.pid = sink, program, pid
        try:
            yield self
        finally:
            self.trace, self.program, self.pid = prev

    def _emit(self, op_class: str, syscall: str, path: str, inode: int | None, ok: bool = True):
        if self.trace is None:
            return
        self._seq += 1
        self.trace.append(
            TraceRecord(
                seq=self._seq,
                op_class=op_class,
                syscall=syscall,
                program=self.program,
                pid=self.pid,
                device=self.device_id,
                inode=inode or 0,
                path=path,
                dirfd=None,
                outcome="success" if ok else "failure",
            )
        )

    # --- resolution --------------------------------------------------------

    def node(self, inode: int) -> FsNode:
        return self.nodes[inode]

    def _key(self, d: FsNode, name: str) -> bytes:
        return foldcore.fold_name(name, d.profile_id or DEFAULT_FOLD_PROFILE)

    def _find(self, d: FsNode, name: str) -> tuple[str, int] | None:
        assert d.entries is not None
        if name in d.entries:
            return name, d.entries[name]
        if d.fold_flag:
            try:
                raw = d.index.get(self._key(d, name))
            except InvalidName:
                return None
            if raw is not None:
                return raw, d.entries[raw]
        return None

    def resolve(self, path: str, follow: bool = False, strict: bool = False) -> Resolution | None:
        """Walk ``path``. Returns None when an intermediate component is missing.

        Non-final symlinks are always followed; the final one only with
        ``follow``. ``strict`` turns a missing intermediate into ParentMissing.
        """
        if not path.startswith("/"):
            raise InvalidName(f"path must be absolute: {path!r}")
        pending = deque(split_path(path))
        stack = [ROOT_INODE]
        hops = 0
        last_name: str | None = None
        while pending:
            comp = pending.popleft()
            if comp == ".":
                continue
            if comp == "..":
                if len(stack) > 1:
                    stack.pop()
                continue
            cur = self.nodes[stack[-1]]
            if not cur.is_dir:
                raise NotADirectory(path, f"component before {comp!r} is not a directory")
            found = self._find(cur, comp)
            final = not pending
            if found is None:
                if final:
                    return Resolution(stack[-1], comp, None, None)
                if strict:
                    raise ParentMissing(path, f"missing component {comp!r}")
                return None
            raw, ino = found
            child = self.nodes[ino]
            if child.kind is Kind.SYMLINK and (not final or follow):
                hops += 1
                if hops > SYMLINK_LIMIT:
                    raise LoopLimitExceeded(path, "too many levels of symbolic links")
                if child.target.startswith("/"):
                    stack = [ROOT_INODE]
                pending.extendleft(reversed(split_path(child.target)))
                continue
            if final:
                return Resolution(stack[-1], comp, raw, ino)
            stack.append(ino)
            last_name = comp
        # Path ended on ".", "..", the root, or a followed symlink to a directory.
        parent = stack[-2] if len(stack) > 1 else None
        return Resolution(parent, last_name, None, stack[-1])

    def lookup(self, path: str, follow: bool = False) -> int | None:
        """Inode at ``path`` or None; non-final symlinks are followed. A
        followed final symlink is traced as a use of the link as well."""
        if follow and self.trace is not None:
            link = self.resolve(path)
            if link is not None and link.inode is not None and self.nodes[link.inode].kind is Kind.SYMLINK:
                self._emit("use", "readlink", path, link.inode)
        res = self.resolve(path, follow=follow)
        ino = None if res is None else res.inode
        if ino is not None:
            self._emit("use", "stat" if follow else "lstat", path, ino)
        return ino

    def exists(self, path: str, follow: bool = False) -> bool:
        return self.lookup(path, follow=follow) is not None

    def stat(self, path: str, follow: bool = True) -> FsNode:
        ino = self.lookup(path, follow=follow)
        if ino is None:
            raise NotFound(path)
        return self.nodes[ino]

    def lstat(self, path: str) -> FsNode | None:
        ino = self.lookup(path, follow=False)
        return None if ino is None else self.nodes[ino]

    def entry_name(self, path: str) -> str | None:
        """Raw stored spelling of the final component (no final follow)."""
        res = self.resolve(path)
        return None if res is None else res.entry

    def _dir_for_create(self, parent_path: str) -> FsNode:
        res = self.resolve(parent_path, follow=True, strict=True)
        if res is None or res.inode is None:
            raise ParentMissing(parent_path)
        d = self.nodes[res.inode]
        if not d.is_dir:
            raise NotADirectory(parent_path)
        return d

    # --- mutation helpers ----------------------------------------------------

    def _alloc(self, kind: Kind, meta: Metadata | None) -> FsNode:
        node = FsNode(self.next_inode, kind, (meta or Metadata()).copy())
        self.next_inode += 1
        self.nodes[node.inode] = node
        return node

    def _insert(self, d: FsNode, name: str, ino: int) -> None:
        assert d.entries is not None
        d.entries[name] = ino
        if d.fold_flag:
            d.index[self._key(d, name)] = name

    def _remove_entry(self, d: FsNode, raw: str) -> int:
        assert d.entries is not None
        ino = d.entries.pop(raw)
        if d.fold_flag:
            d.index.pop(self._key(d, raw), None)
        return ino

    def _drop_ref(self, ino: int) -> None:
        node = self.nodes[ino]
        node.nlink -= 1
        if node.nlink <= 0:
            del self.nodes[ino]

    # --- creation ------------------------------------------------------------

    def create(
        self,
        parent_path: str,
        raw_name: str,
        kind: Kind = Kind.FILE,
        meta: Metadata | None = None,
        *,
        exclusive: bool = False,
        exclusive_name: bool = False,
        content: bytes = b"",
        target: str = "",
        fold_flag: bool | None = None,
        profile_id: str | None = None,
        rdev: tuple[int, int] = (0, 0),
    ) -> int:
        """Create an entry, or open the fold-equal existing one.

        With neither option, an existing *file* entry is opened for overwrite
        (truncated, following a final symlink the way ``open(O_CREAT)`` does);
        other kinds raise Exists, as mkdir/mknod/symlink do.
        """
        kind = Kind(kind)
        _check_component(raw_name)
        d = self._dir_for_create(parent_path)
        path = join_path(parent_path, raw_name)
        found = self._find(d, raw_name)
        if found is not None:
            raw, ino = found
            if exclusive:
                self._emit("create", _CREATE_CALL[kind], path, ino, ok=False)
                raise Exists(path)
            if exclusive_name and raw != raw_name:
                self._emit("create", _CREATE_CALL[kind], path, ino, ok=False)
                raise CollidesDifferingName(path, f"fold-equal entry {raw!r} exists")
            if kind is not Kind.FILE:
                self._emit("create", _CREATE_CALL[kind], path, ino, ok=False)
                raise Exists(path)
            return self._open_existing(path, content)
        if kind is Kind.DIRECTORY:
            node = self._alloc(kind, meta or Metadata(mode=0o755))
            node.entries = {}
            node.fold_flag = d.fold_flag if fold_flag is None else fold_flag
            if node.fold_flag:
                node.profile_id = profile_id or d.profile_id or DEFAULT_FOLD_PROFILE
        else:
            node = self._alloc(kind, meta)
            if kind is Kind.FILE:
                node.data = bytes(content)
            elif kind is Kind.SYMLINK:
                if not target:
                    raise InvalidName("symlink target must be non-empty")
                node.target = target
                node.meta.mode = 0o777
            else:
                node.rdev = rdev
        self._insert(d, raw_name, node.inode)
        self._emit("create", _CREATE_CALL[kind], path, node.inode)
        return node.inode

    def _open_existing(self, path: str, content: bytes) -> int:
        res = self.resolve(path, follow=True)
        if res is None:
            raise ParentMissing(path, "symlink referent directory is missing")
        if res.inode is None:
            # Dangling final symlink: O_CREAT creates the referent.
            parent = self.nodes[res.parent]
            node = self._alloc(Kind.FILE, Metadata())
            node.data = bytes(content)
            self._insert(parent, res.name, node.inode)
            self._emit("create", "openat", path, node.inode)
            return node.inode
        node = self.nodes[res.inode]
        if node.is_dir:
            raise IsADirectory(path)
        if node.kind is Kind.FILE:
            node.data = bytes(content)
        elif content:
            node.data += bytes(content)
        self._emit("use", "openat", path, node.inode)
        return node.inode

    def mkdir(self, parent_path, name, meta=None, *, fold_flag=None, profile_id=None) -> int:
        return self.create(parent_path, name, Kind.DIRECTORY, meta, fold_flag=fold_flag, profile_id=profile_id)

    def makedirs(self, path: str, meta: Metadata | None = None) -> int:
        cur = "/"
        ino = ROOT_INODE
        for comp in split_path(path):
            nxt = join_path(cur, comp)
            found = self.resolve(nxt, follow=True)
            if found is not None and found.inode is not None:
                ino = found.inode
            else:
                ino = self.mkdir(cur, comp, meta or Metadata(mode=0o755))
            cur = nxt
        return ino

    def symlink(self, parent_path, name, target: str, meta=None) -> int:
        return self.create(parent_path, name, Kind.SYMLINK, meta, target=target)

    def mknod(self, parent_path, name, kind: Kind = Kind.PIPE, meta=None, rdev=(0, 0)) -> int:
        if Kind(kind) not in SPECIAL_KINDS:
            raise ValueError("mknod creates pipes or devices")
        return self.create(parent_path, name, kind, meta, rdev=rdev)

    def set_fold_flag(self, path: str, flag: bool = True, profile_id: str = DEFAULT_FOLD_PROFILE) -> None:
        """Mirror ``chattr +F``: only an empty directory may change its flag."""
        d = self.stat(path)
        if not d.is_dir:
            raise NotADirectory(path)
        if d.entries:
            raise NotEmpty(path, "fold flag can only change on an empty directory")
        foldcore.get_profile(profile_id)
        d.fold_flag = flag
        d.profile_id = profile_id if flag else None
        d.index = {}

    def link(self, existing_path: str, parent_path: str, raw_name: str, *, replace: bool = True) -> int:
        """Add a hard link. A fold-equal existing entry is re-pointed in place
        (keeping its stored spelling), as a link-to-temp-then-rename does;
        pass ``replace=False`` for plain ``link(2)`` semantics."""
        _check_component(raw_name)
        src = self.lookup(existing_path)
        if src is None:
            raise NotFound(existing_path)
        node = self.nodes[src]
        if node.is_dir:
            raise IsADirectory(existing_path, "hard links to directories are not allowed")
        d = self._dir_for_create(parent_path)
        path = join_path(parent_path, raw_name)
        found = self._find(d, raw_name)
        if found is not None:
            raw, old = found
            if not replace:
                self._emit("create", "link", path, old, ok=False)
                raise Exists(path)
            if old == src:
                return src
            if self.nodes[old].is_dir:
                raise IsADirectory(path)
            self._emit("delete", "rename", path, old)
            d.entries[raw] = src
            node.nlink += 1
            self._drop_ref(old)
            self._emit("create", "link", path, src)
            return src
        self._insert(d, raw_name, src)
        node.nlink += 1
        self._emit("create", "link", path, src)
        return src

    # --- removal -------------------------------------------------------------

    def _entry(self, path: str) -> tuple[FsNode, str, int]:
        res = self.resolve(path)
        if res is None or res.inode is None or res.entry is None:
            raise NotFound(path)
        return self.nodes[res.parent], res.entry, res.inode

    def unlink(self, path: str) -> None:
        d, raw, ino = self._entry(path)
        if self.nodes[ino].is_dir:
            raise IsADirectory(path)
        self._emit("delete", "unlinkat", path, ino)
        self._remove_entry(d, raw)
        self._drop_ref(ino)

    def rmdir(self, path: str) -> None:
        d, raw, ino = self._entry(path)
        node = self.nodes[ino]
        if not node.is_dir:
            raise NotADirectory(path)
        if node.entries:
            raise NotEmpty(path)
        self._emit("delete", "rmdir", path, ino)
        self._remove_entry(d, raw)
        self._drop_ref(ino)

    def remove_tree(self, path: str) -> None:
        """``rm -rf`` without following symlinks."""
        _, _, ino = self._entry(path)
        node = self.nodes[ino]
        if node.is_dir:
            for child in list(node.entries or {}):
                self.remove_tree(join_path(path, child))
            self.rmdir(path)
        else:
            self.unlink(path)

    def rename(self, old_path: str, new_parent: str, new_name: str) -> int:
        """Move an entry. Replacing a fold-equal entry keeps that entry's
        stored spelling and only swaps the inode (as ext4 does)."""
        _check_component(new_name)
        od, oraw, ino = self._entry(old_path)
        moving = self.nodes[ino]
        nd = self._dir_for_create(new_parent)
        if moving.is_dir and self._is_ancestor(ino, nd.inode):
            raise InvalidName(f"cannot move {old_path} inside itself")
        path = join_path(new_parent, new_name)
        found = self._find(nd, new_name)
        self._remove_entry(od, oraw)
        if found is not None:
            raw, old = found
            if old == ino:
                self._insert(nd, new_name, ino)
            else:
                victim = self.nodes[old]
                if victim.is_dir and (not moving.is_dir or victim.entries):
                    self._insert(od, oraw, ino)
                    raise (NotEmpty if victim.entries else IsADirectory)(path)
                if moving.is_dir and not victim.is_dir:
                    self._insert(od, oraw, ino)
                    raise NotADirectory(path)
                self._emit("delete", "rename", path, old)
                nd.entries[raw] = ino
                self._drop_ref(old)
        else:
            self._insert(nd, new_name, ino)
        self._emit("rename", "rename", path, ino)
        return ino

    def _is_ancestor(self, anc: int, ino: int) -> bool:
        if anc == ino:
            return True
        d = self.nodes[anc]
        return any(
            self.nodes[c].is_dir and self._is_ancestor(c, ino) for c in (d.entries or {}).values()
        )

    # --- data and metadata -----------------------------------------------------

    def write(self, path: str, data: bytes, *, append: bool = False, follow: bool = True) -> int:
        res = self.resolve(path, follow=follow)
        if res is None or res.inode is None:
            raise NotFound(path)
        node = self.nodes[res.inode]
        if node.is_dir:
            raise IsADirectory(path)
        if node.kind is Kind.SYMLINK:
            raise InvalidName(f"cannot write to a symlink without following: {path}")
        if node.kind is Kind.FILE and not append:
            node.data = bytes(data)
        else:
            node.data += bytes(data)
        self._emit("use", "write", path, node.inode)
        return node.inode

    def read(self, path: str) -> bytes:
        return self.stat(path, follow=True).data

    def set_meta(self, path: str, *, follow: bool = False, **fields) -> int:
        res = self.resolve(path, follow=follow)
        if res is None or res.inode is None:
            raise NotFound(path)
        node = self.nodes[res.inode]
        for key, value in fields.items():
            if key == "xattrs":
                value = dict(value)
            elif key == "mode" and not 0 <= value <= 0o777:
                raise ValueError(f"bad mode {value:o}")
            elif key not in ("mode", "uid", "gid", "mtime"):
                raise TypeError(f"unknown metadata field {key!r}")
            setattr(node.meta, key, value)
        self._emit("use", "fchmodat", path, node.inode)
        return node.inode

    def readdir(self, path: str) -> list[str]:
        node = self.stat(path, follow=True)
        if not node.is_dir:
            raise NotADirectory(path)
        return list(node.entries or {})

    # --- walking, views, dumps ---------------------------------------------------

    def walk(self, root: str = "/") -> Iterator[tuple[str, FsNode]]:
        """Pre-order (path, node) pairs below ``root`` in readdir order, root
        excluded. Symlinks are not followed."""
        res = self.resolve(root, follow=True)
        if res is None or res.inode is None:
            return
        stack = [(root.rstrip("/") or "", res.inode)]
        while stack:
            base, ino = stack.pop()
            node = self.nodes[ino]
            children = list((node.entries or {}).items())
            for name, child in reversed(children):
                stack.append((f"{base}/{name}", child))
            if base != (root.rstrip("/") or ""):
                yield base, node
        return

    def paths_by_inode(self, root: str = "/") -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for path, node in self.walk(root):
            out.setdefault(node.inode, []).append(path)
        return out

    def view(self, node: FsNode) -> NodeView:
        if node.kind is Kind.DIRECTORY:
            content = "\n".join(node.entries or {}).encode()
        elif node.kind is Kind.SYMLINK:
            content = node.target.encode()
        else:
            content = node.data
        return NodeView(
            inode=node.inode,
            kind=node.kind.value,
            mode=node.meta.mode,
            uid=node.meta.uid,
            gid=node.meta.gid,
            mtime=node.meta.mtime,
            xattrs=tuple(sorted(node.meta.xattrs.items())),
            content=content,
            nlink=node.nlink,
        )

    def tree_view(self, root: str = "/") -> dict[str, NodeView]:
        prefix = root.rstrip("/")
        return {path[len(prefix):]: self.view(node) for path, node in self.walk(root)}

    def dump(self) -> str:
        """Deterministic one-line-per-node text form of the whole image."""
        paths = self.paths_by_inode("/")
        lines = [f"# device {self.device_id}"]
        for ino in sorted(self.nodes):
            node = self.nodes[ino]
            kind = node.kind.value
            if node.is_dir and node.fold_flag:
                kind += f"+F({node.profile_id})"
            digest = hashlib.sha256(self.view(node).content).hexdigest()[:16]
            plist = ",".join(paths.get(ino, ["/"] if ino == ROOT_INODE else []))
            lines.append(
                f"{ino} {kind} {node.meta.mode:04o} {node.meta.uid} {node.meta.gid} "
                f"{node.nlink} {plist} {digest}"
            )
        return "\n".join(lines) + "\n"

    def check_invariants(self) -> None:
        """Raise AssertionError if entry uniqueness or link counts are off."""
        refs: dict[int, int] = {}
        for node in self.nodes.values():
            if not node.is_dir:
                continue
            keys = set()
            for name, child in (node.entries or {}).items():
                assert child in self.nodes, f"dangling entry {name!r} -> {child}"
                refs[child] = refs.get(child, 0) + 1
                if node.fold_flag:
                    key = self._key(node, name)
                    assert key not in keys, f"fold-duplicate entry {name!r} in inode {node.inode}"
                    keys.add(key)
                    assert node.index.get(key) == name, f"stale fold index for {name!r}"
        for ino, node in self.nodes.items():
            if ino == ROOT_INODE:
                assert refs.get(ino, 0) == 0
                continue
            if node.is_dir:
                assert refs.get(ino) == 1 and node.nlink == 1, f"directory {ino} link count"
            else:
                assert refs.get(ino, 0) == node.nlink, f"inode {ino} nlink {node.nlink} != refs {refs.get(ino, 0)}"


_CREATE_CALL = {
    Kind.FILE: "openat",
    Kind.DIRECTORY: "mkdir",
    Kind.SYMLINK: "symlink",
    Kind.PIPE: "mknod",
    Kind.DEVICE: "mknod",
}


def snapshot_diff(
    before: FsImage,
    after: FsImage,
    root: str = "/",
    after_root: str | None = None,
    *,
    track_inodes: bool = True,
    strict_times: bool = False,
) -> Delta:
    """Path-level delta between two images below a comparison root.

    ``retargeted`` lists paths whose inode changed; it is only meaningful when
    ``after`` descends from ``before`` (pass ``track_inodes=False`` when
    comparing unrelated images).
    """
    bview = before.tree_view(root)
    aview = after.tree_view(after_root or root)
    delta = Delta()
    fields = ["kind", "mode", "uid", "gid", "xattrs", "content", "nlink"]
    if strict_times:
        fields.append("mtime")
    for path, a in aview.items():
        b = bview.get(path)
        if b is None:
            delta.added[path] = a
            continue
        if track_inodes and a.inode != b.inode:
            delta.retargeted[path] = (b, a)
            continue
        diffs = tuple(f for f in fields if getattr(a, f) != getattr(b, f))
        if diffs:
            delta.changed[path] = (b, a, diffs)
    for path, b in bview.items():
        if path not in aview:
            delta.removed[path] = b
    return delta


def apply_delta(view: dict[str, NodeView], delta: Delta) -> dict[str, NodeView]:
    """Replay a delta onto a tree view (used to check delta completeness)."""
    out = {p: v for p, v in view.items() if p not in delta.removed}
    out.update(delta.added)
    for path, (_, new) in delta.retargeted.items():
        out[path] = new
    for path, (_, new, _) in delta.changed.items():
        out[path] = new
    return out
