"""Static collision scanning of listings, directory trees and tar archives.

Two raw paths collide when their parents fold to the same path and their
final components fold to the same name while the raw paths differ. Implicit
ancestor directories (``a/b`` implies ``a``) take part in grouping and borrow
the ordinal of their first descendant.
"""

from __future__ import annotations

import bz2
import gzip
import json
import lzma
import os
import stat
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import foldcore
from .errors import MalformedEntry, TruncatedArchive, UnsupportedHeader

KIND_RANK = {"symlink": 0, "hardlink": 1, "pipe": 2, "device": 3, "dir": 4, "file": 5, "unknown": 6}
KINDS = tuple(KIND_RANK)
DEFAULT_SCAN_PROFILE = "full-fold"
CAVEAT = ("Groups are computed with the folding profile named below. The file system that finally "
          "receives these entries may fold names by different rules, so the real set of collisions can differ.")

EFFECTS = {
    "symlink": "writes through the colliding name may follow the symlink out of the tree",
    "hardlink": "hard-link groups may be rewired or link targets overwritten",
    "pipe": "file data may be written into the pipe or device",
    "device": "file data may be written into the pipe or device",
    "dir-dir": "directory contents merge and one side's permissions win",
    "file": "one entry's data replaces the other under a single name",
}


def normalize_entry_path(path: str) -> str:
    """Strip ``./`` and leading ``/``, collapse ``//`` and a trailing ``/``.
    Any remaining ``.`` or ``..`` component is rejected."""
    if not path or "\0" in path:
        raise MalformedEntry(f"bad entry path {path!r}")
    comps = [c for c in path.split("/") if c]
    while comps and comps[0] == ".":
        comps.pop(0)
    if not comps:
        raise MalformedEntry(f"entry {path!r} names the archive root")
    bad = [c for c in comps if c in (".", "..")]
    if bad:
        raise MalformedEntry(f"entry {path!r} contains {bad[0]!r}")
    return "/".join(comps)


def kind_pair(kinds: Iterable[str]) -> str:
    ordered = sorted(set(kinds), key=lambda k: KIND_RANK.get(k, KIND_RANK["unknown"]))
    if len(ordered) == 1:
        return f"{ordered[0]}-{ordered[0]}"
    return "-".join(ordered)


def predicted_effect(pair: str) -> str:
    parts = pair.split("-")
    for kind in ("symlink", "hardlink", "pipe", "device"):
        if kind in parts:
            return EFFECTS[kind]
    if pair == "dir-dir":
        return EFFECTS["dir-dir"]
    if "dir" in parts:
        return "a directory and a non-directory compete for one name; the copy may fail or replace one"
    return EFFECTS["file"]


@dataclass(frozen=True)
class Entry:
    path: str
    kind: str = "file"
    ordinal: int = 0
    implicit: bool = False


@dataclass
class CollisionGroup:
    key: str  # folded path, "/"-joined
    members: list[Entry]
    kind_pair: str
    predicted_effect: str

    @property
    def paths(self) -> list[str]:
        return [m.path for m in self.members]

    @property
    def first_ordinal(self) -> int:
        return min(m.ordinal for m in self.members)

    @property
    def parent(self) -> str:
        """Raw parent path of the first member ("" for the top level)."""
        return self.members[0].path.rpartition("/")[0]

    @property
    def predicted_survivor(self) -> str:
        """Last writer wins: the member with the highest ordinal. Real
        utilities differ, so this is a guess and not a guarantee."""
        return max(self.members, key=lambda m: (m.ordinal, m.path)).path

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "parent": self.parent,
            "members": [{"path": m.path, "kind": m.kind, "ordinal": m.ordinal} for m in self.members],
            "kind_pair": self.kind_pair,
            "predicted_survivor": self.predicted_survivor,
            "predicted_effect": self.predicted_effect,
        }


@dataclass
class ScanReport:
    profile: str
    entries: int
    groups: list[CollisionGroup] = field(default_factory=list)
    issues: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "caveat": CAVEAT,
            "profile": self.profile,
            "unicode_version": foldcore.UNICODE_VERSION,
            "entries": self.entries,
            "groups": [g.to_dict() for g in self.groups],
            "issues": list(self.issues),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ScanReport":
        groups = []
        for g in d.get("groups", []):
            members = [Entry(m["path"], m.get("kind", "file"), m.get("ordinal", 0)) for m in g["members"]]
            pair = g.get("kind_pair") or kind_pair(m.kind for m in members)
            groups.append(CollisionGroup(g.get("key", ""), members, pair, g.get("predicted_effect", predicted_effect(pair))))
        return cls(d["profile"], d.get("entries", 0), groups, list(d.get("issues", [])))

    @classmethod
    def from_json(cls, text: str) -> "ScanReport":
        return cls.from_dict(json.loads(text))


def _coerce(item, ordinal: int) -> Entry:
    if isinstance(item, Entry):
        return item
    if isinstance(item, str):
        kind = "dir" if item.endswith("/") else "file"
        return Entry(item, kind, ordinal)
    path, kind = item[0], item[1] if len(item) > 1 else "file"
    return Entry(path, kind, ordinal)


def scan_paths(entries: Iterable, profile="full-fold", *, baseline: Iterable = (), strict: bool = False) -> ScanReport:
    """Group colliding paths. ``entries`` are Entry objects, ``(path, kind)``
    pairs or plain strings (a trailing ``/`` marks a directory). Baseline
    entries are existing destination content: they get ordinal -1 and a group
    made only of baseline entries is not reported."""
    prof = foldcore.get_profile(profile)
    issues: list[str] = []
    nodes: dict[str, Entry] = {}

    def add(entry: Entry) -> None:
        try:
            path = normalize_entry_path(entry.path)
        except MalformedEntry as exc:
            if strict:
                raise
            issues.append(str(exc))
            return
        comps = path.split("/")
        for i in range(1, len(comps)):
            anc = "/".join(comps[:i])
            if anc not in nodes:
                nodes[anc] = Entry(anc, "dir", entry.ordinal, implicit=True)
        prev = nodes.get(path)
        if prev is None or prev.implicit:
            ordinal = entry.ordinal if prev is None else min(prev.ordinal, entry.ordinal)
            nodes[path] = Entry(path, entry.kind, ordinal)
        elif prev.kind != entry.kind or prev.ordinal != entry.ordinal:
            issues.append(f"duplicate entry {path!r}")

    count = 0
    for item in baseline:
        e = _coerce(item, -1)
        add(Entry(e.path, e.kind, -1))
    for ordinal, item in enumerate(entries):
        e = _coerce(item, ordinal)
        add(Entry(e.path, e.kind, ordinal if not isinstance(item, Entry) else e.ordinal))
        count += 1

    buckets: dict[tuple[tuple[str, ...], str], list[Entry]] = {}
    for path, entry in nodes.items():
        comps = path.split("/")
        try:
            key = (foldcore.fold_components(comps[:-1], prof), foldcore.fold_text(comps[-1], prof))
        except Exception as exc:  # invalid names are reported, not fatal
            issues.append(f"{path!r}: {exc}")
            continue
        buckets.setdefault(key, []).append(entry)

    groups = []
    for (parent, name), members in buckets.items():
        if len(members) < 2 or all(m.ordinal < 0 for m in members):
            continue
        members.sort(key=lambda m: (m.ordinal, m.path))
        pair = kind_pair(m.kind for m in members)
        groups.append(CollisionGroup("/".join(parent + (name,)), members, pair, predicted_effect(pair)))
    groups.sort(key=lambda g: (g.first_ordinal, g.key))
    return ScanReport(prof.id, count, groups, issues)


def leaf_groups(groups: list[CollisionGroup]) -> list[CollisionGroup]:
    """Drop groups whose members are ancestors of another group's members."""
    keys = [g.key for g in groups]
    return [g for g in groups if not any(k.startswith(g.key + "/") for k in keys)]


# --- list files ------------------------------------------------------------------


def parse_listing(lines: Iterable[str]) -> list[Entry]:
    """``name<TAB>kind`` per line; kind defaults to file (dir with a trailing /)."""
    out = []
    for lineno, line in enumerate(lines):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        name, _, kind = line.partition("\t")
        kind = kind.strip() or ("dir" if name.endswith("/") else "file")
        if kind == "directory":
            kind = "dir"
        if kind not in KIND_RANK:
            kind = "unknown"
        out.append(Entry(name, kind, len(out)))
    return out


# --- directory trees ---------------------------------------------------------------


def _host_kind(st: os.stat_result) -> str:
    mode = st.st_mode
    if stat.S_ISLNK(mode):
        return "symlink"
    if stat.S_ISDIR(mode):
        return "dir"
    if stat.S_ISFIFO(mode):
        return "pipe"
    if stat.S_ISCHR(mode) or stat.S_ISBLK(mode):
        return "device"
    if stat.S_ISREG(mode):
        return "hardlink" if st.st_nlink > 1 else "file"
    return "unknown"


def walk_entries(source, root: str = "/") -> list[Entry]:
    """Pre-order entries below ``root`` of an FsImage, or below a host path."""
    from .vfs import FsImage, Kind

    out: list[Entry] = []
    if isinstance(source, FsImage):
        prefix = root.rstrip("/")
        names = {Kind.FILE: "file", Kind.DIRECTORY: "dir", Kind.SYMLINK: "symlink",
                 Kind.PIPE: "pipe", Kind.DEVICE: "device"}
        for path, node in source.walk(root):
            kind = names[node.kind]
            if kind == "file" and node.nlink > 1:
                kind = "hardlink"
            out.append(Entry(path[len(prefix) + 1:], kind, len(out)))
        return out
    base = Path(source)

    def rec(rel: str) -> None:
        for name in sorted(os.listdir(base / rel if rel else base)):
            child = f"{rel}/{name}" if rel else name
            st = os.lstat(base / child)
            kind = _host_kind(st)
            out.append(Entry(child, kind, len(out)))
            if kind == "dir":
                rec(child)

    rec("")
    return out


def scan_dir(source, root: str = "/", profile="full-fold") -> ScanReport:
    return scan_paths(walk_entries(source, root), profile)


# --- tar ---------------------------------------------------------------------------

BLOCK = 512
TAR_KINDS = {"0": "file", "\0": "file", "7": "file", "1": "hardlink", "2": "symlink",
             "3": "device", "4": "device", "5": "dir", "6": "pipe"}


@dataclass(frozen=True)
class TarMember:
    name: str
    typeflag: str
    kind: str
    size: int
    mode: int
    uid: int
    gid: int
    mtime: int
    linkname: str
    offset: int


@dataclass
class TarListing:
    members: list[TarMember] = field(default_factory=list)
    issues: list[str] = field(default_factory=list)
    compression: str | None = None


def _decompress(data: bytes) -> tuple[bytes, str | None]:
    try:
        if data[:2] == b"\x1f\x8b":
            return gzip.decompress(data), "gzip"
        if data[:3] == b"BZh":
            return bz2.decompress(data), "bz2"
        if data[:6] == b"\xfd7zXZ\x00":
            return lzma.decompress(data), "xz"
    except (EOFError, OSError, lzma.LZMAError, zlib.error) as exc:
        raise TruncatedArchive(f"compressed stream is damaged or truncated: {exc}") from exc
    return data, None


def _cstr(field_bytes: bytes) -> str:
    return field_bytes.split(b"\0", 1)[0].decode("utf-8", "surrogateescape")


def _number(field_bytes: bytes) -> int:
    if field_bytes and field_bytes[0] & 0x80:
        # GNU base-256: big-endian two's complement with the top bit as marker.
        value = field_bytes[0] & 0x7F
        negative = bool(field_bytes[0] & 0x40)
        for b in field_bytes[1:]:
            value = (value << 8) | b
        if negative:
            value -= 1 << (8 * len(field_bytes) - 1)
        return value
    text = field_bytes.replace(b"\0", b" ").strip()
    return int(text, 8) if text else 0


def _checksum_ok(header: bytes) -> bool:
    stored = _number(header[148:156])
    blanked = header[:148] + b" " * 8 + header[156:]
    unsigned = sum(blanked)
    signed = sum(b - 256 if b > 127 else b for b in blanked)
    return stored in (unsigned, signed)


def _pax_records(payload: bytes) -> dict[str, str]:
    out = {}
    pos = 0
    while pos < len(payload):
        space = payload.find(b" ", pos)
        if space < 0:
            break
        length = int(payload[pos:space])
        if length <= 0:
            break
        record = payload[space + 1:pos + length - 1]
        key, _, value = record.partition(b"=")
        out[key.decode()] = value.decode("utf-8", "surrogateescape")
        pos += length
    return out


def parse_tar(data: bytes) -> TarListing:
    """Parse ustar, pax and GNU long-name headers without extracting anything."""
    data, compression = _decompress(bytes(data))
    listing = TarListing(compression=compression)
    pos = 0
    pax_global: dict[str, str] = {}
    pending: dict[str, str] = {}
    while True:
        if pos >= len(data):
            if pos == 0:
                raise TruncatedArchive("empty archive")
            listing.issues.append("archive ends without the end-of-archive marker")
            break
        header = data[pos:pos + BLOCK]
        if len(header) < BLOCK:
            raise TruncatedArchive(f"partial header at offset {pos}")
        if header == b"\0" * BLOCK:
            break
        if not _checksum_ok(header):
            listing.issues.append(f"bad header checksum at offset {pos}; stopping")
            break
        typeflag = chr(header[156])
        size = _number(header[124:136])
        if "size" in pending:
            size = int(pending["size"])
        data_start = pos + BLOCK
        data_end = data_start + size
        if typeflag in ("1", "2", "3", "4", "5", "6"):
            data_end = data_start  # these carry no payload
        if data_end > len(data):
            raise TruncatedArchive(f"member at offset {pos} needs {size} bytes, archive ends early")
        payload = data[data_start:data_end]
        next_pos = data_start + ((data_end - data_start + BLOCK - 1) // BLOCK) * BLOCK

        if typeflag == "x":
            pending.update(_pax_records(payload))
        elif typeflag == "g":
            pax_global.update(_pax_records(payload))
        elif typeflag == "L":
            pending["path"] = payload.split(b"\0", 1)[0].decode("utf-8", "surrogateescape")
        elif typeflag == "K":
            pending["linkpath"] = payload.split(b"\0", 1)[0].decode("utf-8", "surrogateescape")
        else:
            name = _cstr(header[0:100])
            if header[257:262] == b"ustar":
                prefix = _cstr(header[345:500])
                if prefix and header[257:265] != b"ustar  \0":  # old GNU uses this space differently
                    name = f"{prefix}/{name}"
            attrs = {**pax_global, **pending}
            name = attrs.get("path", name)
            linkname = attrs.get("linkpath", _cstr(header[157:257]))
            pending = {}
            kind = TAR_KINDS.get(typeflag)
            if kind is None:
                exc = UnsupportedHeader(f"{name!r}: unsupported type flag {typeflag!r}")
                listing.issues.append(str(exc))
            else:
                if kind == "file" and name.endswith("/"):
                    kind = "dir"
                listing.members.append(TarMember(
                    name, typeflag, kind, size, _number(header[100:108]) & 0o7777,
                    int(attrs.get("uid", _number(header[108:116]))), int(attrs.get("gid", _number(header[116:124]))),
                    int(float(attrs.get("mtime", _number(header[136:148])))), linkname, pos))
        pos = next_pos
    return listing


def tar_entries(listing: TarListing) -> list[Entry]:
    """Map members to scan entries; both ends of a type-1 link count as hardlinks."""
    link_targets = set()
    for m in listing.members:
        if m.kind == "hardlink":
            try:
                link_targets.add(normalize_entry_path(m.linkname))
            except MalformedEntry:
                pass
    out = []
    for i, m in enumerate(listing.members):
        kind = m.kind
        try:
            if kind == "file" and normalize_entry_path(m.name) in link_targets:
                kind = "hardlink"
        except MalformedEntry:
            pass
        out.append(Entry(m.name, kind, i))
    return out


def scan_tar(data: bytes, profile="full-fold", *, baseline: Iterable = ()) -> ScanReport:
    listing = parse_tar(data)
    report = scan_paths(tar_entries(listing), profile, baseline=baseline)
    report.issues = listing.issues + report.issues
    return report


# --- brute-force and expansion oracles ------------------------------------------------


def expand_naive(entries: Iterable, profile="full-fold") -> dict[tuple[str, ...], str]:
    """Insert each path into a dict keyed by folded components; the value is
    the first raw path that claimed the key. Fewer keys than distinct raw
    paths means some entry was lost on a case-insensitive target."""
    seen: dict[tuple[str, ...], str] = {}
    for item in entries:
        e = _coerce(item, 0)
        path = normalize_entry_path(e.path)
        comps = path.split("/")
        for i in range(1, len(comps) + 1):
            key = foldcore.fold_components(comps[:i], profile)
            seen.setdefault(key, "/".join(comps[:i]))
    return seen
