"""Shared pieces of the utility models: events, outcomes, source walking."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..tracer import TraceRecord
from ..vfs import FsImage, FsNode, Kind, join_path

STEP_LIMIT = 10_000

# Event results.
OK = "ok"
ERROR = "error_reported"
SKIP = "skip"
DEGRADE = "degrade"
PROMPT = "user_prompt"
STEP_LIMIT_HIT = "step_limit_hit"
WARNING = "warning"


@dataclass(frozen=True)
class Event:
    op: str
    path: str  # destination path the operation addressed
    result: str = OK
    source: str = ""  # source-relative path the operation came from
    detail: str = ""


@dataclass
class CopyOutcome:
    utility: str
    final_image: FsImage
    events: list[Event] = field(default_factory=list)
    terminated: str = OK  # ok | error_reported | user_prompt | step_limit_hit
    warnings: list[str] = field(default_factory=list)
    archive: bytes | None = None
    trace: list[TraceRecord] = field(default_factory=list)

    @property
    def stopped(self) -> bool:
        """True when the utility stopped before processing every entry."""
        return self.terminated in (PROMPT, STEP_LIMIT_HIT)

    def results(self) -> set[str]:
        return {e.result for e in self.events}

    def with_result(self, result: str) -> list[Event]:
        return [e for e in self.events if e.result == result]


@dataclass(frozen=True)
class SourceEntry:
    rel: str
    node: FsNode

    @property
    def kind(self) -> Kind:
        return self.node.kind

    @property
    def name(self) -> str:
        return self.rel.rsplit("/", 1)[-1]

    @property
    def parent(self) -> str:
        return self.rel.rsplit("/", 1)[0] if "/" in self.rel else ""


def source_entries(image: FsImage, src: str, *, sort: bool = False) -> list[SourceEntry]:
    """Pre-order listing below ``src``: readdir order, or byte order when
    ``sort`` is set. Symlinks are not followed and nothing is traced."""
    root = image.resolve(src, follow=True)
    if root is None or root.inode is None:
        return []
    out: list[SourceEntry] = []

    def rec(ino: int, prefix: str) -> None:
        names = list(image.nodes[ino].entries or {})
        if sort:
            names.sort(key=lambda n: n.encode("utf-8", "surrogateescape"))
        for name in names:
            child = image.nodes[ino].entries[name]
            rel = f"{prefix}/{name}" if prefix else name
            node = image.nodes[child]
            out.append(SourceEntry(rel, node))
            if node.is_dir:
                rec(child, rel)

    rec(root.inode, "")
    return out


def meta_fields(node: FsNode) -> dict:
    m = node.meta
    return {"mode": m.mode, "uid": m.uid, "gid": m.gid, "mtime": m.mtime, "xattrs": dict(m.xattrs)}


def split_dst(dst: str, rel: str) -> tuple[str, str, str]:
    """Return (full path, parent path, final name) of ``rel`` below ``dst``."""
    full = join_path(dst, rel)
    parent, _, name = full.rpartition("/")
    return full, parent or "/", name


class Run:
    """Mutable state for one model run."""

    def __init__(self, utility: str, image: FsImage, src: str, dst: str):
        self.utility = utility
        self.image = image
        self.src = src
        self.dst = dst
        self.outcome = CopyOutcome(utility, image)

    def event(self, op: str, path: str, result: str = OK, source: str = "", detail: str = "") -> None:
        self.outcome.events.append(Event(op, path, result, source, detail))

    def error(self, op: str, path: str, source: str, detail: str) -> None:
        self.event(op, path, ERROR, source, detail)
        self.outcome.warnings.append(f"{self.utility}: {detail}")
