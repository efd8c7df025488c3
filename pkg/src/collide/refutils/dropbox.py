"""Dropbox client model: upload from a case-sensitive tree, then sync down.

The service keeps names case-insensitively. An entry whose name folds equal
to one already present is stored under a new name with a " (Case Conflicts)"
suffix (numbered when that is taken). Pipes and devices are not synced and
hard links become independent files.
"""

from __future__ import annotations

import posixpath

from ..errors import VfsError
from ..vfs import Kind, Metadata
from .common import DEGRADE, SKIP, Run, meta_fields, source_entries, split_dst

SUFFIX = " (Case Conflicts)"


def conflict_name(name: str, attempt: int) -> str:
    stem, ext = posixpath.splitext(name)
    tag = SUFFIX if attempt == 0 else f" (Case Conflicts {attempt})"
    return f"{stem}{tag}{ext}"


def run_dropbox(run: Run) -> None:
    image = run.image
    renamed: dict[str, str] = {}  # source rel dir -> destination rel dir
    for e in source_entries(image, run.src):
        parent_rel = renamed.get(e.parent, e.parent)
        rel = f"{parent_rel}/{e.name}" if parent_rel else e.name
        node = e.node
        if node.kind in (Kind.PIPE, Kind.DEVICE):
            run.event("sync", rel, SKIP, e.rel, "special files are not synced")
            continue
        if node.kind is Kind.FILE and node.nlink > 1:
            run.event("sync", rel, DEGRADE, e.rel, "hard link synced as an independent file")
        full, parent, name = split_dst(run.dst, rel)
        existing = image.entry_name(full)
        if existing is not None and existing != name:
            attempt = 0
            while image.entry_name(split_dst(run.dst, _sibling(parent_rel, conflict_name(e.name, attempt)))[0]):
                attempt += 1
            name = conflict_name(e.name, attempt)
            rel = _sibling(parent_rel, name)
            full = split_dst(run.dst, rel)[0]
            run.event("rename", full, source=e.rel, detail="case conflict")
        if node.is_dir:
            renamed[e.rel] = rel
        meta = Metadata(**meta_fields(node))
        try:
            if node.is_dir:
                if image.lstat(full) is None:
                    image.mkdir(parent, name, meta)
            elif node.kind is Kind.SYMLINK:
                image.symlink(parent, name, node.target, meta)
            else:
                image.create(parent, name, Kind.FILE, meta, content=node.data)
            run.event("create", full, source=e.rel)
        except VfsError as exc:
            run.error("sync", full, e.rel, f"{rel}: {exc.strerror or exc}")


def _sibling(parent_rel: str, name: str) -> str:
    return f"{parent_rel}/{name}" if parent_rel else name
