"""GNU tar model: ``tar -cf a.tar -C src .`` followed by ``tar -xf a.tar -C dst``.

Archive members are stored in directory-read order. The first path seen for a
multiply-linked inode is stored as a regular member and later paths as hard
links to it. On extraction an existing non-directory is unlinked and the
member recreated under its own spelling; an existing directory is reused and
directory metadata is applied once all members are out. A directory member
that meets a non-directory replaces it under the existing spelling.
"""

from __future__ import annotations

import io
import tarfile
from dataclasses import dataclass, field

from ..errors import VfsError
from ..vfs import Kind, Metadata, join_path
from .common import Run, meta_fields, source_entries, split_dst


@dataclass(frozen=True)
class Member:
    name: str
    kind: str  # file | hardlink | symlink | dir | pipe | device
    meta: dict = field(hash=False, compare=False)
    data: bytes = b""
    linkname: str = ""
    rdev: tuple[int, int] = (0, 0)


def build_members(image, src: str) -> list[Member]:
    members: list[Member] = []
    first_path: dict[int, str] = {}
    kinds = {Kind.DIRECTORY: "dir", Kind.SYMLINK: "symlink", Kind.PIPE: "pipe", Kind.DEVICE: "device"}
    for entry in source_entries(image, src):
        node = entry.node
        meta = meta_fields(node)
        if node.kind is Kind.FILE:
            if node.nlink > 1 and node.inode in first_path:
                members.append(Member(entry.rel, "hardlink", meta, linkname=first_path[node.inode]))
                continue
            first_path.setdefault(node.inode, entry.rel)
            members.append(Member(entry.rel, "file", meta, node.data))
        elif node.kind is Kind.SYMLINK:
            members.append(Member(entry.rel, "symlink", meta, linkname=node.target))
        else:
            members.append(Member(entry.rel, kinds[node.kind], meta, rdev=node.rdev))
    return members


def archive_bytes(members: list[Member]) -> bytes:
    """Serialize the member list as a real GNU tar archive."""
    buf = io.BytesIO()
    types = {"file": tarfile.REGTYPE, "hardlink": tarfile.LNKTYPE, "symlink": tarfile.SYMTYPE,
             "dir": tarfile.DIRTYPE, "pipe": tarfile.FIFOTYPE, "device": tarfile.CHRTYPE}
    with tarfile.open(fileobj=buf, mode="w", format=tarfile.GNU_FORMAT) as tf:
        for m in members:
            info = tarfile.TarInfo(m.name)
            info.type = types[m.kind]
            info.mode = m.meta["mode"]
            info.uid, info.gid, info.mtime = m.meta["uid"], m.meta["gid"], m.meta["mtime"]
            info.linkname = m.linkname
            info.devmajor, info.devminor = m.rdev
            if m.kind == "file":
                info.size = len(m.data)
                tf.addfile(info, io.BytesIO(m.data))
            else:
                tf.addfile(info)
    return buf.getvalue()


def _remove_existing(run: Run, full: str, m: Member) -> bool:
    """Make room for a non-directory member; False if that failed."""
    image = run.image
    node = image.lstat(full)
    if node is None:
        return True
    try:
        if node.is_dir:
            image.rmdir(full)
        else:
            image.unlink(full)
        run.event("unlink", full, source=m.name)
        return True
    except VfsError as exc:
        run.error("unlink", full, m.name, f"{full}: Cannot unlink: {exc.strerror or exc}")
        return False


def _extract_dir(run: Run, m: Member, full: str, parent: str, name: str) -> None:
    image = run.image
    node = image.lstat(full)
    if node is not None and node.is_dir:
        run.event("mkdir", full, source=m.name, detail="exists")
        return
    meta = Metadata(mode=0o700)  # real permissions arrive with the delayed metadata
    if node is None:
        image.mkdir(parent, name, meta)
    else:
        # The non-directory is removed and the directory takes over its
        # stored spelling (the name the kernel still holds for the slot).
        kept = image.entry_name(full) or name
        try:
            image.unlink(full)
            run.event("unlink", full, source=m.name)
            image.mkdir(parent, kept, meta)
        except VfsError as exc:
            run.error("mkdir", full, m.name, f"{full}: Cannot mkdir: {exc.strerror or exc}")
            return
    run.event("mkdir", full, source=m.name)


def extract(run: Run, members: list[Member]) -> None:
    image = run.image
    delayed: list[tuple[str, Member]] = []
    for m in members:
        full, parent, name = split_dst(run.dst, m.name)
        try:
            if m.kind == "dir":
                _extract_dir(run, m, full, parent, name)
                delayed.append((full, m))
                continue
            if not _remove_existing(run, full, m):
                continue
            meta = Metadata(**m.meta)
            if m.kind == "file":
                image.create(parent, name, Kind.FILE, meta, exclusive=True, content=m.data)
            elif m.kind == "hardlink":
                image.link(join_path(run.dst, m.linkname), parent, name, replace=False)
            elif m.kind == "symlink":
                image.symlink(parent, name, m.linkname, meta)
            else:
                image.mknod(parent, name, Kind.PIPE if m.kind == "pipe" else Kind.DEVICE, meta, rdev=m.rdev)
            run.event("create", full, source=m.name)
            if m.kind in ("file", "pipe", "device"):
                image.set_meta(full, **{k: v for k, v in m.meta.items()})
        except VfsError as exc:
            run.error("extract", full, m.name, f"{full}: Cannot open: {exc.strerror or exc}")
    for full, m in delayed:
        try:
            image.set_meta(full, follow=True, **m.meta)
            run.event("chmod", full, source=m.name)
        except VfsError as exc:
            run.error("chmod", full, m.name, f"{full}: Cannot change mode: {exc.strerror or exc}")


def run_tar(run: Run) -> None:
    members = build_members(run.image, run.src)
    run.outcome.archive = archive_bytes(members)
    run.event("archive", run.src, detail=f"{len(members)} members")
    extract(run, members)
