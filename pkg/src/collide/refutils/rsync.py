"""rsync model, ``rsync -aH src/ dst/``.

The file list is sorted bytewise. A generator pass creates directories,
symlinks and special files and queues regular files; a receiver pass writes
each queued file to a temporary name and renames it into place; a final pass
hard-links the remaining members of each link group to the group's leader.

The generator checks an existing directory with stat(), which follows
symlinks, so a symlink that already sits where a directory belongs is kept
and everything below it is written through the link.
"""

from __future__ import annotations

from ..errors import VfsError
from ..vfs import Kind, Metadata, join_path
from .common import Run, SourceEntry, meta_fields, source_entries, split_dst


def _tmp_name(name: str, counter: int) -> str:
    return f".{name}.{counter:06d}"


def run_rsync(run: Run) -> None:
    image = run.image
    entries = source_entries(image, run.src, sort=True)

    # -H: group regular files by source inode; the last listed member leads.
    groups: dict[int, list[SourceEntry]] = {}
    for e in entries:
        if e.kind is Kind.FILE and e.node.nlink > 1:
            groups.setdefault(e.node.inode, []).append(e)
    leader = {ino: members[-1] for ino, members in groups.items() if len(members) > 1}

    queued: list[SourceEntry] = []
    followers: list[SourceEntry] = []
    for e in entries:
        full, parent, name = split_dst(run.dst, e.rel)
        try:
            if e.kind is Kind.DIRECTORY:
                _generate_dir(run, e, full, parent, name)
            elif e.kind is Kind.FILE:
                lead = leader.get(e.node.inode)
                (followers if lead is not None and lead is not e else queued).append(e)
            else:
                _generate_other(run, e, full, parent, name)
        except VfsError as exc:
            run.error("generate", full, e.rel, f"{e.rel}: {exc.strerror or exc}")

    done: dict[int, str] = {}
    for counter, e in enumerate(queued, 1):
        full, parent, name = split_dst(run.dst, e.rel)
        try:
            _receive(run, e, full, parent, name, counter)
            done[e.node.inode] = full
        except VfsError as exc:
            run.error("receive", full, e.rel, f"{e.rel}: {exc.strerror or exc}")

    for e in followers:
        full, parent, name = split_dst(run.dst, e.rel)
        lead_path = done.get(e.node.inode)
        if lead_path is None:
            run.error("link", full, e.rel, f"{e.rel}: link leader was not transferred")
            continue
        try:
            image.link(lead_path, parent, name, replace=True)
            run.event("link", full, source=e.rel)
        except VfsError as exc:
            run.error("link", full, e.rel, f"link {full} => {lead_path}: {exc.strerror or exc}")


def _generate_dir(run: Run, e: SourceEntry, full: str, parent: str, name: str) -> None:
    image = run.image
    meta = meta_fields(e.node)
    res = image.resolve(full, follow=True)
    st = None if res is None or res.inode is None else image.stat(full, follow=True)
    if st is not None and st.is_dir:
        image.set_meta(full, follow=True, **meta)
        run.event("chmod", full, source=e.rel, detail="existing directory")
        return
    if image.lstat(full) is not None:
        image.remove_tree(full)
        run.event("delete", full, source=e.rel)
    image.mkdir(parent, name, Metadata(**meta))
    run.event("mkdir", full, source=e.rel)


def _matches(existing, node) -> bool:
    if existing.kind is not node.kind:
        return False
    if node.kind is Kind.SYMLINK:
        return existing.target == node.target
    return existing.rdev == node.rdev


def _generate_other(run: Run, e: SourceEntry, full: str, parent: str, name: str) -> None:
    image = run.image
    node = e.node
    existing = image.lstat(full)
    if existing is not None:
        if _matches(existing, node):
            image.set_meta(full, **meta_fields(node))
            return
        image.remove_tree(full)
        run.event("delete", full, source=e.rel)
    meta = Metadata(**meta_fields(node))
    if node.kind is Kind.SYMLINK:
        image.symlink(parent, name, node.target, meta)
    else:
        image.mknod(parent, name, node.kind, meta, rdev=node.rdev)
    run.event("create", full, source=e.rel)


def _receive(run: Run, e: SourceEntry, full: str, parent: str, name: str, counter: int) -> None:
    image = run.image
    node = e.node
    existing = image.lstat(full)
    if existing is not None and existing.kind in (Kind.PIPE, Kind.DEVICE):
        # A special file in place of a regular one is opened and written as is.
        image.write(full, node.data, follow=False)
        image.set_meta(full, **meta_fields(node))
        run.event("write", full, source=e.rel, detail="existing special file")
        return
    if existing is not None and existing.is_dir:
        run.error("receive", full, e.rel, f"cannot replace directory {full} with a file")
        return
    real_parent = image.resolve(parent, follow=True)
    if real_parent is None or real_parent.inode is None:
        run.error("receive", full, e.rel, f"mkstemp {full} failed: No such file or directory")
        return
    tmp = _tmp_name(name, counter)
    image.create(parent, tmp, Kind.FILE, Metadata(**meta_fields(node)), exclusive=True, content=node.data)
    image.rename(join_path(parent, tmp), parent, name)
    run.event("create", full, source=e.rel)
