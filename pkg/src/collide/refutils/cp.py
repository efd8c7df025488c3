"""GNU coreutils cp model, ``cp -a src/ dst/`` and ``cp -a src/* dst/``.

cp remembers every destination inode it created during one invocation and
refuses to overwrite one of those with another source ("will not overwrite
just-created"). With ``src/*`` the shell expands one argument per top-level
entry (sorted) and the check is scoped to each argument, so a later argument
can land on an entry an earlier argument created. Existing files are opened
and written in place, following symlinks.
"""

from __future__ import annotations

from ..errors import VfsError
from ..vfs import FsNode, Kind, Metadata
from .common import Run, meta_fields, source_entries, split_dst


class _Copier:
    def __init__(self, run: Run):
        self.run = run
        self.image = run.image
        self.links: dict[int, str] = {}  # source inode -> destination path, kept across arguments
        self.created: set[int] = set()

    def copy(self, rel: str, node: FsNode, children: list) -> None:
        run, image = self.run, self.image
        full, parent, name = split_dst(run.dst, rel)
        existing = image.lstat(full)
        if existing is not None and existing.inode in self.created:
            run.error("copy", full, rel, f"will not overwrite just-created '{full}' with '{run.src}/{rel}'")
            return
        try:
            if node.is_dir:
                self._dir(rel, node, children, full, parent, name, existing)
            elif node.kind is Kind.FILE:
                self._file(rel, node, full, parent, name, existing)
            else:
                self._special(rel, node, full, parent, name, existing)
        except VfsError as exc:
            run.error("copy", full, rel, f"cannot create '{full}': {exc.strerror or exc}")

    def _dir(self, rel, node, children, full, parent, name, existing) -> None:
        run, image = self.run, self.image
        if existing is not None and not existing.is_dir:
            run.error("mkdir", full, rel, f"cannot overwrite non-directory '{full}' with directory '{run.src}/{rel}'")
            return
        if existing is None:
            ino = image.mkdir(parent, name, Metadata(mode=0o700))
            self.created.add(ino)
            run.event("mkdir", full, source=rel)
        for child_rel, child, grand in children:
            self.copy(child_rel, child, grand)
        image.set_meta(full, **meta_fields(node))
        run.event("chmod", full, source=rel)

    def _file(self, rel, node, full, parent, name, existing) -> None:
        run, image = self.run, self.image
        if existing is not None and existing.is_dir:
            run.error("copy", full, rel, f"cannot overwrite directory '{full}' with non-directory")
            return
        if node.nlink > 1 and node.inode in self.links:
            if existing is not None:
                image.unlink(full)
            ino = image.link(self.links[node.inode], parent, name, replace=False)
            self.created.add(ino)
            run.event("link", full, source=rel)
            return
        if existing is not None:
            # open(O_WRONLY|O_TRUNC) follows a symlink and writes into a pipe.
            ino = image.create(parent, name, Kind.FILE, content=node.data)
            image.set_meta(full, follow=True, **meta_fields(node))
            run.event("write", full, source=rel, detail="existing destination")
        else:
            ino = image.create(parent, name, Kind.FILE, Metadata(**meta_fields(node)),
                               exclusive=True, content=node.data)
            self.created.add(ino)
            run.event("create", full, source=rel)
        if node.nlink > 1:
            self.links[node.inode] = full

    def _special(self, rel, node, full, parent, name, existing) -> None:
        run, image = self.run, self.image
        if existing is not None:
            if existing.is_dir:
                run.error("copy", full, rel, f"cannot overwrite directory '{full}' with non-directory")
                return
            image.unlink(full)
        meta = Metadata(**meta_fields(node))
        if node.kind is Kind.SYMLINK:
            ino = image.symlink(parent, name, node.target, meta)
        else:
            ino = image.mknod(parent, name, node.kind, meta, rdev=node.rdev)
        self.created.add(ino)
        run.event("create", full, source=rel)


def _tree(entries) -> list:
    """Nest a pre-order listing into (rel, node, children) triples."""
    root: list = []
    stack: list[tuple[str, list]] = [("", root)]
    for e in entries:
        while stack[-1][0] and not e.rel.startswith(stack[-1][0] + "/"):
            stack.pop()
        children: list = []
        stack[-1][1].append((e.rel, e.node, children))
        if e.node.is_dir:
            stack.append((e.rel, children))
    return root


def run_cp(run: Run, *, star: bool = False) -> None:
    top = _tree(source_entries(run.image, run.src))
    copier = _Copier(run)
    if star:
        # The shell sorts the glob expansion; each argument is its own copy.
        top.sort(key=lambda t: t[0].encode("utf-8", "surrogateescape"))
        for rel, node, children in top:
            copier.created = set()
            copier.copy(rel, node, children)
    else:
        for rel, node, children in top:
            copier.copy(rel, node, children)
