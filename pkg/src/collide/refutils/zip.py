"""Info-ZIP model: ``zip -r --symlinks a.zip .`` then ``unzip a.zip -d dst``.

zip has no way to store pipes or devices (they are skipped) and no notion of
hard links (each path becomes an independent regular file). unzip asks before
replacing an existing file or symlink; answers come from a prompt script.
Without a script, the first prompt raises PromptRequired. When a directory
entry lands on an existing symlink, unzip's directory
creation loop never terminates; the model stops it after a step limit.
"""

from __future__ import annotations

import io
import stat
import zipfile
from dataclasses import dataclass, field

from ..errors import PromptRequired, VfsError
from ..vfs import Kind, Metadata, join_path
from .common import DEGRADE, PROMPT, SKIP, STEP_LIMIT, STEP_LIMIT_HIT, Run, meta_fields, source_entries, split_dst

PROMPT_TEXT = "replace {path}? [y]es, [n]o, [A]ll, [N]one, [r]ename: "
ANSWERS = {"y": "overwrite", "yes": "overwrite", "overwrite": "overwrite", "n": "skip", "no": "skip",
           "skip": "skip", "r": "rename", "rename": "rename", "abort": "abort", "q": "abort",
           "A": "all", "all": "all", "N": "none", "none": "none"}


@dataclass(frozen=True)
class ZipMember:
    name: str
    kind: str  # file | dir | symlink
    meta: dict = field(hash=False, compare=False)
    data: bytes = b""


def build_members(run: Run) -> list[ZipMember]:
    members = []
    for entry in source_entries(run.image, run.src):
        node = entry.node
        if node.kind in (Kind.PIPE, Kind.DEVICE):
            run.event("archive", entry.rel, SKIP, entry.rel, f"zip warning: ignoring special file {entry.rel}")
            continue
        meta = meta_fields(node)
        if node.kind is Kind.DIRECTORY:
            members.append(ZipMember(entry.rel, "dir", meta))
        elif node.kind is Kind.SYMLINK:
            members.append(ZipMember(entry.rel, "symlink", meta, node.target.encode()))
        else:
            if node.nlink > 1:
                run.event("archive", entry.rel, DEGRADE, entry.rel, "hard link stored as an independent file")
            members.append(ZipMember(entry.rel, "file", meta, node.data))
    return members


def archive_bytes(members: list[ZipMember]) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for m in members:
            name = m.name + "/" if m.kind == "dir" else m.name
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            ftype = {"dir": stat.S_IFDIR, "symlink": stat.S_IFLNK, "file": stat.S_IFREG}[m.kind]
            info.external_attr = (ftype | m.meta["mode"]) << 16
            info.create_system = 3
            zf.writestr(info, m.data)
    return buf.getvalue()


class _Prompts:
    """Scripted answers. A plain string answers every prompt the same way."""

    def __init__(self, script):
        self.sticky: str | None = None
        if isinstance(script, str):
            self.script: list | None = [script]
            self.sticky = self._parse(script)
        else:
            self.script = None if script is None else list(script)

    @staticmethod
    def _parse(raw) -> str:
        word, _, arg = str(raw).partition(":")
        choice = ANSWERS.get(word.strip())
        if choice is None:
            raise PromptRequired(f"unrecognized scripted answer {raw!r}")
        if choice in ("all", "none"):
            choice = "overwrite" if choice == "all" else "skip"
        return f"rename:{arg}" if choice == "rename" else choice

    def answer(self, run: Run, path: str, source: str) -> str:
        run.event("prompt", path, PROMPT, source, PROMPT_TEXT.format(path=path))
        run.outcome.terminated = PROMPT
        if self.sticky:
            return self.sticky
        if not self.script:
            raise PromptRequired(f"unzip asked {PROMPT_TEXT.format(path=path)!r} and no scripted answer is left")
        raw = self.script.pop(0)
        choice = self._parse(raw)
        if str(raw).partition(":")[0] in ("A", "all", "N", "none"):
            self.sticky = choice
        return choice


def _make_dir(run: Run, m: ZipMember, full: str, parent: str, name: str) -> bool:
    """mkdir with unzip's retry loop; False when it gave up."""
    image = run.image
    node = image.lstat(full)
    for _ in range(STEP_LIMIT):
        if node is None:
            image.mkdir(parent, name, Metadata(mode=0o700))
            run.event("mkdir", full, source=m.name)
            return True
        if node.is_dir:
            return True
        if node.kind is not Kind.SYMLINK:
            run.error("mkdir", full, m.name, f"checkdir error: {full} exists but is not directory")
            return False
        # An existing symlink: the stat/mkdir pair disagrees forever. Later
        # probes are not traced to keep traces small.
        res = image.resolve(full)
        node = None if res is None or res.inode is None else image.nodes[res.inode]
    run.event("mkdir", full, STEP_LIMIT_HIT, m.name, f"gave up after {STEP_LIMIT} steps")
    run.outcome.terminated = STEP_LIMIT_HIT
    return False


def extract(run: Run, members: list[ZipMember], prompt_script) -> None:
    image = run.image
    prompts = _Prompts(prompt_script)
    dirs: list[tuple[str, ZipMember]] = []
    for m in members:
        full, parent, name = split_dst(run.dst, m.name)
        try:
            if m.kind == "dir":
                if not _make_dir(run, m, full, parent, name):
                    if run.outcome.terminated == STEP_LIMIT_HIT:
                        return
                    continue
                dirs.append((full, m))
                continue
            existing = image.lstat(full)
            if existing is not None:
                choice = prompts.answer(run, full, m.name)
                if choice == "abort":
                    return
                if choice == "skip":
                    run.event("prompt-answer", full, source=m.name, detail="skip")
                    continue
                if choice.startswith("rename:"):
                    name = choice.partition(":")[2] or f"{name}.1"
                    full = join_path(parent, name)
                elif existing.is_dir:
                    run.error("create", full, m.name, f"error: cannot create {full}: Is a directory")
                    continue
                else:
                    image.unlink(full)
            meta = Metadata(**m.meta)
            if m.kind == "symlink":
                image.symlink(parent, name, m.data.decode(), meta)
            else:
                image.create(parent, name, Kind.FILE, meta, exclusive=True, content=m.data)
            run.event("create", full, source=m.name)
        except VfsError as exc:
            run.error("extract", full, m.name, f"error: cannot create {full}: {exc.strerror or exc}")
    for full, m in dirs:
        image.set_meta(full, follow=True, mode=m.meta["mode"], uid=m.meta["uid"], gid=m.meta["gid"])
        run.event("chmod", full, source=m.name)


def run_zip(run: Run, prompt_script=None) -> None:
    members = build_members(run)
    run.outcome.archive = archive_bytes(members)
    run.event("archive", run.src, detail=f"{len(members)} members")
    extract(run, members, prompt_script)
