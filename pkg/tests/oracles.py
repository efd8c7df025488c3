"""Independent reference implementations the scanner is checked against."""

import itertools

from collide import foldcore
from collide.errors import VfsError
from collide.vfs import FsImage


def all_paths(paths):
    out = set()
    for p in paths:
        comps = p.split("/")
        out.update("/".join(comps[:i]) for i in range(1, len(comps) + 1))
    return out


def brute_force_groups(paths, profile) -> int:
    """Count classes of distinct raw paths (ancestors included) whose full
    component lists fold equal, by comparing every pair."""
    nodes = sorted(all_paths(paths))
    parent = {p: p for p in nodes}

    def find(p):
        while parent[p] != p:
            p = parent[p]
        return p

    for a, b in itertools.combinations(nodes, 2):
        ca, cb = a.split("/"), b.split("/")
        if len(ca) == len(cb) and all(foldcore.fold_text(x, profile) == foldcore.fold_text(y, profile)
                                      for x, y in zip(ca, cb)):
            parent[find(a)] = find(b)
    sizes = {}
    for p in nodes:
        sizes[find(p)] = sizes.get(find(p), 0) + 1
    return sum(1 for n in sizes.values() if n > 1)


def vfs_expansion_loses(entries, profile) -> bool:
    """Expand into a fold-flagged vfs directory and into a plain one; report
    whether the folded tree lost a node or resolved an entry elsewhere."""
    results = []
    for fold in (False, True):
        image = FsImage()
        image.mkdir("/", "x", fold_flag=fold, profile_id=profile if fold else None)
        where, failed = {}, False
        for path, kind in entries:
            full = "/x/" + path
            parent, _, name = full.rpartition("/")
            try:
                image.makedirs(parent)
                if kind == "dir":
                    if image.lstat(full) is None:
                        image.mkdir(parent, name)
                else:
                    image.create(parent, name, content=path.encode())
                where[path] = image.lookup(full)
            except VfsError:
                failed = True
        leaves = sum(1 for _ in image.walk("/x"))
        results.append((where, failed, leaves))
    (cs_where, _, cs_leaves), (ci_where, ci_failed, ci_leaves) = results
    if ci_failed or ci_leaves < cs_leaves:
        return True
    # Same node reached from two raw paths that were distinct when case-sensitive.
    inverse = {}
    for path, ino in ci_where.items():
        inverse.setdefault(ino, set()).add(cs_where[path])
    return any(len(v) > 1 for v in inverse.values())
