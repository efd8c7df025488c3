import gzip
import io
import itertools
import tarfile

import pytest
from hypothesis import given
from hypothesis import strategies as st

from collide import foldcore
from collide.casegen import fixture_httpd, get_case, materialize
from collide.errors import MalformedEntry, TruncatedArchive
from collide.refutils.tar import archive_bytes, build_members
from collide.scanner import (
    CAVEAT,
    Entry,
    ScanReport,
    expand_naive,
    leaf_groups,
    normalize_entry_path,
    parse_listing,
    parse_tar,
    scan_dir,
    scan_paths,
    scan_tar,
)
from collide.vfs import FsImage
from oracles import all_paths, brute_force_groups, vfs_expansion_loses


def _members(report):
    return sorted(sorted(g.paths) for g in report.groups)


name_st = st.text(alphabet="aAbBk", min_size=1, max_size=6)
path_st = st.lists(name_st, min_size=1, max_size=3).map("/".join)


@st.composite
def entry_lists(draw, max_size=50):
    paths = list(dict.fromkeys(draw(st.lists(path_st, max_size=max_size))))
    prefixes = {"/".join(p.split("/")[:i]) for p in paths for i in range(1, len(p.split("/")))}
    return [(p, "dir" if p in prefixes else draw(st.sampled_from(["file", "dir"]))) for p in paths]


# --- examples ---------------------------------------------------------------------


def test_git_hook_layout():
    report = scan_paths([("repo/A/post-checkout", "file"), ("repo/a", "symlink")], "ascii")
    (g,) = report.groups
    assert g.kind_pair == "symlink-dir"
    assert g.paths == ["repo/A", "repo/a"]
    assert g.parent == "repo"
    assert g.predicted_survivor == "repo/a"


def test_nested_merge_reports_both_levels():
    report = scan_paths([("src/topdir/secret", "symlink"), ("src/TOPDIR/secret/confidential", "file")], "ascii")
    assert [(g.paths, g.kind_pair) for g in report.groups] == [
        (["src/topdir", "src/TOPDIR"], "dir-dir"),
        (["src/topdir/secret", "src/TOPDIR/secret"], "symlink-dir"),
    ]
    assert [g.key for g in leaf_groups(report.groups)] == ["src/topdir/secret"]


def test_empty_and_unique():
    assert scan_paths([]).groups == []
    assert scan_paths(["a", "b", "c/d"]).groups == []


def test_identical_duplicates_are_not_collisions():
    report = scan_paths([("a", "file"), ("a", "dir")])
    assert report.groups == [] and report.issues


def test_profile_selection():
    assert scan_paths(["floß", "FLOSS"], "full-fold").groups
    assert not scan_paths(["floß", "FLOSS"], "simple-fold").groups


@pytest.mark.parametrize("bad", ["a/../b", "..", "a/./b", ""])
def test_malformed_entries(bad):
    with pytest.raises(MalformedEntry):
        normalize_entry_path(bad)
    assert scan_paths([bad, "x"]).issues
    with pytest.raises(MalformedEntry):
        scan_paths([bad], strict=True)


def test_normalization():
    assert normalize_entry_path("./a//b/") == "a/b"
    assert normalize_entry_path("/abs/p") == "abs/p"


def test_baseline_entries():
    report = scan_paths(["README"], baseline=["readme"])
    (g,) = report.groups
    assert [m.ordinal for m in g.members] == [-1, 0]
    assert g.predicted_survivor == "README"
    assert scan_paths(["x"], baseline=["a", "A"]).groups == []


def test_listing_parser():
    entries = parse_listing(["# comment", "a\tdir", "b/", "c\tsymlink", "d\tweird", ""])
    assert [(e.path, e.kind) for e in entries] == [("a", "dir"), ("b/", "dir"), ("c", "symlink"), ("d", "unknown")]


def test_report_json_roundtrip_and_schema():
    report = scan_paths([("foo", "file"), ("FOO", "pipe"), ("bar", "file")], "ascii")
    d = report.to_dict()
    assert d["caveat"] == CAVEAT
    assert d["unicode_version"] == foldcore.UNICODE_VERSION
    (g,) = d["groups"]
    assert set(g) >= {"parent", "members", "kind_pair", "predicted_survivor"}
    assert g["members"][0] == {"path": "foo", "kind": "file", "ordinal": 0}
    again = ScanReport.from_json(report.to_json())
    assert again.to_dict() == d


# --- directories and tar -------------------------------------------------------------


def test_scan_vfs_image_of_adversary_tree():
    image = FsImage()
    materialize(fixture_httpd(True), image)
    report = scan_dir(image, "/www", "ascii")
    assert _members(report) == [["HIDDEN", "hidden"], ["PROTECTED", "protected"],
                                ["PROTECTED/.htaccess", "protected/.htaccess"]]


def test_fold_flagged_image_is_clean():
    image = FsImage()
    image.mkdir("/", "d", fold_flag=True)
    image.create("/d", "a")
    image.create("/d", "A")
    assert scan_dir(image, "/d").groups == []


def test_scan_host_dir(tmp_path):
    (tmp_path / "foo").write_text("1")
    (tmp_path / "FOO").write_text("2")
    report = scan_dir(tmp_path)
    assert [g.kind_pair for g in report.groups] == ["file-file"]


def _tar(members) -> bytes:
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w", format=tarfile.PAX_FORMAT) as tf:
        for name, kind, extra in members:
            info = tarfile.TarInfo(name)
            info.type = kind
            if kind == tarfile.REGTYPE:
                info.size = len(extra)
                tf.addfile(info, io.BytesIO(extra))
            else:
                info.linkname = extra or ""
                tf.addfile(info)
    return buf.getvalue()


def test_tar_adversary_tree():
    image = FsImage()
    materialize(fixture_httpd(True), image)
    data = archive_bytes(build_members(image, "/www"))
    report = scan_tar(data, "ascii")
    dirs = [g for g in report.groups if g.kind_pair == "dir-dir"]
    assert sorted(sorted(g.paths) for g in dirs) == [["HIDDEN", "hidden"], ["PROTECTED", "protected"]]
    assert all("permissions" in g.predicted_effect for g in dirs)


def test_tar_pipe_case():
    image = FsImage()
    materialize(get_case("pipe-file-d2-tf"), image)
    report = scan_tar(archive_bytes(build_members(image, "/src")), "ascii")
    assert "pipe-file" in [g.kind_pair for g in report.groups]


def test_tar_long_names_and_compression():
    long = "d" * 120 + "/File"
    data = _tar([(long, tarfile.REGTYPE, b"x"), (long.lower(), tarfile.REGTYPE, b"y")])
    for blob in (data, gzip.compress(data)):
        listing = parse_tar(blob)
        assert [m.name for m in listing.members] == [long, long.lower()]
    assert len(scan_tar(gzip.compress(data), "ascii").groups) == 1


def test_tar_hardlinks_and_unsupported_types():
    data = _tar([("a", tarfile.REGTYPE, b"x"), ("B", tarfile.LNKTYPE, "a"), ("b", tarfile.REGTYPE, b""),
                 ("c", b"V", None)])
    report = scan_tar(data, "ascii")
    # "a" is a link target, so it counts as a hardlink too; "B" pairs with "b".
    assert [(g.paths, g.kind_pair) for g in report.groups] == [(["B", "b"], "hardlink-file")]
    assert any("unsupported" in i for i in report.issues)


def test_tar_unique_names():
    assert scan_tar(_tar([("a", tarfile.REGTYPE, b""), ("b", tarfile.DIRTYPE, None)])).groups == []


def test_truncated_tar():
    data = _tar([("a", tarfile.REGTYPE, b"x" * 2000)])
    with pytest.raises(TruncatedArchive):
        parse_tar(data[:1024])
    with pytest.raises(TruncatedArchive):
        parse_tar(b"")
    with pytest.raises(TruncatedArchive):
        parse_tar(gzip.compress(data)[:40])


def test_parser_agrees_with_tarfile():
    image = FsImage()
    materialize(get_case("hlink-hlink-d2-tf"), image)
    data = archive_bytes(build_members(image, "/src"))
    ours = [(m.name.rstrip("/"), m.kind, m.linkname) for m in parse_tar(data).members]
    kinds = {tarfile.REGTYPE: "file", tarfile.LNKTYPE: "hardlink", tarfile.SYMTYPE: "symlink",
             tarfile.DIRTYPE: "dir", tarfile.FIFOTYPE: "pipe", tarfile.CHRTYPE: "device"}
    with tarfile.open(fileobj=io.BytesIO(data)) as tf:
        theirs = [(m.name, kinds[m.type], m.linkname) for m in tf.getmembers()]
    assert ours == theirs


# --- properties ---------------------------------------------------------------------


@given(entry_lists(max_size=20))
def test_group_count_matches_brute_force(entries):
    for prof in ("ascii", "full-fold"):
        assert len(scan_paths(entries, prof).groups) == brute_force_groups([p for p, _ in entries], prof)


@given(entry_lists(max_size=20))
def test_scanner_agrees_with_expansion(entries):
    for prof in ("ascii", "full-fold"):
        found = bool(scan_paths(entries, prof).groups)
        assert found == vfs_expansion_loses(entries, prof)
        naive = expand_naive(entries, prof)
        assert found == (len(naive) < len(all_paths([p for p, _ in entries])))


@given(entry_lists(max_size=15))
def test_profile_monotonicity(entries):
    def pairs(prof):
        return {frozenset(c) for g in scan_paths(entries, prof).groups for c in itertools.combinations(g.paths, 2)}

    assert pairs("ascii") <= pairs("simple-fold") <= pairs("full-fold")


@given(entry_lists(max_size=15), st.randoms())
def test_membership_ignores_order(entries, rnd):
    shuffled = list(entries)
    rnd.shuffle(shuffled)
    assert _members(scan_paths(entries)) == _members(scan_paths(shuffled))


def test_entry_objects_keep_their_ordinals():
    report = scan_paths([Entry("a", "file", 7), Entry("A", "file", 3)])
    assert report.groups[0].predicted_survivor == "a"
    assert report.groups[0].first_ordinal == 3
