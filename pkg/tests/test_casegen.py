import os
import stat

import pytest

from collide import casegen
from collide.casegen import (
    FIXTURES,
    MATRIX_ROWS,
    Order,
    ResourceKind,
    TestCase,
    build_case,
    control_for,
    generate_matrix,
    get_case,
    materialize,
)
from collide.errors import DestNotEmpty
from collide.scanner import scan_paths, walk_entries
from collide.vfs import FsImage, Kind

MATRIX = generate_matrix()
CONTROLS = generate_matrix(control=True)


def test_matrix_shape():
    assert len(MATRIX) == 28 and len(CONTROLS) == 28
    ids = [tc.id for tc in MATRIX + CONTROLS]
    assert len(set(ids)) == len(ids)
    assert {tc.depth for tc in MATRIX} == {1, 2}
    assert {tc.order for tc in MATRIX} == {Order.TARGET_FIRST, Order.SOURCE_FIRST}
    assert len(MATRIX_ROWS) == 7


@pytest.mark.parametrize("tc", MATRIX, ids=lambda tc: tc.id)
def test_every_case_collides_in_the_scanner(tc):
    image = FsImage()
    materialize(tc, image)
    groups = scan_paths(walk_entries(image, "/src"), "ascii").groups
    assert groups, tc.id
    assert any(tc.target_path.partition("/")[2] in g.paths for g in groups)


@pytest.mark.parametrize("tc", CONTROLS, ids=lambda tc: tc.id)
def test_controls_have_no_collisions(tc):
    image = FsImage()
    materialize(tc, image)
    assert scan_paths(walk_entries(image, "/"), "full-fold").groups == []


def test_build_order_is_respected():
    row = casegen.ROW_BY_TOKEN["file-file"]
    tf, sf = build_case(row, Order.TARGET_FIRST, 1), build_case(row, Order.SOURCE_FIRST, 1)
    # The first-built entry plays the role named by the order.
    assert [s.content for s in tf.tree if s.kind == "file"] == [b"target", b"source"]
    assert [s.content for s in sf.tree if s.kind == "file"] == [b"source", b"target"]
    assert tf.tree[1].path == tf.target_path and sf.tree[1].path == sf.source_path


def test_roles_are_distinguishable():
    tc = get_case("file-file-d1-tf")
    image = FsImage()
    materialize(tc, image)
    t, s = image.stat("/src/foo"), image.stat("/src/FOO")
    assert (t.data, s.data) == (b"target", b"source")
    assert (t.meta.mode, s.meta.mode) == (0o600, 0o644)
    assert (t.meta.uid, s.meta.uid) == (0, 1000)


def test_hardlink_partner_row():
    image = FsImage()
    materialize(FIXTURES["hardlink-pair"](), image)
    assert image.stat("/src/hbar").inode == image.stat("/src/ZZZ").inode
    assert image.stat("/src/hfoo").inode == image.stat("/src/zzz").inode
    assert image.read("/src/zzz") == b"foo"


def test_symlink_cases_point_outside_the_source():
    image = FsImage()
    materialize(get_case("symd-dir-d1-tf"), image)
    link = image.lstat("/src/foo")
    assert link.kind is Kind.SYMLINK
    assert image.stat("/src/foo").is_dir


def test_json_roundtrip():
    for tc in MATRIX + CONTROLS + [make() for make in FIXTURES.values()]:
        assert TestCase.from_dict(tc.to_dict()) == tc


def test_control_for_matches_shape():
    tc = get_case("pipe-file-d2-sf")
    ctl = control_for(tc)
    assert ctl.id == "pipe-file-d2-sf-ctl"
    assert (ctl.target_kind, ctl.source_kind, ctl.depth) == (ResourceKind.PIPE, ResourceKind.FILE, 2)


def test_unknown_case():
    with pytest.raises(KeyError):
        get_case("nope")


def test_materialize_refuses_non_empty(tmp_path):
    (tmp_path / "x").write_text("")
    with pytest.raises(DestNotEmpty):
        materialize(MATRIX[0], tmp_path)
    image = FsImage()
    image.mkdir("/", "x")
    with pytest.raises(DestNotEmpty):
        materialize(MATRIX[0], image)


def test_materialize_on_host(tmp_path):
    tc = get_case("pipe-file-d2-tf")
    report = materialize(tc, tmp_path)
    assert report.created
    assert stat.S_ISFIFO(os.lstat(tmp_path / "src/dir/foo").st_mode)
    assert (tmp_path / "src/DIR/foo").read_bytes() == b"source"


def test_host_symlinks_stay_inside(tmp_path):
    materialize(get_case("symf-file-d1-tf"), tmp_path)
    target = os.readlink(tmp_path / "src/foo")
    assert not target.startswith("/")
    assert (tmp_path / "src/foo").resolve().is_relative_to(tmp_path.resolve())


def test_failed_host_build_leaves_dest_empty(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise OSError("mkfifo failed")

    monkeypatch.setattr(casegen.os, "mkfifo", boom)
    with pytest.raises(OSError):
        materialize(get_case("pipe-file-d2-tf"), tmp_path)
    assert list(tmp_path.iterdir()) == []


def test_failed_image_build_leaves_image_untouched(monkeypatch):
    image = FsImage()
    before = image.dump()

    def boom(*args, **kwargs):
        raise OSError("no")

    monkeypatch.setattr(FsImage, "mknod", boom)
    with pytest.raises(OSError):
        materialize(get_case("pipe-file-d1-tf"), image)
    assert image.dump() == before


def test_probe_on_case_sensitive_tmp(tmp_path):
    assert casegen.probe_case_insensitive(tmp_path) is False
