import pytest
from hypothesis import given
from hypothesis import strategies as st

from collide.errors import (
    CollidesDifferingName,
    Exists,
    IsADirectory,
    LoopLimitExceeded,
    NotADirectory,
    NotEmpty,
    NotFound,
    VfsError,
)
from collide.tracer import detect, ingest
from collide.vfs import FsImage, Kind, Metadata, apply_delta, snapshot_diff


@pytest.fixture
def img():
    image = FsImage()
    image.mkdir("/", "ci", fold_flag=True, profile_id="ascii")
    image.mkdir("/", "cs")
    return image


def test_fold_flagged_lookup_keeps_first_spelling(img):
    img.create("/ci", "Foo", content=b"one")
    ino = img.create("/ci", "FOO", content=b"two")
    assert img.readdir("/ci") == ["Foo"]
    assert img.read("/ci/foo") == b"two"
    assert img.lookup("/ci/fOo") == ino
    img.check_invariants()


def test_case_sensitive_dir_keeps_both(img):
    img.create("/cs", "Foo", content=b"one")
    img.create("/cs", "FOO", content=b"two")
    assert sorted(img.readdir("/cs")) == ["FOO", "Foo"]


def test_exclusive_and_exclusive_name(img):
    img.create("/ci", "foo")
    with pytest.raises(Exists):
        img.create("/ci", "FOO", exclusive=True)
    with pytest.raises(CollidesDifferingName):
        img.create("/ci", "FOO", exclusive_name=True)
    img.create("/ci", "foo", exclusive_name=True, content=b"same spelling is fine")
    assert img.read("/ci/foo") == b"same spelling is fine"


def test_create_follows_final_symlink(img):
    img.mkdir("/", "outside")
    img.create("/outside", "target", content=b"orig")
    img.symlink("/ci", "link", "/outside/target")
    img.create("/ci", "LINK", content=b"through")
    assert img.read("/outside/target") == b"through"


def test_mkdir_over_existing_raises(img):
    img.create("/ci", "x")
    with pytest.raises(Exists):
        img.mkdir("/ci", "X")


def test_symlink_loop_is_reported(img):
    img.symlink("/ci", "a", "b")
    img.symlink("/ci", "b", "a")
    with pytest.raises(LoopLimitExceeded):
        img.stat("/ci/a")


def test_link_replace_keeps_stored_spelling(img):
    img.create("/ci", "zzz", content=b"foo")
    img.create("/ci", "hbar", content=b"bar")
    img.link("/ci/hbar", "/ci", "ZZZ")
    assert img.readdir("/ci") == ["zzz", "hbar"]
    assert img.read("/ci/zzz") == b"bar"
    assert img.stat("/ci/hbar").nlink == 2
    with pytest.raises(Exists):
        img.link("/ci/hbar", "/ci", "ZZZ", replace=False)
    img.check_invariants()


def test_rename_over_fold_equal_entry(img):
    img.create("/ci", "name", content=b"old")
    img.create("/cs", "NAME", content=b"new")
    img.rename("/cs/NAME", "/ci", "NAME")
    assert img.readdir("/ci") == ["name"]
    assert img.read("/ci/name") == b"new"
    img.check_invariants()


def test_rename_dir_errors(img):
    img.mkdir("/ci", "d")
    img.create("/ci/d", "child")
    img.create("/ci", "f")
    with pytest.raises(NotEmpty):
        img.rename("/ci/f", "/ci", "D")
    with pytest.raises(NotADirectory):
        img.rename("/ci/d", "/ci", "F")


def test_removal(img):
    img.mkdir("/ci", "d")
    img.create("/ci/d", "f")
    with pytest.raises(NotEmpty):
        img.rmdir("/ci/D")
    with pytest.raises(IsADirectory):
        img.unlink("/ci/d")
    img.remove_tree("/ci/D")
    assert img.readdir("/ci") == []
    with pytest.raises(NotFound):
        img.unlink("/ci/d")


def test_fold_flag_only_on_empty_dir(img):
    img.create("/cs", "x")
    with pytest.raises(VfsError):
        img.set_fold_flag("/cs")


def test_snapshot_diff_and_replay(img):
    before = img.copy()
    img.create("/ci", "new", content=b"n")
    img.set_meta("/ci", mode=0o700)
    img.mkdir("/", "extra")
    delta = snapshot_diff(before, img)
    assert set(delta.added) == {"/ci/new", "/extra"}
    assert "/ci" in delta.changed
    assert apply_delta(before.tree_view(), delta) == img.tree_view()
    assert snapshot_diff(img, img.copy()).is_empty()


def test_tracing_emits_create_and_use(img):
    sink = []
    with img.tracing(sink, "cp"):
        img.create("/ci", "root", content=b"x")
        img.create("/ci", "ROOT", content=b"y")
    table = ingest(sink)
    (v,) = detect(table, "ascii")
    assert (v.created_as, v.used_as) == ("/ci/root", "/ci/ROOT")


# --- properties -----------------------------------------------------------------

NAMES = ["a", "A", "b", "B", "ab", "Ab", "aB"]
DIRS = ["/ci", "/cs", "/ci/a", "/cs/a", "/ci/A"]

op = st.one_of(
    st.tuples(st.just("create"), st.sampled_from(DIRS), st.sampled_from(NAMES), st.binary(max_size=3)),
    st.tuples(st.just("mkdir"), st.sampled_from(DIRS), st.sampled_from(NAMES)),
    st.tuples(st.just("symlink"), st.sampled_from(DIRS), st.sampled_from(NAMES), st.sampled_from(DIRS)),
    st.tuples(st.just("link"), st.sampled_from(DIRS), st.sampled_from(NAMES), st.sampled_from(DIRS),
              st.sampled_from(NAMES), st.booleans()),
    st.tuples(st.just("unlink"), st.sampled_from(DIRS), st.sampled_from(NAMES)),
    st.tuples(st.just("rename"), st.sampled_from(DIRS), st.sampled_from(NAMES), st.sampled_from(DIRS),
              st.sampled_from(NAMES)),
    st.tuples(st.just("remove_tree"), st.sampled_from(DIRS), st.sampled_from(NAMES)),
)


def _apply(image: FsImage, ops) -> list[str]:
    given_names = []
    for o in ops:
        try:
            if o[0] == "create":
                image.create(o[1], o[2], content=o[3])
                given_names.append(o[2])
            elif o[0] == "mkdir":
                image.mkdir(o[1], o[2])
                given_names.append(o[2])
            elif o[0] == "symlink":
                image.symlink(o[1], o[2], o[3])
                given_names.append(o[2])
            elif o[0] == "link":
                image.link(f"{o[1]}/{o[2]}", o[3], o[4], replace=o[5])
                given_names.append(o[4])
            elif o[0] == "unlink":
                image.unlink(f"{o[1]}/{o[2]}")
            elif o[0] == "rename":
                image.rename(f"{o[1]}/{o[2]}", o[3], o[4])
                given_names.append(o[4])
            else:
                image.remove_tree(f"{o[1]}/{o[2]}")
        except (VfsError, ValueError):
            pass
        image.check_invariants()
    return given_names


def _fresh() -> FsImage:
    image = FsImage()
    image.mkdir("/", "ci", fold_flag=True, profile_id="ascii")
    image.mkdir("/", "cs")
    return image


@given(st.lists(op, max_size=25))
def test_invariants_hold_after_every_operation(ops):
    image = _fresh()
    given_names = set(_apply(image, ops)) | {"ci", "cs"}
    for path, node in image.walk("/"):
        if node.is_dir:
            assert set(image.readdir(path)) <= given_names


@given(st.lists(op, max_size=25))
def test_same_operations_give_identical_images(ops):
    a, b = _fresh(), _fresh()
    _apply(a, ops)
    _apply(b, ops)
    assert a.dump() == b.dump()


def test_metadata_defaults():
    assert Metadata().mode == 0o644
    image = FsImage()
    image.mkdir("/", "d")
    assert image.stat("/d").meta.mode == 0o755
    assert image.stat("/d").kind is Kind.DIRECTORY
