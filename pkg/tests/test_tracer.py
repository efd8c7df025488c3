from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from collide.casegen import generate_matrix
from collide.harness import prepare_image
from collide.refutils import run_model
from collide.tracer import (
    TraceRecord,
    adapt_auditd,
    detect,
    ingest,
    render_violation,
    violations_from_json,
    violations_to_json,
)

GOLDEN = Path(__file__).parent / "golden"


def rec(seq, op, path, inode=1, *, syscall="openat", pid=10, device="00:39", dirfd=None, outcome="success",
        program="cp"):
    return TraceRecord(seq, op, syscall, program, pid, device, inode, path, dirfd, outcome)


def test_golden_violation_block():
    table = ingest(GOLDEN.joinpath("violation_trace.tsv").read_text().splitlines())
    (v,) = detect(table, "ascii")
    assert v.resource == ("00:39", 2389)
    assert render_violation(v) == GOLDEN.joinpath("violation_block.txt").read_text()


def test_consistent_case_is_clean():
    assert detect(ingest([rec(1, "create", "/d/root"), rec(2, "use", "/d/root")])) == []


def test_empty_trace():
    assert detect(ingest([])) == []


def test_failed_records_are_ignored():
    table = ingest([rec(1, "create", "/d/root", outcome="failure"), rec(2, "use", "/d/ROOT")])
    assert detect(table) == []
    table = ingest([rec(1, "create", "/d/root"), rec(2, "use", "/d/ROOT", outcome="failure")])
    assert detect(table) == []


def test_directory_component_spelling_is_checked():
    table = ingest([rec(1, "create", "/d/Sub/f"), rec(2, "use", "/d/sub/f")])
    (v,) = detect(table)
    assert (v.created_as, v.used_as) == ("/d/Sub/f", "/d/sub/f")


def test_delete_and_replace():
    table = ingest([rec(1, "create", "/d/a/x", 5), rec(2, "delete", "/d/a/x", 5, syscall="unlinkat"),
                    rec(3, "create", "/d/A/x", 6)])
    (v,) = detect(table)
    assert v.kind == "delete-and-replace"
    assert render_violation(v).startswith("REPLACE [msg=3,'cp'.openat] 00:39|6| /d/A/x\n")


def test_delete_then_same_spelling_is_clean():
    table = ingest([rec(1, "create", "/d/x", 5), rec(2, "delete", "/d/x", 5), rec(3, "create", "/d/x", 6)])
    assert detect(table) == []


def test_rename_updates_spelling():
    table = ingest([rec(1, "create", "/d/tmp1", 5), rec(2, "rename", "/d/Final", 5), rec(3, "use", "/d/Final", 5)])
    assert detect(table) == []


def test_hardlink_spellings_are_all_accepted():
    table = ingest([rec(1, "create", "/d/a", 5), rec(2, "create", "/d/B", 5, syscall="link"),
                    rec(3, "use", "/d/a", 5), rec(4, "use", "/d/B", 5)])
    assert detect(table) == []


def test_dirfd_resolution_and_unknown_fd():
    table = ingest([
        rec(1, "opendir", "/d/Dir", 0, dirfd=3),
        rec(2, "create", "x", 7, dirfd=3),
        rec(3, "use", "/d/DIR/x", 7),
        rec(4, "use", "y", 8, dirfd=9),
    ])
    assert table.unresolved_dirfd == 1
    (v,) = detect(table)
    assert v.created_as == "/d/Dir/x"


def test_parse_errors_are_counted_not_fatal():
    lines = ["garbage", "1\tcreate\topenat\tcp\t1\t00:39\t5\t/d/a\t-\tsuccess", "2\tbogus\tx\tcp\t1\t0\t5\t/a\t-\tsuccess"]
    table = ingest(lines)
    assert len(table.records) == 1 and len(table.parse_errors) == 2


def test_device_filter():
    table = ingest([rec(1, "create", "/d/root"), rec(2, "use", "/d/ROOT")])
    assert detect(table, device_filter=["00:01"]) == []
    assert len(detect(table, device_filter=["00:39"])) == 1


def test_unicode_path_is_verbatim():
    table = ingest([rec(1, "create", "/d/straße"), rec(2, "use", "/d/STRASSE")])
    (v,) = detect(table, "full-fold")
    assert render_violation(v).splitlines()[0].endswith("| /d/STRASSE")
    assert "/d/straße" in render_violation(v)


def test_json_roundtrip():
    table = ingest(GOLDEN.joinpath("violation_trace.tsv").read_text().splitlines())
    violations = detect(table)
    assert violations_from_json(violations_to_json(violations)) == violations


def test_record_line_roundtrip():
    r = rec(7, "use", "/a b/c", dirfd=4)
    assert TraceRecord.from_line(r.to_line()) == r


def test_auditd_adapter():
    raw = [
        'type=SYSCALL msg=audit(1700000000.123:101): arch=c000003e syscall=257 success=yes exit=3 pid=42 comm="cp" exe="/usr/bin/cp"',
        'type=CWD msg=audit(1700000000.123:101): cwd="/mnt/folding"',
        'type=PATH msg=audit(1700000000.123:101): item=0 name="dst/" inode=2 dev=00:39 nametype=PARENT',
        'type=PATH msg=audit(1700000000.123:101): item=1 name="dst/root" inode=2389 dev=00:39 nametype=CREATE',
        'type=SYSCALL msg=audit(1700000000.456:102): arch=c000003e syscall=257 success=yes exit=3 pid=42 comm="cp"',
        'type=PATH msg=audit(1700000000.456:102): item=0 name="/mnt/folding/dst/ROOT" inode=2389 dev=00:39 nametype=NORMAL',
    ]
    lines = list(adapt_auditd(raw))
    assert len(lines) == 2
    (v,) = detect(ingest(lines))
    assert (v.created_as, v.used_as) == ("/mnt/folding/dst/root", "/mnt/folding/dst/ROOT")


# --- end to end with the models ------------------------------------------------------


@pytest.mark.parametrize("utility", ["tar", "cp", "cp_star", "rsync"])
def test_model_traces_flag_collisions_only(utility):
    for tc in generate_matrix():
        outcome = run_model(utility, prepare_image(tc), trace=True)
        assert detect(ingest(outcome.trace)), tc.id
    for tc in generate_matrix(control=True):
        outcome = run_model(utility, prepare_image(tc), trace=True)
        assert detect(ingest(outcome.trace)) == [], tc.id


# --- properties -----------------------------------------------------------------------

names = st.sampled_from(["a", "b", "Ab", "c", "D"])


@st.composite
def consistent_traces(draw):
    """Random create/use/delete/rename sequences that always reuse each
    inode's current spelling."""
    live: dict[int, str] = {}
    records, seq, next_ino = [], 0, 1
    for _ in range(draw(st.integers(0, 40))):
        seq += 1
        action = draw(st.sampled_from(["create", "use", "delete", "rename"]))
        pid = draw(st.integers(1, 3))
        if action == "create" or not live:
            path = "/m/" + "/".join(draw(st.lists(names, min_size=1, max_size=3)))
            if path in live.values():
                continue
            live[next_ino] = path
            records.append(rec(seq, "create", path, next_ino, pid=pid))
            next_ino += 1
            continue
        ino = draw(st.sampled_from(sorted(live)))
        if action == "use":
            records.append(rec(seq, "use", live[ino], ino, pid=pid))
        elif action == "delete":
            records.append(rec(seq, "delete", live.pop(ino), ino, pid=pid))
        else:
            new = live[ino] + "_r" + str(seq)
            live[ino] = new
            records.append(rec(seq, "rename", new, ino, pid=pid))
    return records


@given(consistent_traces())
def test_no_false_positives_on_consistent_traces(records):
    assert detect(ingest(records)) == []


@st.composite
def mixed_traces(draw):
    records = []
    for seq in range(1, draw(st.integers(1, 30)) + 1):
        op = draw(st.sampled_from(["create", "use", "use", "delete"]))
        path = "/m/" + draw(st.sampled_from(["x", "X", "y", "Y", "Z/x", "z/x"]))
        records.append(rec(seq, op, path, draw(st.integers(1, 4)), pid=draw(st.integers(1, 3))))
    return records


@given(mixed_traces())
def test_filtering_to_one_inode_keeps_its_use_violations(records):
    full = detect(ingest(records))
    for ino in {r.inode for r in records}:
        alone = detect(ingest([r for r in records if r.inode == ino]))
        uses = lambda vs: [v for v in vs if v.kind == "case-inconsistent-use" and v.resource[1] == ino]  # noqa: E731
        assert uses(full) == uses(alone)
