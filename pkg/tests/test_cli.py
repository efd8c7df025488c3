import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from collide import cli
from collide.casegen import TestCase, get_case
from collide.scanner import ScanReport
from collide.tracer import Violation

GOLDEN = Path(__file__).parent / "golden"


def run(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out=out)
    return code, out.getvalue()


def epilog_examples():
    lines = cli.EPILOG.splitlines()
    examples, i = [], 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("$ collide "):
            expected = []
            i += 1
            while i < len(lines) and lines[i].strip() and not lines[i].strip().startswith("$ "):
                expected.append(lines[i].strip())
                i += 1
            examples.append((line[len("$ collide "):], expected))
        else:
            i += 1
    return examples


@pytest.mark.parametrize("command,expected", epilog_examples())
def test_help_examples(command, expected):
    _, out = run(*command.split())
    assert out.splitlines() == expected


def test_help_lists_examples(capsys):
    assert cli.main(["--help"]) == 0
    assert "$ collide fold" in capsys.readouterr().out


def test_fold_exit_codes_and_json():
    assert run("fold", "--profile", "full-fold", "floß", "FLOSS")[0] == 3
    assert run("fold", "a", "a") == (0, "match\n")
    assert run("fold", "--profile", "full-fold", "Straße") == (0, "strasse\n")
    code, out = run("fold", "--json", "A", "a")
    d = json.loads(out)
    assert code == 3 and d["verdict"] == "collide"
    assert d["config"]["unicode_version"] == "13.0.0" and d["config"]["profile"] == "ascii"


def test_usage_errors(capsys):
    assert cli.main(["fold"]) == 2
    assert cli.main(["scan"]) == 2
    assert cli.main(["classify", "--utility", "tar", "--case", "nope"]) == 2
    assert capsys.readouterr().err.strip().splitlines()[-1].startswith("collide: error: ")


def test_scan_list(tmp_path):
    listing = tmp_path / "two.txt"
    listing.write_text("Makefile\nmakefile\n")
    assert run("scan", "--list", str(listing))[0] == 3
    listing.write_text("a\nb\n")
    code, out = run("scan", "--list", str(listing))
    assert code == 0 and "no collisions" in out


def test_scan_json_roundtrip(tmp_path):
    listing = tmp_path / "l.txt"
    listing.write_text("repo/A/post-checkout\nrepo/a\tsymlink\n")
    code, out = run("scan", "--list", str(listing), "--profile", "ascii", "--json")
    d = json.loads(out)
    assert code == 3
    assert {"profile", "unicode_version", "groups", "caveat"} <= set(d)
    assert d["groups"][0]["predicted_survivor"] == "repo/a"
    config = d.pop("config")
    assert config["profile"] == "ascii"
    assert ScanReport.from_dict(d).to_dict() == d


def test_scan_baseline_tar_and_dir(tmp_path):
    import tarfile

    (tmp_path / "t").mkdir()
    (tmp_path / "t" / "README").write_text("x")
    with tarfile.open(tmp_path / "a.tar", "w") as tf:
        tf.add(tmp_path / "t" / "README", arcname="README")
    base = tmp_path / "base.txt"
    base.write_text("readme\n")
    assert run("scan", "--tar", str(tmp_path / "a.tar"))[0] == 0
    assert run("scan", "--tar", str(tmp_path / "a.tar"), "--baseline", str(base))[0] == 3
    assert run("scan", "--dir", str(tmp_path / "t"))[0] == 0
    assert run("scan", "--dir", str(tmp_path / "missing"))[0] == 2
    (tmp_path / "bad.tar").write_bytes(b"\0" * 100)
    assert run("scan", "--tar", str(tmp_path / "bad.tar"))[0] == 2


def test_gen(tmp_path):
    code, out = run("gen", "--list")
    cases = [TestCase.from_dict(json.loads(line)) for line in out.splitlines()]
    assert code == 0 and len(cases) == 28
    assert len(run("gen", "--list", "--controls")[1].splitlines()) == 56
    code, out = run("gen", "--id", "file-file-d1-tf")
    assert TestCase.from_dict(json.loads(out)) == get_case("file-file-d1-tf")
    assert run("gen", "--id", "file-file-d1-tf", "--out", str(tmp_path / "h"))[0] == 0
    assert (tmp_path / "h/src/FOO").read_bytes() == b"source"
    assert run("gen", "--id", "file-file-d1-tf", "--out", str(tmp_path / "img.dump"))[0] == 0
    assert (tmp_path / "img.dump").read_text().startswith("# device")


def test_model():
    code, out = run("model", "--utility", "cp", "--case", "file-file-d1-tf", "--dump")
    assert code == 0 and "terminated: error_reported" in out and "/dst/foo" in out
    code, out = run("model", "--utility", "zip", "--case", "file-file-d1-tf", "--json", "--answer", "n")
    d = json.loads(out)
    assert d["terminated"] == "user_prompt"
    code, out = run("model", "--utility", "rsync", "--case", "hardlink-pair", "--trace")
    assert "\tcreate\tlink\trsync\t" in out


def test_classify_json_schema():
    code, out = run("classify", "--utility", "tar", "--case", "file-file-d1-tf", "--json")
    d = json.loads(out)
    assert code == 3
    assert d["codes"] == ["×"] and d["mode"] == "model" and d["discrepancies"] == []
    assert {"case", "utility", "mode", "codes", "evidence", "discrepancies"} <= set(d)
    assert all(e["code"] in d["codes"] for e in d["evidence"])


def test_classify_control_is_clean():
    code, out = run("classify", "--utility", "rsync", "--case", "file-file-d1-tf-ctl", "-v")
    assert code == 0 and "no collision exercised" in out


def test_classify_live_without_mount(monkeypatch, tmp_path):
    monkeypatch.delenv("COLLIDE_MOUNT", raising=False)
    assert run("classify", "--utility", "tar", "--case", "file-file-d1-tf", "--live")[0] == 4
    assert run("classify", "--utility", "tar", "--case", "file-file-d1-tf", "--live", "--mount", str(tmp_path))[0] == 4


def test_trace(tmp_path):
    tsv = str(GOLDEN / "violation_trace.tsv")
    code, out = run("trace", "--in", tsv, "--fig4")
    assert code == 3 and out == (GOLDEN / "violation_block.txt").read_text()
    code, out = run("trace", "--in", tsv, "--json")
    d = json.loads(out)
    assert [Violation.from_dict(v).to_dict() for v in d["violations"]] == d["violations"]
    assert run("trace", "--in", tsv, "--device-filter", "00:01")[0] == 0


def test_adapt_auditd(tmp_path):
    log = tmp_path / "audit.log"
    log.write_text('type=SYSCALL msg=audit(1.0:5): syscall=257 success=yes pid=1 comm="cp"\n'
                   'type=PATH msg=audit(1.0:5): item=0 name="/x/a" inode=9 dev=00:39 nametype=CREATE\n')
    code, out = run("adapt-auditd", "--in", str(log))
    assert code == 0 and out == "5\tcreate\topenat\tcp\t1\t00:39\t9\t/x/a\t-\tsuccess\n"


def test_scenario():
    assert run("scenario", "dpkg_db")[0] == 3
    code, out = run("scenario", "all", "--no-fold", "--json")
    d = json.loads(out)
    assert code == 0 and not any(s["compromised"] for s in d["scenarios"])
    assert run("scenario", "nope")[0] == 2


def test_table():
    code, out = run("table")
    assert code == 0 and out.splitlines()[1].split() == ["file-file", "×", "A", "E", "+≠", "+≠", "R"]


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "collide.conf"
    cfg.write_text("# defaults\nprofile = full-fold\nformat = json\n")
    code, out = run("fold", "--config", str(cfg), "floß", "FLOSS")
    assert code == 3 and json.loads(out)["config"]["profile"] == "full-fold"
    code, out = run("fold", "--config", str(cfg), "--profile", "ascii", "floß", "FLOSS")
    assert code == 0 and json.loads(out)["verdict"] == "distinct"
    cfg.write_text("colour = yes\n")
    assert run("fold", "--config", str(cfg), "a")[0] == 2


def test_no_color(monkeypatch):
    class Tty(io.StringIO):
        def isatty(self):
            return True

    out = Tty()
    cli.main(["fold", "a", "A"], out=out)
    assert "\033[" in out.getvalue()
    monkeypatch.setenv("NO_COLOR", "1")
    out = Tty()
    cli.main(["fold", "a", "A"], out=out)
    assert out.getvalue() == "collide\n"


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "collide.cli", "fold", "--profile", "full-fold", "floß", "FLOSS"],
                          capture_output=True, text=True)
    assert proc.returncode == 3 and proc.stdout == "collide\n"
