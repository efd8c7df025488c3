import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_LINES: dict[str, str] = {}


def pytest_runtest_makereport(item, call):
    props = dict(item.user_properties)
    if "criterion" not in props or call.when not in ("setup", "call"):
        return
    if call.when == "setup" and call.excinfo is None:
        return
    n, title = props["criterion"]
    if call.excinfo is None:
        line = f"criterion {n}: PASS: {title}: {props.get('detail', '')}"
    elif call.excinfo.errisinstance(pytest.skip.Exception):
        line = f"criterion {n}: SKIP: {title}: {call.excinfo.value.msg}"
    else:
        line = f"criterion {n}: FAIL: {title}: {call.excinfo.exconly().splitlines()[0]}"
    _LINES[item.nodeid] = line


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_LINES):
        terminalreporter.write_line(_LINES[nodeid])
