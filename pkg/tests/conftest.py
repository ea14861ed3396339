import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    _ACCEPTANCE.append((marker.args[0], "PASS" if rep.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0].split()[0][2:])):
        terminalreporter.write_line(f"{status} {label}" + (f" ({detail})" if detail else ""))
