"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

from collections import OrderedDict

import pytest

_RESULTS: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.fixture
def note(request):
    """Attach a short detail string to the current criterion's report line."""
    marker = request.node.get_closest_marker("acceptance")

    def add(text: str) -> None:
        if marker is not None:
            _entry(marker)["notes"].append(text)
    return add


def _entry(marker):
    number, title = marker.args
    return _RESULTS.setdefault(number, {"title": title, "outcomes": [], "notes": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _entry(marker)["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, entry in sorted(_RESULTS.items()):
        ok = entry["outcomes"] and all(o == "passed" for o in entry["outcomes"])
        line = f"{'PASS' if ok else 'FAIL'} [{number}] {entry['title']}"
        if entry["notes"]:
            line += " :: " + "; ".join(entry["notes"])
        terminalreporter.write_line(line)
