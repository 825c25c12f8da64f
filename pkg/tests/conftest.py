import pytest

from nonresponse_lab.simulate import MissingnessConfig, PopulationSpec

_results = pytest.StashKey[dict]()
_notes = pytest.StashKey[dict]()


@pytest.fixture
def spec():
    return PopulationSpec()


@pytest.fixture
def nmar():
    return MissingnessConfig()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")
    config.stash[_results] = {}
    config.stash[_notes] = {}


@pytest.fixture
def note(request):
    """Attach a diagnostic line to the running acceptance criterion."""
    marker = request.node.get_closest_marker("criterion")
    key = marker.args[0] if marker else request.node.name
    lines = request.config.stash[_notes].setdefault(key, [])
    return lines.append


def pytest_collection_finish(session):
    for item in session.items:
        marker = item.get_closest_marker("criterion")
        if marker:
            session.config.stash[_results][marker.args[0]] = [marker.args[1], "not run"]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = item.config.stash[_results][marker.args[0]]
    if report.failed:
        entry[1] = "FAIL"
    elif report.skipped:
        entry[1] = "SKIP"
    elif report.when == "call" and entry[1] != "FAIL":
        entry[1] = "PASS"


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_results]
    if not results:
        return
    notes = config.stash[_notes]
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, status = results[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status:<4} {title}")
        for line in notes.get(number, []):
            terminalreporter.write_line(f"               {line}")
