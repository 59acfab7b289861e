import time

import pytest

SESSION_START = pytest.StashKey[float]()

from yesql_crawler.frontier import Frontier, init_schema
from yesql_crawler.mockweb import MockWebSpec, KeywordRegion, generate, serve
from yesql_crawler.scoring import figure_strategy


@pytest.fixture
def db(tmp_path):
    path = tmp_path / "frontier.db"
    init_schema(path)
    return path


@pytest.fixture
def frontier(db):
    with Frontier(db) as f:
        yield f


@pytest.fixture
def strategy():
    return figure_strategy()


@pytest.fixture(scope="session")
def small_web():
    spec = MockWebSpec(seed=7, page_count=100, domain_count=8, seed_pages=2,
                       keyword_regions=(KeywordRegion("keyword1", 0.1, "fr"),),
                       redirect_chains=(1, 2), error_pages={404: 0.03})
    return generate(spec)


@pytest.fixture(scope="session")
def small_server(small_web):
    with serve(small_web) as handle:
        yield handle


# -- acceptance reporting ------------------------------------------------------

_CRITERIA: dict = {}


def pytest_sessionstart(session):
    session.config.stash[SESSION_START] = time.monotonic()


@pytest.fixture
def session_elapsed(request):
    return lambda: time.monotonic() - request.config.stash[SESSION_START]


def pytest_collection_modifyitems(session, config, items):
    # the wall-clock criterion has to see every other test finish first
    last = [it for it in items if it.get_closest_marker("runs_last")]
    items[:] = [it for it in items if not it.get_closest_marker("runs_last")] + last


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "ran": False, "detail": []})
    if report.when == "call":
        entry["ran"] = True
        entry["detail"] += [v for k, v in item.user_properties if k == "detail"]
    if report.failed or (report.when == "call" and report.skipped):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        verdict = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        detail = "; ".join(entry["detail"])
        line = f"criterion {number}: {verdict}  {entry['title']}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
