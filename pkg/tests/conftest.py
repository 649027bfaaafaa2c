import pytest

from dfpm.bench import helium_ground_state

BENCH_KS = (4, 6, 8, 10)


@pytest.fixture(scope="session")
def helium_runs():
    """DFPM ground states at the tabulated step sizes, computed once per session."""
    return {k: helium_ground_state(k, tol=1e-10) for k in BENCH_KS}


TOY_KS = (0, 1, 2, 3)


@pytest.fixture(scope="session")
def toy_scaling_runs():
    """Shifted power and DFPM (estimated step) on the toy grids k = 0..3."""
    return {
        "power": [helium_ground_state(k, tol=1e-8, method="power", max_steps=100_000).record
                  for k in TOY_KS],
        "dfpm": [helium_ground_state(k, tol=1e-8, dt="auto").record for k in TOY_KS],
    }


# --- acceptance report --------------------------------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, title = mark.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "ok": True})
    if rep.failed or (rep.when == "call" and not rep.passed):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        entry = _ACCEPTANCE[number]
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {entry['title']}")
