import sys

import pytest


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k].line())


@pytest.fixture(scope="session")
def gauss_tilt():
    from orlicz.function import OrliczFunction
    from orlicz.tilt import solve_tilt

    return solve_tilt(OrliczFunction.power(2.0), 1.0)


@pytest.fixture(scope="session")
def laplace_tilt():
    from orlicz.function import OrliczFunction
    from orlicz.tilt import solve_tilt

    return solve_tilt(OrliczFunction.power(1.0), 1.0)
