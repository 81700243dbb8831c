import pytest

from evtol_dclink.catalogs import load_catalogs


@pytest.fixture(scope="session")
def cat():
    """Shipped catalogs, motor, mission and pack."""
    return load_catalogs()


@pytest.fixture(scope="session")
def aimzhn(cat):
    return cat.devices["AIMZHN120R010"]


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS, line

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(line(k, *RESULTS[k]))
