import pytest

from pplab.attack import default_profile


@pytest.fixture
def profile():
    return default_profile()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


def pytest_terminal_summary(terminalreporter, config):
    from test_acceptance import ACCEPTANCE_KEY

    results = config.stash.get(ACCEPTANCE_KEY, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(results, key=lambda r: int(r[0].split()[0][2:])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  [{detail}]")
