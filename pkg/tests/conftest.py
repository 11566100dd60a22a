import pytest

from dnlslab.criteria import reference_run

# CriterionResult objects recorded by the acceptance tests, keyed by number
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture(scope="session")
def reference():
    """The reference trajectory (n=1, p=3, a=1, N=4096, L=256, dt=1e-3, T=16)."""
    return reference_run()


@pytest.fixture
def record_criterion():
    def record(result):
        ACCEPTANCE_RESULTS[result.number] = result
        print(result.line())
        return result

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number].line())
