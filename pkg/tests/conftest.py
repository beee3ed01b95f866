import pytest

from fene_decay_lab.config_space import assemble_operators, build_basis
from fene_decay_lab.model import FeneParams


@pytest.fixture(scope="session")
def basis2():
    return build_basis(FeneParams(k=1.0, dim=2), 12, 6)


@pytest.fixture(scope="session")
def ops2(basis2):
    return assemble_operators(basis2)


@pytest.fixture(scope="session")
def basis3():
    return build_basis(FeneParams(k=1.0, dim=3), 8, 4)


@pytest.fixture(scope="session")
def ops3(basis3):
    return assemble_operators(basis3)


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


class AcceptanceLog:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def __init__(self, store: dict):
        self.store = store

    def start(self, number: int, title: str) -> None:
        self.store[number] = (False, title, "did not finish")

    def record(self, number: int, title: str, passed: bool, detail: str) -> None:
        self.store[number] = (bool(passed), title, detail)


@pytest.fixture(scope="session")
def acceptance_log(request):
    return AcceptanceLog(request.config.stash.setdefault(_ACCEPTANCE_KEY, {}))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(store):
        passed, title, detail = store[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title} ({detail})")
