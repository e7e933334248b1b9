import pytest

from autagent.simenv import SimEnvironment, default_env
from autagent.trainer import TrainConfig, train

ACCEPTANCE_RESULTS: list[tuple[int, bool, str]] = []


@pytest.fixture(scope="session")
def env_config():
    return default_env()


@pytest.fixture(scope="session")
def open_env(env_config):
    return SimEnvironment(env_config, env_config.profile("open"))


@pytest.fixture(scope="session")
def closed_env(env_config):
    return SimEnvironment(env_config, env_config.profile("closed"))


@pytest.fixture(scope="session")
def trained_open(open_env):
    """Default-config policy trained against the open reasoner, with its log."""
    return train(TrainConfig(), open_env)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
