import pytest

from fsp_plunge.synth import SyntheticPlantSpec, default_dataset
from fsp_plunge.sysid import fit


@pytest.fixture(scope="session")
def dataset():
    return default_dataset(SyntheticPlantSpec())


@pytest.fixture(scope="session")
def fitted(dataset):
    model, report = fit(dataset[:7])
    return model, report


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
