from pathlib import Path

import pytest

from xttc import load_model

ROOT = Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture
def thermostat_path() -> Path:
    return MODELS / "thermostat.model"


@pytest.fixture
def thermostat(thermostat_path):
    return load_model(thermostat_path)


@pytest.fixture
def diamond():
    return load_model(MODELS / "diamond.model")


# criterion number -> (title, passed, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {number}. {title}: {detail}")
