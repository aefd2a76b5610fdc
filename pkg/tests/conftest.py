from pathlib import Path

import hypothesis
import pytest

from checksupport.inference import ScriptedBackend
from checksupport.text_ingest import load_text

hypothesis.settings.register_profile("default", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def manuscript():
    return load_text(FIXTURES / "manuscript.txt")


@pytest.fixture
def consort_backend():
    return ScriptedBackend.from_file(FIXTURES / "consort_script.json")


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path_factory):
    for var in ("CHECKSUPPORT_BACKEND_URL", "CHECKSUPPORT_MODEL", "SOURCE_DATE_EPOCH"):
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setenv("CHECKSUPPORT_CONFIG", str(tmp_path_factory.getbasetemp() / "no-such-config.toml"))


# -- acceptance summary ----------------------------------------------------------------

_criteria: dict[str, list[str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for name, value in report.user_properties:
        if name == "criterion":
            outcome = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
            _criteria.setdefault(value, []).append(outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcomes in _criteria.items():
        if "FAIL" in outcomes:
            verdict = "FAIL"
        elif all(o == "SKIP" for o in outcomes):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"{verdict:<5} {name}")


@pytest.fixture
def criterion(record_property):
    def mark(name: str):
        record_property("criterion", name)

    return mark
