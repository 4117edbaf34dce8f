from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stubserver import StubServer

from varmatch.catalog import ingest_catalog
from varmatch.synth import SynthSpec, synth_catalog

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def table5_store():
    return ingest_catalog(FIXTURES / "table5.jsonl")


@pytest.fixture(scope="session")
def small_store():
    # 2 types x 2 brands x 3 groups = 12 groups, enough for every bucket
    return synth_catalog(
        SynthSpec(
            n_types=2,
            brands_per_type=2,
            groups_per_brand=3,
            group_size_range=(2, 4),
            variation_keys_per_group=1,
        ),
        seed=7,
    )


@pytest.fixture
def stub_server():
    server = StubServer()
    yield server
    server.close()


def golden_text(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")


# ---- acceptance criteria reporting -------------------------------------

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _acceptance_results.append((name, "PASS" if report.passed else "FAIL"))
    elif report.when == "setup" and (report.failed or report.skipped):
        _acceptance_results.append((name, "SKIP" if report.skipped else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance_results:
        label = name.replace("test_", "").replace("_", " ")
        terminalreporter.write_line(f"[{outcome}] {label}")
