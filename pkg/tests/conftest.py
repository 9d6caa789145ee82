import pytest

from saper_forge.blowup import resolve
from saper_forge.poly import MultiPoly
from saper_forge.singlestep import build_single_step

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def cusp_tree():
    return resolve(MultiPoly.parse("y^2 - x^3"))


@pytest.fixture(scope="session")
def cusp_ideal(cusp_tree):
    return build_single_step(cusp_tree)


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    if report.when == "call" or report.failed:
        previous = ACCEPTANCE.get(number, (True, name))[0]
        ACCEPTANCE[number] = (previous and not report.failed, name)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, name = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  ({name})")
