"""Acceptance criteria at full size; one PASS/FAIL line per criterion is printed."""
import pytest

from haarvol.validation import CRITERIA, load_constants, run_criterion


@pytest.fixture(scope="module")
def constants():
    return load_constants()


@pytest.mark.parametrize("name", CRITERIA)
def test_acceptance_criterion(name, constants, capsys):
    result = run_criterion(name, constants)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.summary
