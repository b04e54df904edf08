import numpy as np
import pytest

from proper_regret.generators import make_generator

# (family, alpha) pairs covering every built-in family
ALL_FAMILIES = [
    ("shannon", None),
    ("sq-alpha-norm", 1.5),
    ("sq-alpha-norm", 2.0),
    ("sq-alpha-norm", 3.0),
    ("alpha-norm", 1.5),
    ("alpha-norm", 2.0),
    ("alpha-norm", 4.0),
    ("tsallis", 1.5),
    ("tsallis", 2.5),
    ("tsallis", 4.0),
    ("max-power", 1.5),
    ("max-power", 2.0),
    ("max-power", 3.0),
]
DIFFERENTIABLE = [fa for fa in ALL_FAMILIES if fa[0] != "max-power"]


def family_id(fa):
    family, alpha = fa
    return family if alpha is None else f"{family}-{alpha:g}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def shannon():
    return make_generator("shannon")


@pytest.fixture
def brier():
    return make_generator("brier")


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
