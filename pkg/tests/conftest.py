import pytest

from defectfe import DefectSpec, make_potential


@pytest.fixture
def harmonic():
    return make_potential("harmonic", (1.0,))


@pytest.fixture
def quartic():
    return make_potential("quartic-paper")


@pytest.fixture
def unit_defect():
    # P(y) = y^2, the defect used throughout the worked examples
    return DefectSpec(make_potential("harmonic", (1.0,)))
