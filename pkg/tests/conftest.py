"""Shared fixtures: the frozen two-eigenvalue potential and its derived objects."""

import numpy as np
import pytest
from hypothesis import settings

from dnlslab.bound_states import continue_branch
from dnlslab.harness import default_potential
from dnlslab.lattice import LatticeGrid, NonlinearityCoefficients, Potential
from dnlslab.resonance import classify_resonance, gamma_closed_form, leading_G
from dnlslab.spectral import discrete_spectrum

settings.register_profile("dnlslab", max_examples=40, deadline=None)
settings.load_profile("dnlslab")


@pytest.fixture(scope="session")
def coeffs():
    return NonlinearityCoefficients()


@pytest.fixture(scope="session")
def V500():
    return default_potential(500)


@pytest.fixture(scope="session")
def spec500(V500):
    return discrete_spectrum(V500)


@pytest.fixture(scope="session")
def branches500(V500, coeffs, spec500):
    return [continue_branch(j, 4e-2, 80, V500, coeffs, spec500) for j in (1, 2)]


@pytest.fixture(scope="session")
def V1000():
    return default_potential(1000)


@pytest.fixture(scope="session")
def spec1000(V1000):
    return discrete_spectrum(V1000)


@pytest.fixture(scope="session")
def resonance1000(spec1000):
    return classify_resonance(spec1000)


@pytest.fixture(scope="session")
def G1000(spec1000, resonance1000):
    return leading_G(spec1000, resonance1000.N0)


@pytest.fixture(scope="session")
def gamma1000(G1000, resonance1000, V1000):
    return gamma_closed_form(G1000, resonance1000, V1000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def single_well():
    return Potential.single_site(LatticeGrid(1000), 2.0)


_ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    """Record one acceptance line: acceptance(k, passed, detail)."""

    def record(k: int, passed: bool, detail: str) -> None:
        line = f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[k] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
