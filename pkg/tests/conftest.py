import numpy as np
import pytest

from radarbf import DirectionGrid, default_geometry, default_waveform
from radarbf.array_model import ArrayGeometry


@pytest.fixture(scope="session")
def wf():
    return default_waveform()


@pytest.fixture(scope="session")
def geo(wf):
    return default_geometry(wf)


@pytest.fixture(scope="session")
def grid():
    return DirectionGrid()


def ura(wf, nx=8, nz=4):
    """nx x nz half-wavelength planar array, row z = 0 first."""
    units = [[x, 0, z] for z in range(nz) for x in range(nx)]
    return ArrayGeometry.from_half_wavelength(units, wf.wavelength)


def ula(wf, n=8):
    return ArrayGeometry.from_half_wavelength([[x, 0, 0] for x in range(n)], wf.wavelength)


def bin_center(wf, j):
    return j * wf.range_resolution


def random_hermitian_psd(rng, m, rank=None):
    rank = rank or m
    x = rng.standard_normal((m, rank)) + 1j * rng.standard_normal((m, rank))
    return x @ x.conj().T


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
