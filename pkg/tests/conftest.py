"""Shared fixtures: bundled cameras plus a synthetic color wheel.

The wheel sensor has channels (1 + cos(2*pi*u - 2*pi*i/3)) / 3 on the unit
interval, so the total response is identically one, the reweighted uniform
reference stays uniform, and the locus is an exact circle around the white
point.  Many closed-form oracles below lean on those three facts.
"""

import io

import numpy as np
import pytest

from chromalocus import Density, load_fixture, load_sensor


def wheel_csv(n: int = 301) -> str:
    u = np.linspace(0.0, 1.0, n)
    lines = ["wavelength,ch0,ch1,ch2"]
    for k in range(n):
        chans = (1.0 + np.cos(2.0 * np.pi * u[k] - 2.0 * np.pi * np.arange(3) / 3.0)) / 3.0
        lines.append(",".join(repr(float(v)) for v in [u[k], *chans]))
    return "\n".join(lines) + "\n"


def make_wheel(n: int = 301):
    return load_sensor(io.StringIO(wheel_csv(n)))


@pytest.fixture(scope="session")
def wheel():
    return make_wheel()


@pytest.fixture(scope="session")
def cie():
    return load_fixture("cie1931")


@pytest.fixture(scope="session")
def d90():
    return load_fixture("d90")


def uniform_ref(sensor) -> Density:
    return Density.uniform(sensor.grid)
