"""Named sensor tables bundled with the package.

Two synthetic three-channel cameras ship as CSV data:

* ``cie1931`` traces a horseshoe-shaped, strictly convex spectral locus on
  [400, 700] nm with its white point at exactly (1/3, 1/3, 1/3) under a
  uniform reference.
* ``d90`` is the same camera with a dent pressed into the short-wave arm,
  producing a piecewise-convex locus with two maximal convex segments and
  a concave pocket bridged by its hull.

Both are generated by ``tools/make_fixtures.py``, which also certifies the
geometric properties the test suite depends on (convexity class, white
point, curvature and seam budgets, lattice-node depth floors).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .errors import SensorDataError
from .sensor import Sensor, load_sensor

FIXTURE_NAMES = ("cie1931", "d90")


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled sensor table."""
    if name not in FIXTURE_NAMES:
        raise SensorDataError(
            f"unknown fixture {name!r}; available: {', '.join(FIXTURE_NAMES)}"
        )
    return Path(str(resources.files("chromalocus") / "data" / f"{name}.csv"))


def load_fixture(name: str) -> Sensor:
    """Load a bundled sensor table by name."""
    return load_sensor(fixture_path(name))
