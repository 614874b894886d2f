import numpy as np
import pytest

from cphealth.core import HealthCube, ObservationMask, Region, RegionCatalog


def line_catalog(xs_km, lat0=51.5):
    """Regions on a meridian, ``xs_km`` kilometres north of ``lat0``."""
    deg = 180.0 / (np.pi * 6371.0)
    return RegionCatalog([Region(f"R{i}", f"r{i}", lat0 + x * deg, 0.0) for i, x in enumerate(xs_km)])


def random_catalog(n, rng, spread=0.3):
    lat = 51.5 + rng.uniform(-spread, spread, n)
    lon = -0.1 + rng.uniform(-spread, spread, n)
    return RegionCatalog([Region(f"R{i:03d}", f"r{i}", float(a), float(b)) for i, (a, b) in enumerate(zip(lat, lon))])


@pytest.fixture
def small_cube():
    rng = np.random.default_rng(3)
    values = rng.uniform(0.01, 0.2, size=(12, 3, 6))
    cube = HealthCube(values, ["A", "B", "C"], range(2010, 2016))
    return cube, ObservationMask.full(cube), random_catalog(12, rng)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, passed: bool, detail: str):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
