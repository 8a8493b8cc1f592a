import math

import numpy as np
import pytest

from cycsync.models import LVParams
from cycsync.netsim import simulate
from cycsync.orbit import find_orbit

REFERENCE = LVParams(2.3427, 0.5)


@pytest.fixture(scope="session")
def ref_orbit():
    """Limit cycle at the reference parameters (alpha=2.3427, gamma=0.5)."""
    return find_orbit(REFERENCE)


@pytest.fixture(scope="session")
def band(ref_orbit):
    """Period-doubling band in k^2 (d_u = 1) along the real axis."""
    from cycsync.msf import ray_intervals

    iv = ray_intervals(ref_orbit, 0.0, tol=1e-6)
    assert len(iv) == 1
    return iv[0]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def settle_periods(lead: float, floor: int = 200, drop: float = 1e-5) -> int:
    """Periods for a mode with multiplier modulus ``lead`` to shrink by ``drop``, with slack."""
    if lead >= 1:
        return floor
    return int(max(floor, math.ceil(1.5 * math.log(drop) / math.log(lead))))


class SimulationCache:
    def __init__(self, orbit):
        self.orbit = orbit
        self._runs = {}

    def run(self, key, C, D, initial, periods):
        if key not in self._runs:
            self._runs[key] = simulate(C, self.orbit.params, D, initial,
                                       t_end=periods * self.orbit.period, orbit=self.orbit)
        return self._runs[key]


@pytest.fixture(scope="session")
def simulations(ref_orbit):
    return SimulationCache(ref_orbit)


# acceptance summary ---------------------------------------------------------

ACCEPTANCE: dict = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")
