import numpy as np
import pytest

from railchan.antenna import AntennaPattern
from railchan.scene import (
    TABLE_MATERIALS,
    Endpoints,
    Scene,
    Surface,
    Trajectory,
    build_hsr_scenario,
)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def hsr_scene():
    return build_hsr_scenario()


def isotropic():
    """Pattern within 1e-12 dB of 0 dBi in every direction."""
    return AntennaPattern(0.0, 360.0, sidelobe_floor=-1e-12)


def ground_scene(half=500.0, material="concrete", vehicle=()):
    mat = TABLE_MATERIALS[material]
    g = Surface(np.array([[-half, -half, 0.0], [half, -half, 0.0], [half, half, 0.0],
                          [-half, half, 0.0]]), mat, "ground", "ground")
    return scene_of([g], vehicle=vehicle)


def scene_of(surfaces, wedges=(), vehicle=(), vehicle_wedges=()):
    ends = Endpoints((0.0, 0.0, 26.0), 4.7, 5.2, 45.0, 90.0, 37_469_300.0)
    traj = Trajectory((0.0, 0.0, 0.0), (10.0, 0.0, 0.0), 2, 1.0)
    return Scene(surfaces, wedges, traj, ends, vehicle, vehicle_wedges)
