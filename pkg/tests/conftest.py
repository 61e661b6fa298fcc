import math

import numpy as np
import pytest
from hypothesis import strategies as st

from vprobe import DEFAULT_STYLUS, PlacementSpec, load_preset
from vprobe.mechanics import BeamSpec, DeviceSpec, MaterialProps, ProofMassSpec

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref():
    return load_preset("REF-CANTILEVER")


@pytest.fixture(scope="session")
def stiff():
    return load_preset("REF-STIFF")


@pytest.fixture(scope="session")
def stylus():
    return DEFAULT_STYLUS


@pytest.fixture(scope="session")
def cosym(ref):
    return PlacementSpec.at_cosym(ref)


def random_device(rng: np.random.Generator, fracture_strength: float = 1e15) -> DeviceSpec:
    """Plausible single-beam device with a slender beam and a long rigid mass."""
    L = rng.uniform(200e-6, 800e-6)
    h = rng.uniform(3e-6, 0.05 * L)
    mat = MaterialProps(rng.uniform(100e9, 200e9), 0.28, fracture_strength)
    return DeviceSpec(
        BeamSpec(L, rng.uniform(50e-6, 300e-6), h),
        ProofMassSpec(rng.uniform(300e-6, 1500e-6), 300e-6),
        mat,
        support_rot_compliance=float(rng.choice([0.0, rng.uniform(0, 2e4)])),
    )


@st.composite
def devices(draw):
    L = draw(st.floats(200e-6, 800e-6))
    h = draw(st.floats(0.015, 0.05)) * L
    return DeviceSpec(
        BeamSpec(L, draw(st.floats(50e-6, 300e-6)), h),
        ProofMassSpec(draw(st.floats(300e-6, 1500e-6)), 300e-6),
        MaterialProps(draw(st.floats(100e9, 200e9)), 0.28, 1e15),
        support_rot_compliance=draw(st.sampled_from([0.0, 1e3, 1e4])),
    )
