import numpy as np
import pytest

from sidebandtwin.counting import SimulationPlan
from sidebandtwin.device import DetectorModel, DeviceModel, MechanicalMode, OpticalMode
from sidebandtwin.filters import FabryPerotStage, FilterChain
from sidebandtwin.sequence import Gap, Pulse, PulseSequence
from sidebandtwin.thermal import CryostatEnvironment, HeatingModel

OMEGA_M = 1.085e9
LASER_FREQUENCY = 196.78e12


@pytest.fixture
def device():
    return DeviceModel(OpticalMode(LASER_FREQUENCY, 1585e6, 480e6),
                       MechanicalMode(OMEGA_M, 6e6), 220e3)


@pytest.fixture
def chain():
    return FilterChain((FabryPerotStage(10e6, 5e9, 0.707), FabryPerotStage(10e6, 5.8e9, 0.707)))


def thermometry_sequence(power=8.5e-9, gap=1e-6, total=2.5):
    red = Pulse(-OMEGA_M, power, 4e-6, "red")
    blue = Pulse(OMEGA_M, power, 4e-6, "blue")
    return PulseSequence((red, Gap(gap), blue, Gap(gap)), total)


def heating_for_occupancy(n_target, power=8.5e-9, temperature=0.011):
    """Purely fast heating that puts the occupancy at `n_target` for `power`."""
    from sidebandtwin.device import bose_einstein_occupancy

    bath = bose_einstein_occupancy(OMEGA_M, temperature)
    return HeatingModel(fast_amplitude=(n_target - bath) / power)


@pytest.fixture
def make_plan(device, chain):
    def _make(power=8.5e-9, temperature=0.011, heating=None, total=2.5, seed=0,
              efficiency=0.5, dark=11.0, repetitions=1, sequence=None):
        return SimulationPlan(
            device, DetectorModel(efficiency, dark), chain,
            sequence or thermometry_sequence(power, total=total),
            CryostatEnvironment(temperature), heating or HeatingModel(),
            repetitions, seed)
    return _make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
