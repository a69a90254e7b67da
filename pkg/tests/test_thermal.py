import pytest
from hypothesis import given
from hypothesis import strategies as st

from sidebandtwin.device import MechanicalMode, bose_einstein_occupancy
from sidebandtwin.errors import DomainError, ValidationError
from sidebandtwin.sequence import Gap, Pulse, PulseSequence, average_power
from sidebandtwin.thermal import (CryostatEnvironment, HeatingModel,
                                  effective_occupancy, pulse_occupancies,
                                  pump_probe_occupancy)

from conftest import OMEGA_M, thermometry_sequence

MECH = MechanicalMode(OMEGA_M, 6e6)
MK = CryostatEnvironment(0.011)
HEATING = HeatingModel(fast_amplitude=2e3, fast_exponent=0.5, fast_timescale=50e-9,
                       slow_amplitude=3e3, slow_exponent=0.5, slow_timescale=1e-3)
PUMP = Pulse(OMEGA_M, 850e-9, 4e-6, "pump")
PROBE = Pulse(-OMEGA_M, 85e-9, 1e-6, "probe")


def test_bath_limited():
    n = effective_occupancy(thermometry_sequence(), MK, HeatingModel(), MECH)
    assert n == pytest.approx(0.0089, abs=5e-5)


def test_additive_terms():
    seq = thermometry_sequence(1e-6)
    bath = bose_einstein_occupancy(OMEGA_M, 0.011)
    expected = bath + 2e3 * (1e-6) ** 0.5 + 3e3 * average_power(seq) ** 0.5
    assert effective_occupancy(seq, MK, HEATING, MECH) == pytest.approx(expected, rel=1e-12)
    assert effective_occupancy(seq, MK, HEATING, MECH, "blue") == pytest.approx(expected)


def test_occupancy_increases_with_duty_cycle():
    gaps = [96e-6, 64e-6, 32e-6, 16e-6, 8e-6, 4e-6, 2e-6, 1e-6]
    occ = [effective_occupancy(thermometry_sequence(340e-9, gap=g), MK, HEATING, MECH)
           for g in gaps]
    assert all(b > a for a, b in zip(occ, occ[1:]))


def test_low_duty_cycle_limit():
    bath = bose_einstein_occupancy(OMEGA_M, 0.011)
    fast_only = bath + HEATING.fast_term(340e-9)
    excess = [effective_occupancy(thermometry_sequence(340e-9, gap=g), MK, HEATING, MECH)
              - fast_only for g in (1e-5, 1e-3, 1e-1, 1.2)]
    assert all(b < a for a, b in zip(excess, excess[1:]))
    assert 0 < excess[-1] < 1e-2 * fast_only


@given(st.floats(1e-10, 1e-5), st.floats(1e-10, 1e-5), st.floats(0, 1e4), st.floats(0, 1e4))
def test_monotone_and_above_bath(p1, p2, fast, slow):
    model = HeatingModel(fast, 1.4, 50e-9, slow, 1.4, 1e-3)
    n1 = effective_occupancy(thermometry_sequence(p1), MK, model, MECH)
    n2 = effective_occupancy(thermometry_sequence(p2), MK, model, MECH)
    bath = bose_einstein_occupancy(OMEGA_M, 0.011)
    assert min(n1, n2) >= bath
    if p1 <= p2:
        assert n1 <= n2 * (1 + 1e-12)


def test_fast_carryover_through_short_gap():
    seq = PulseSequence((Pulse(OMEGA_M, 1e-6, 4e-6, "blue"), Gap(10e-9),
                         Pulse(-OMEGA_M, 1e-9, 4e-6, "red"), Gap(1e-6)), 1e-3)
    occ = pulse_occupancies(seq, MK, HEATING, MECH)
    carried = occ[1] - occ[0] - HEATING.fast_term(1e-9) + HEATING.fast_term(1e-6)
    assert carried == pytest.approx(HEATING.fast_term(1e-6), rel=1e-9)


def test_pump_probe_flat_in_delay():
    delays = [0.1e-6, 0.2e-6, 0.5e-6, 1e-6, 2e-6, 5e-6, 10e-6, 20e-6]
    occ = [pump_probe_occupancy(PUMP, PROBE, d, MK, HEATING, MECH, 50e-6) for d in delays]
    assert max(occ) - min(occ) < 1e-12 * max(occ)


def test_pump_probe_short_delay_includes_pump():
    short = pump_probe_occupancy(PUMP, PROBE, 20e-9, MK, HEATING, MECH)
    long = pump_probe_occupancy(PUMP, PROBE, 1e-6, MK, HEATING, MECH)
    assert short - long == pytest.approx(HEATING.fast_term(850e-9), rel=1e-9)


def test_zero_pump_power():
    pump = Pulse(OMEGA_M, 0.0, 4e-6, "pump")
    a = pump_probe_occupancy(pump, PROBE, 20e-9, MK, HEATING, MECH)
    b = pump_probe_occupancy(pump, PROBE, 10e-6, MK, HEATING, MECH)
    assert a == pytest.approx(b, rel=1e-12)


def test_errors():
    with pytest.raises(DomainError):
        pump_probe_occupancy(PUMP, PROBE, 0.0, MK, HEATING, MECH)
    with pytest.raises(DomainError):
        pump_probe_occupancy(PUMP, PROBE, 49e-6, MK, HEATING, MECH)
    with pytest.raises(ValidationError):
        HeatingModel(fast_amplitude=-1.0)
    with pytest.raises(ValidationError):
        HeatingModel(fast_timescale=1e-3, slow_timescale=1e-6)
    with pytest.raises(ValidationError):
        CryostatEnvironment(0.0)
    with pytest.raises(DomainError):
        effective_occupancy(thermometry_sequence(), MK, HEATING, MECH, "pump")
