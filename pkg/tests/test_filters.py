import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from sidebandtwin.device import MechanicalMode
from sidebandtwin.errors import DomainError
from sidebandtwin.filters import (DriftLaw, FabryPerotStage, FilterChain,
                                  chain_transmission, extinction_db,
                                  stage_transmission, sweep_response, sweep_table)

OMEGA_M = 1.085e9
# dense-grid convolution of the two-stage Airy product with a 6 MHz Lorentzian
# (5 kHz grid over +/-400 MHz); computed once by an independent script and frozen
ORACLE_SWEEP_FWHM = 11.2274e6


def multibeam_transmission(offset, fwhm, fsr, peak=1.0, n_beams=400_000):
    """Brute-force sum over round trips of a lossless two-mirror etalon."""
    finesse = fsr / fwhm
    # invert finesse = pi sqrt(R) / (1 - R)
    a = math.pi / finesse
    r = ((-a + math.sqrt(a * a + 4.0)) / 2.0) ** 2
    k = np.arange(n_beams)
    phase = 2.0 * math.pi * offset / fsr
    field = (1.0 - r) * np.sum(r ** k * np.exp(1j * phase * k))
    return peak * abs(field) ** 2


def test_single_stage_matches_multibeam_oracle():
    stage = FabryPerotStage(10e6, 5e9)
    for offset in (0.0, 3e6, 1.1e9, 2.2e9):
        assert stage_transmission(stage, offset) == pytest.approx(
            multibeam_transmission(offset, 10e6, 5e9), rel=1e-3)
    assert stage_transmission(stage, 1.1e9) == pytest.approx(2.43e-5, rel=2e-3)
    assert 10 * math.log10(stage_transmission(stage, 1.1e9)) == pytest.approx(-46.1, abs=0.1)


def test_resonance_and_periodicity():
    stage = FabryPerotStage(10e6, 5e9, 0.707)
    assert stage_transmission(stage, 0.0) == pytest.approx(0.707)
    assert stage_transmission(stage, 5e9) == pytest.approx(0.707, rel=1e-9)


def test_two_stage_extinction(chain):
    same = FilterChain((FabryPerotStage(10e6, 5e9), FabryPerotStage(10e6, 5e9)))
    assert chain_transmission(same, 1.1e9) <= 1e-8
    assert extinction_db(same, 1.1e9) == pytest.approx(92.3, abs=0.05)
    oracle = multibeam_transmission(1.1e9, 10e6, 5e9) * multibeam_transmission(1.1e9, 10e6, 5.8e9)
    assert abs(extinction_db(chain, 1.1e9) + 10 * math.log10(oracle)) < 1.0
    assert extinction_db(chain, 1.1e9) >= 80.0


def test_peak_transmission_and_drift(chain):
    assert chain_transmission(chain, 0.0) == pytest.approx(0.50, abs=5e-4)
    assert chain.peak_transmission == pytest.approx(0.707 ** 2)
    assert chain_transmission(chain, 0.0, elapsed=3.0) == pytest.approx(
        0.85 * chain_transmission(chain, 0.0))
    assert chain_transmission(chain, 0.0, elapsed=2.5) == chain_transmission(chain, 0.0)


def test_vectorised_transmission(chain):
    offsets = np.linspace(-1e9, 1e9, 11)
    vec = chain_transmission(chain, offsets)
    assert vec.shape == offsets.shape
    assert np.allclose(vec, [chain_transmission(chain, o) for o in offsets])
    drift = DriftLaw().factor(np.array([0.0, 2.5, 2.6]))
    assert drift.tolist() == [1.0, 1.0, 0.85]


def test_extinction_floor():
    floored = FilterChain((FabryPerotStage(10e6, 5e9),), extinction_floor=1e-4)
    assert chain_transmission(floored, 1.1e9) == 1e-4


def test_invalid_filters():
    with pytest.raises(DomainError):
        FabryPerotStage(10e9, 5e9)
    with pytest.raises(DomainError):
        FabryPerotStage(10e6, 5e9, 1.5)
    with pytest.raises(DomainError):
        FilterChain(())
    with pytest.raises(DomainError):
        DriftLaw().factor(-1.0)


@given(st.floats(-2e10, 2e10))
def test_transmission_bounded(offset):
    stage = FabryPerotStage(10e6, 5e9, 0.9)
    assert 0.0 < stage_transmission(stage, offset) <= 0.9 + 1e-15


def test_sweep_response_peaks(chain, device):
    mech = device.mechanical
    assert sweep_response(chain, mech, OMEGA_M) == pytest.approx(1.0)
    assert sweep_response(chain, mech, -OMEGA_M) == pytest.approx(1.0)
    for delta in (1e6, 4e6, 15e6):
        lo = sweep_response(chain, mech, OMEGA_M - delta)
        hi = sweep_response(chain, mech, OMEGA_M + delta)
        assert lo == pytest.approx(hi, rel=1e-6)
        assert lo < 1.0


def test_sweep_fwhm_matches_convolution_oracle(chain, device):
    mech = device.mechanical
    half = optimize.brentq(lambda d: sweep_response(chain, mech, OMEGA_M + d) - 0.5,
                           1e5, 50e6, xtol=1.0)
    assert 2 * half == pytest.approx(ORACLE_SWEEP_FWHM, rel=0.02)


def test_sweep_table(chain, device):
    table = sweep_table(chain, device.mechanical, [-OMEGA_M, OMEGA_M, OMEGA_M + 5e6])
    assert table.shape == (3, 2)
    assert table[0, 1] == pytest.approx(1.0)
    assert table[2, 1] < 1.0


def test_sweep_response_bad_branch(chain):
    with pytest.raises(ValueError):
        sweep_response(chain, MechanicalMode(OMEGA_M, 6e6), OMEGA_M, "green")
