import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanofiber_tweezers.core import (AtomSpec, DriveSpec, from_2pi_mhz, rabi_from_saturation,
                                     saturation_from_rabi, scattering_rate, to_2pi_mhz)

GAMMA = from_2pi_mhz(2.61)
pos = st.floats(1e-6, 1e4, allow_nan=False)


def test_rabi_at_unit_saturation():
    # gamma * sqrt(1/2) with gamma = 2pi x 2.61 MHz
    assert to_2pi_mhz(rabi_from_saturation(1.0, GAMMA)) == pytest.approx(2.61 / math.sqrt(2), rel=1e-15)


@given(pos)
def test_rabi_square_root_scaling(s):
    assert rabi_from_saturation(4 * s, GAMMA) == pytest.approx(2 * rabi_from_saturation(s, GAMMA), rel=1e-14)


@given(pos, pos)
def test_rabi_monotone(a, b):
    lo, hi = sorted((a, b))
    assert rabi_from_saturation(lo, GAMMA) <= rabi_from_saturation(hi, GAMMA)


@given(pos)
def test_saturation_rabi_inverse(s):
    assert saturation_from_rabi(rabi_from_saturation(s, GAMMA), GAMMA) == pytest.approx(s, rel=1e-12)


@given(st.floats(0, 1e6), st.floats(-1e10, 1e10), st.floats(1e3, 1e9))
def test_scattering_rate_even_and_bounded(s, delta, Gamma):
    r = scattering_rate(s, delta, Gamma)
    assert r == scattering_rate(s, -delta, Gamma)
    assert 0 <= r <= Gamma / 2


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_unit_round_trip(v):
    assert to_2pi_mhz(from_2pi_mhz(v)) == pytest.approx(v, rel=1e-15, abs=1e-300)


def test_vectorized_and_validation():
    out = rabi_from_saturation(np.array([0.0, 1.0, 4.0]), GAMMA)
    assert out[2] == pytest.approx(2 * out[1])
    with pytest.raises(ValueError):
        rabi_from_saturation(-1.0, GAMMA)
    with pytest.raises(ValueError):
        scattering_rate(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        AtomSpec(gamma_transverse=0.0)


def test_drive_spec_consistency():
    atom = AtomSpec.cesium_d2()
    omega = DriveSpec(1.0).rabi_for(atom)
    assert DriveSpec(1.0, rabi=omega).rabi_for(atom) == omega
    with pytest.raises(ValueError):
        DriveSpec(1.0, rabi=2 * omega).rabi_for(atom)


def test_cesium_natural_linewidth():
    assert to_2pi_mhz(AtomSpec.cesium_d2().Gamma_natural) == pytest.approx(5.22)
