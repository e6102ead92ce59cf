import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanofiber_tweezers.fibermode import (FiberSpec, ModeSolverError, MultimodeError, dispersion_residual,
                                          evanescent_intensity, silica_index, solve_he11, v_number)

LAM = 852.34727582e-9

# 30-digit mpmath solution of the same eigenvalue problem and profile
ORACLE_N_SILICA = 1.452461844590039
ORACLE_N_EFF = 1.01656986015935005
ORACLE_I = {190e-9: 0.285481806954089, 671e-9: 0.0366152804972332, 1150e-9: 0.00666779163741380}


@pytest.fixture(scope="module")
def mode():
    return solve_he11(FiberSpec.from_diameter(310e-9, LAM))


def test_silica_index():
    assert silica_index(LAM) == pytest.approx(ORACLE_N_SILICA, rel=1e-14)


def test_n_eff_against_oracle(mode):
    assert mode.n_eff == pytest.approx(ORACLE_N_EFF, rel=1e-13)
    assert mode.residual < 1e-10
    assert mode.V_number < 2.405


@pytest.mark.parametrize("d", sorted(ORACLE_I))
def test_profile_against_oracle(mode, d):
    assert evanescent_intensity(mode, d) == pytest.approx(ORACLE_I[d], rel=1e-10)


def test_profile_normalized_and_decreasing(mode):
    assert evanescent_intensity(mode, 0.0) == pytest.approx(1.0)
    assert np.all(np.diff(mode.profile) < 0)
    with pytest.raises(ValueError):
        evanescent_intensity(mode, -1e-9)


def test_root_stable_under_grid_refinement():
    spec = FiberSpec.from_diameter(310e-9, LAM)
    a = solve_he11(spec, n_scan=2000).n_eff
    b = solve_he11(spec, n_scan=4000).n_eff
    assert abs(a - b) < 1e-13


@given(st.floats(100e-9, 300e-9), st.floats(100e-9, 300e-9))
def test_n_eff_monotone_in_radius(r1, r2):
    lo, hi = sorted((r1, r2))
    n_lo = solve_he11(FiberSpec(lo, LAM)).n_eff
    n_hi = solve_he11(FiberSpec(hi, LAM)).n_eff
    assert n_lo <= n_hi + 1e-14


@given(st.floats(100e-9, 300e-9))
def test_dispersion_residual_small(r):
    m = solve_he11(FiberSpec(r, LAM))
    assert dispersion_residual(m.spec, m.n_eff) < 1e-8


def test_multimode_rejected_and_bulk_limit():
    spec = FiberSpec.from_diameter(20e-6, LAM)
    assert v_number(spec) > 2.405
    with pytest.raises(MultimodeError):
        solve_he11(spec)
    m = solve_he11(spec, allow_multimode=True)
    assert m.n_eff == pytest.approx(spec.index_core, abs=1e-3)


def test_invalid_specs():
    with pytest.raises(ValueError):
        FiberSpec(radius=-1.0, wavelength=LAM)
    with pytest.raises(ValueError):
        FiberSpec(radius=1e-7, wavelength=LAM, index_core=0.9)
    with pytest.raises(ValueError):
        solve_he11(FiberSpec(155e-9, LAM), tol=0.0)


def test_solver_error_is_runtime_error():
    assert issubclass(ModeSolverError, RuntimeError)
