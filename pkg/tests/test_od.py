import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanofiber_tweezers.simkit import od

T = np.arange(1, 501) * 1e-3
# mpmath: 2 (0.053 * 7 e^{-21/21} + 0.006 * 106 e^{-21/146})
ORACLE_OD_2MW_21MS = 1.37455682933213


def test_model_value():
    p = od.reference_decay_params(2.0e-3)
    assert od.od_model(p, [21e-3])[0] == pytest.approx(ORACLE_OD_2MW_21MS, rel=1e-13)


@given(st.floats(0, 50), st.floats(0, 500), st.floats(0.1, 20))
def test_linear_in_atom_number(n1, n2, k):
    p = od.DecayParams(n1=n1, tau1=0.02, n2=n2, tau2=0.2)
    q = od.DecayParams(n1=k * n1, tau1=0.02, n2=k * n2, tau2=0.2)
    assert np.allclose(od.od_model(q, T), k * od.od_model(p, T), rtol=1e-12, atol=0)


def test_reference_counts_scale():
    assert od.ProbeNoise().reference_counts == pytest.approx(21454, rel=1e-3)


def test_noisy_trace_unbiased():
    p = od.DecayParams(n2=100, tau2=0.26)
    tr = od.simulate_od_decay(p, T, od.ProbeNoise(), np.random.default_rng(0))
    truth = od.od_model(p, T)
    n0 = od.ProbeNoise().reference_counts
    # delta-method variance of -ln(N / N_ref) for two Poisson counts
    sigma = np.sqrt((np.exp(truth) + 1) / n0)
    z = (tr.od_values - truth) / sigma
    assert abs(z.mean()) < 4 / np.sqrt(T.size)
    assert z.std() == pytest.approx(1.0, rel=0.1)


def test_noise_needs_rng():
    with pytest.raises(ValueError):
        od.simulate_od_decay(od.DecayParams(n2=1, tau2=1), T, od.ProbeNoise())


def test_spectrum_peak():
    t = od.transmission_spectrum(1.2, 1.0, [0.0, 0.5])
    assert t[0] == pytest.approx(np.exp(-1.2))
    assert t[1] == pytest.approx(np.exp(-0.6))


def test_trace_csv_round_trip(tmp_path):
    tr = od.simulate_od_decay(od.reference_decay_params(1.75e-3), T)
    tr.to_csv(tmp_path / "t.csv")
    back = od.OdTrace.from_csv(tmp_path / "t.csv")
    assert np.allclose(back.od_values, tr.od_values, rtol=1e-9)


def test_params_validation():
    with pytest.raises(ValueError):
        od.DecayParams(n1=-1)
    with pytest.raises(ValueError):
        od.DecayParams(n1=1, tau1=0.0)
    assert len(od.REFERENCE_DECAY_ROWS) == 8
