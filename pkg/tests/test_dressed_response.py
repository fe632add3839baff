import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfmix.dressed_response import (chi1_ratio, chi4_ratio, chi4nl_ratio, df_resonance_omega1,
                                    fwm_denominator, induced_resonance, p_factors, response)
from dfmix.quantum_scheme import FieldSet, SchemeError, fig1c_inset_fields

finite = st.floats(-2e5, 2e5, allow_nan=False)
rabi = st.floats(0.0, 5e4, allow_nan=False)
vel = st.floats(-3000.0, 3000.0, allow_nan=False)


def make_fields(scheme, g12=0.0, g23p=0.0, g23m=0.0, omega2=0.0, omega3p=0.0, omega3m=0.0):
    return FieldSet.from_scheme(scheme, g12=g12, g23p=g23p, g23m=g23m,
                                omega2=omega2, omega3p=omega3p, omega3m=omega3m)


def test_p01_at_rest_on_resonance(scheme):
    p = p_factors(scheme, make_fields(scheme), 0.0, 0.0)
    assert p.p01 == 20.69 + 0j


def test_p01_detuned(scheme):
    p = p_factors(scheme, make_fields(scheme), 100.0, 0.0)
    assert p.p01 == pytest.approx(20.69 + 100j, abs=1e-12)


def test_p01_moving_atom(scheme):
    p = p_factors(scheme, make_fields(scheme), 0.0, 100.0)
    assert p.p01.real == 20.69
    assert p.p01.imag == pytest.approx(-100 / (661e-9) / 1e6, rel=1e-12)
    assert p.p01.imag == pytest.approx(-151.29, abs=0.01)


def test_p02tilde_composition(scheme, fig1b):
    p = p_factors(scheme, fig1b, 1000.0, 250.0)
    expect = p.p02 + fig1b.g12 ** 2 / p.p01 + fig1b.g23m ** 2 / p.p03m
    assert p.p02tilde == pytest.approx(expect, rel=1e-14)


def test_inconsistent_omega4_rejected(scheme, fig1b):
    with pytest.raises(SchemeError):
        p_factors(scheme, fig1b, 0.0, 0.0, omega4=123.0)


def test_nonpositive_width_rejected(scheme, fig1b):
    with pytest.raises(SchemeError):
        p_factors(scheme.replace(gamma02=0.0), fig1b, 0.0, 0.0)


def test_chi1_unity_at_resonance(scheme):
    assert chi1_ratio(p_factors(scheme, make_fields(scheme), 0.0, 0.0), make_fields(scheme)) == 1


def test_chi1_power_broadened_value(scheme):
    f = make_fields(scheme, g12=74.2)
    val = chi1_ratio(p_factors(scheme, f, 0.0, 0.0), f)
    expect = 20.69 * 2.38 / (20.69 * 2.38 + 74.2 ** 2)
    assert val == pytest.approx(expect, rel=1e-12)
    assert abs(val) == pytest.approx(0.00887, abs=1e-5)


def test_chi4_unity_and_single_lorentzian(scheme):
    f = make_fields(scheme)
    assert chi4_ratio(p_factors(scheme, f, 0.0, 0.0), f) == 1
    val = chi4_ratio(p_factors(scheme, f, 50.0, 0.0), f)
    assert val == pytest.approx(15.92 / (15.92 + 50j), rel=1e-14)


def test_chi4nl_normalization_and_far_wing(scheme):
    f = make_fields(scheme)
    assert chi4nl_ratio(p_factors(scheme, f, 0.0, 0.0), f) == 1
    # Omega1, Omega1 - Omega2 and Omega4 all equal to the same large detuning
    f = make_fields(scheme, omega2=0.0, omega3p=0.0)
    det = np.geomspace(10, 1e5, 50)
    mags = np.abs(chi4nl_ratio(p_factors(scheme, f, det, 0.0), f))
    assert np.all(np.diff(mags) < 0)
    assert mags[-1] < 1e-10


@settings(max_examples=200, deadline=None)
@given(g23m=rabi, g23p=rabi, om1=finite, om2=finite, om3p=finite, om3m=finite, v=vel)
def test_chi1_reduces_without_drive(scheme, g23m, g23p, om1, om2, om3p, om3m, v):
    f = make_fields(scheme, g12=0.0, g23p=g23p, g23m=g23m, omega2=om2, omega3p=om3p, omega3m=om3m)
    p = p_factors(scheme, f, om1, v)
    ref = p.gamma01 / p.p01
    assert abs(chi1_ratio(p, f) - ref) <= 1e-12 * abs(ref)


@settings(max_examples=200, deadline=None)
@given(g23p=rabi, om1=finite, om2=finite, om3p=finite, om3m=finite, v=vel)
def test_weak_field_limits(scheme, g23p, om1, om2, om3p, om3m, v):
    f = make_fields(scheme, g23p=g23p, omega2=om2, omega3p=om3p, omega3m=om3m)
    p = p_factors(scheme, f, om1, v)
    ref = p.gamma03 / p.p03
    assert abs(chi4_ratio(p, f) - ref) <= 1e-12 * abs(ref)
    d = p.p01 * p.p02 * p.p03
    assert abs(fwm_denominator(p, f) - d) <= 1e-12 * abs(d)


@settings(max_examples=100, deadline=None)
@given(g12=rabi, g23m=rabi, om1=finite, om2=finite, om3p=finite, om3m=finite, v=vel)
def test_responses_finite(scheme, g12, g23m, om1, om2, om3p, om3m, v):
    f = make_fields(scheme, g12=g12, g23p=5.0, g23m=g23m, omega2=om2, omega3p=om3p, omega3m=om3m)
    for which in ("chi1", "chi4", "chi4nl"):
        assert np.isfinite(response(scheme, f, om1, v, which))


def test_responses_broadcast(scheme, fig1c):
    om = np.linspace(2000, 3000, 7)[:, None]
    v = np.linspace(-800, 800, 5)[None, :]
    out = response(scheme, fig1c, om, v, "chi1")
    assert out.shape == (7, 5)
    assert out[3, 2] == pytest.approx(response(scheme, fig1c, om[3, 0], v[0, 2], "chi1"), rel=1e-14)


def test_unknown_selector(scheme, fig1c):
    with pytest.raises(ValueError):
        response(scheme, fig1c, 0.0, 0.0, "chi9")


def test_induced_resonance_without_dressing(scheme):
    f = make_fields(scheme, omega2=300.0)
    assert induced_resonance(scheme, f, 250.0) == pytest.approx((2.38, -50.0), abs=1e-12)


def test_control_light_shift(scheme, fig1b):
    # Omega1 = Omega2 puts the control detuning Omega4- at Omega3- = 73.2 GHz
    f = fig1b.with_control(rabi=25.2e3)
    only_control = FieldSet(f.E1, f.E2.__class__(**{**f.E2.__dict__, "rabi": 0.0}),
                            f.E3plus, f.E3minus)
    _, om_t = induced_resonance(scheme, only_control, 92.3e3)
    assert om_t == pytest.approx(-25.2e3 ** 2 / 73.2e3, rel=1e-3)
    assert om_t == pytest.approx(-8675.4, abs=1.0)


def test_drive_light_shift_is_small(scheme, fig1b):
    f = fig1b.without_control()
    _, om_t = induced_resonance(scheme, f, 92.3e3)
    assert abs(om_t) == pytest.approx(128.5 ** 2 / 92.3e3, rel=1e-3)
    assert abs(om_t) == pytest.approx(0.18, abs=0.005)


def test_df_resonance_zeroes_two_photon_detuning(scheme, fig1b):
    om1 = df_resonance_omega1(scheme, fig1b)
    gt, om_t = induced_resonance(scheme, fig1b, om1)
    assert abs(om_t) < 1e-6
    assert om1 == pytest.approx(100136.62, abs=0.01)
    assert gt == pytest.approx(3.9195, abs=1e-4)


def test_linear_doppler_coefficient(scheme, fig1b):
    # finite-difference slope of Im P02~ at v = 0 versus the linearized bracket
    om1 = df_resonance_omega1(scheme, fig1b.without_control())
    for g in (0.0, 10e3, 25.2e3, 40e3):
        f = fig1b.with_control(rabi=g)
        h = 1.0
        d = (p_factors(scheme, f, om1, h).p02tilde - p_factors(scheme, f, om1, -h).p02tilde).imag / (2 * h)
        k1, k2, k3 = f.E1.wavevector, f.E2.wavevector, abs(f.E3minus.wavevector)
        om4m = om1 - f.E2.detuning + f.E3minus.detuning
        b = (f.g12 ** 2 / om1 ** 2) * k1 + (1 + g ** 2 / om4m ** 2) * (k1 - k2) - (g ** 2 / om4m ** 2) * k3
        assert d == pytest.approx(-b * 1e3, rel=0.05, abs=0.05 * (k1 - k2) * 1e3)


def test_regression_chi4_fig1c(scheme, fig1c):
    om1 = df_resonance_omega1(scheme, fig1c)
    assert om1 == pytest.approx(2501.2045427675403, rel=1e-9)
    val = response(scheme, fig1c, om1, 0.0, "chi4")
    assert val == pytest.approx(9.398760868782115e-05 + 0.009670892889727018j, rel=1e-8)


def test_regression_chi4nl_fig1b(scheme, fig1b):
    om1 = df_resonance_omega1(scheme, fig1b)
    assert abs(response(scheme, fig1b, om1, 0.0, "chi4nl")) == pytest.approx(2.153209843345054e-07, rel=1e-8)


def test_inset_preset(scheme):
    f = fig1c_inset_fields(scheme)
    assert f.g12 == 742.2 and f.g23m == 0.0 and f.E3plus.detuning == 0.0
