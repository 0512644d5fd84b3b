import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sshjunction import LaserPulse, field_value, preset
from sshjunction.fields import PRESET_LABELS, canonical_phase, envelope, field_extent


def test_gaussian_peak_is_sum_of_amplitudes():
    # carriers are referenced to t = 0, so the peak equals the amplitude sum for T_c = 0
    p = LaserPulse(kind="gaussian", eps_w=0.02, eps_2w=0.01, omega=1.2, t_center=0.0, t_width=10.0)
    assert field_value(p, 0.0) == pytest.approx(0.03, rel=1e-14)
    shifted = replace(p, t_center=50.0)
    w = p.omega / 0.6582119569
    assert np.isclose(field_value(shifted, 50.0), 0.02 * np.cos(50 * w) + 0.01 * np.cos(100 * w))


def test_off_pulse_is_zero():
    assert field_value(LaserPulse(), 12.3) == 0.0
    assert np.all(field_value(LaserPulse(), np.linspace(0, 100, 11)) == 0.0)


@pytest.mark.parametrize("label, t_c, t_w, eps2", [("f1", 900, 300, 8.70e-3), ("f2", 900, 300, 4.00e-2),
                                                  ("f3", 50, 10, 8.70e-3), ("f4", 50, 10, 4.00e-2)])
def test_gaussian_presets(label, t_c, t_w, eps2):
    p = preset(label)
    assert (p.kind, p.t_center, p.t_width, p.eps_2w) == ("gaussian", t_c, t_w, eps2)
    assert np.isclose(p.eps_w / p.eps_2w, 2.82)
    assert p.phi_w == p.phi_2w == 0.0


def test_stark_presets():
    p = preset("stark_plateau")
    assert (p.kind, p.t_on, p.t_off, p.t_ramp, p.eps_2w, p.omega) == ("plateau", 300, 700, 100, 6.1e-3, 0.13)
    assert np.isclose(p.eps_w, 2 * p.eps_2w)
    g = preset("stark_gaussian")
    assert (g.kind, g.t_center, g.t_width, g.eps_2w, g.omega) == ("gaussian", 900, 300, 8.7e-3, 0.3)
    assert np.isclose(g.eps_w, 2 * g.eps_2w)


def test_preset_overrides_and_unknown_label():
    assert preset("f3", omega=1.1, phi_2w=0.5).omega == 1.1
    with pytest.raises(ValueError):
        preset("f9")
    assert set(PRESET_LABELS) == {"f1", "f2", "f3", "f4", "stark_plateau", "stark_gaussian"}


@pytest.mark.parametrize("kwargs", [dict(kind="gaussian", eps_w=-1e-3), dict(kind="gaussian", t_width=0.0),
                                    dict(kind="plateau", t_on=5.0, t_off=5.0), dict(kind="square")])
def test_invalid_pulses(kwargs):
    with pytest.raises(ValueError):
        LaserPulse(**kwargs)


def test_plateau_envelope_branches():
    p = preset("stark_plateau")
    t = np.array([200.0, 300.0, 500.0, 700.0, 800.0])
    assert np.allclose(envelope(p, t), [math.exp(-1), 1, 1, 1, math.exp(-1)])


def test_plateau_field_has_zero_mean():
    p = preset("stark_plateau")
    t = np.linspace(-field_extent(p), 2 * field_extent(p), 400_001)
    mean = np.trapezoid(field_value(p, t), t) / (t[-1] - t[0])
    assert abs(mean) < 1e-3 * p.eps_2w


@given(st.floats(-50, 50), st.sampled_from(["f1", "f3", "stark_plateau"]))
def test_two_pi_phase_shift_is_bit_identical(phi, label):
    p = preset(label, phi_2w=phi, phi_w=0.3 * phi)
    t = np.linspace(0.0, 1500.0, 301)
    assert np.array_equal(field_value(p, t), field_value(replace(p, phi_2w=phi + 2 * np.pi), t))
    assert np.array_equal(field_value(p, t), field_value(replace(p, phi_w=0.3 * phi - 2 * np.pi), t))


@given(st.floats(-100, 100))
def test_canonical_phase_range(phi):
    c = canonical_phase(phi)
    assert 0.0 <= c < 2 * np.pi
    assert abs(math.remainder(c - phi, 2 * np.pi)) < 1e-9


def test_relative_phase_helpers():
    p = preset("f1").with_relative_phase(1.0)
    assert p.relative_phase == 1.0 and p.phi_w == 0.0
    assert np.isclose(p.scaled(2.0).eps_w, 2 * p.eps_w)


def test_scalar_and_array_evaluation_agree():
    p = preset("f4")
    t = np.linspace(0, 100, 7)
    assert np.array_equal(field_value(p, t), [field_value(p, x) for x in t])
    assert isinstance(field_value(p, 3.0), float)
