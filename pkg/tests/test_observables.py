import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sshjunction import (WireParams, build_electronic_hamiltonian, build_projector, efficiency, lead_current,
                         make_rigid, preset, run_trajectory)
from sshjunction.dynamics import OrbitalSet, density_matrix, ground_orbitals, initial_state
from sshjunction.fields import field_value
from sshjunction.leads import Projector
from sshjunction.lattice import HBAR
from sshjunction.observables import (CSV_COLUMNS, accumulate_charge, cumulative_charge, dressed_spectrum)


def test_ground_state_current_vanishes(wire20, ground20):
    h = build_electronic_hamiltonian(wire20, ground20.u)
    rho = density_matrix(ground_orbitals(wire20, ground20.u))
    proj = build_projector(h)
    for beta in "LR":
        assert abs(lead_current(rho, proj, beta, 0.1)) < 1e-12


def test_identity_projector_current_is_end_density():
    psi = np.zeros((6, 1), dtype=complex)
    psi[0], psi[2], psi[5] = 0.5, 0.7, np.sqrt(1 - 0.74)
    rho = density_matrix(OrbitalSet(psi))
    proj = Projector(np.eye(6), np.zeros(6))
    assert np.isclose(lead_current(rho, proj, "L", 0.1), 2 * 0.1 / HBAR * 2 * 0.25)
    assert np.isclose(lead_current(rho, proj, "R", 0.1, 0.5), 0.5 * 2 * 0.1 / HBAR * 2 * 0.26)
    with pytest.raises(KeyError):
        lead_current(rho, proj, "X", 0.1)


def test_charge_accumulation():
    assert accumulate_charge(0.0, 1.0, (2.0, 0.0), (2.0, 4.0), 0.5) == (1.0, 2.0)
    t = np.linspace(0, 10, 101)
    assert np.isclose(cumulative_charge(t, np.full_like(t, 0.3))[-1], 3.0)


def test_efficiency():
    assert efficiency(0.4, 0.4) == 0.0
    assert efficiency(0.3, 0.0) == 1.0
    assert math.isnan(efficiency(1e-8, 0.0))


@given(st.floats(0, 10), st.floats(0, 10))
def test_efficiency_range(a, b):
    eta = efficiency(a, b)
    assert math.isnan(eta) or -1.0 <= eta <= 1.0


def test_recorded_charge_is_the_integral_of_the_current(wire20, ground20):
    p = make_rigid(wire20)
    pulse = preset("f4", omega=1.3)
    rec, _ = run_trajectory(p, initial_state(p, ground20, pulse), pulse, t_final=100.0, dt=0.025,
                            record_interval=0.05)
    for j, q in ((rec.j_L, rec.q_L), (rec.j_R, rec.q_R)):
        assert np.abs(cumulative_charge(rec.times, j) - q).max() < 1e-4 * q[-1]


def test_record_columns(wire20, ground20):
    p = make_rigid(wire20)
    rec, _ = run_trajectory(p, initial_state(p, ground20), preset("f3"), t_final=2.0, dt=0.05, n_levels=3)
    cols = rec.columns()
    assert tuple(cols)[:6] == CSV_COLUMNS
    assert [c for c in cols if c.startswith("eps")] == [f"eps_{k}" for k in range(1, 7)]
    assert rec.dressed_levels.shape == (len(rec.times), 6)
    assert np.isclose(rec.final_norm, 20.0)


def test_dressed_spectrum_window(wire20, ground20):
    h = build_electronic_hamiltonian(wire20, ground20.u)
    w = dressed_spectrum(h, window=2)
    assert w.shape == (4,)
    assert np.isclose(w[2] - w[1], 1.8, atol=0.05)
    with pytest.raises(ValueError):
        dressed_spectrum(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_stark_closure_is_quadratic(ground100, wire100):
    u = ground100[0].u
    gap0 = np.diff(dressed_spectrum(build_electronic_hamiltonian(wire100, u), window=1))[0]
    fields = np.geomspace(1e-5, 2e-3, 30)  # log-spaced: equal weight per decade of field
    shift = [gap0 - np.diff(dressed_spectrum(build_electronic_hamiltonian(wire100, u, e), window=1))[0]
             for e in fields]
    slope = np.polyfit(np.log(fields), np.log(shift), 1)[0]
    assert abs(slope - 2.0) < 0.1


def test_gap_is_smallest_where_the_field_is_largest(ground100, wire100):
    # below the amplitude at which the two middle levels meet (about 0.016 V/A)
    u = ground100[0].u
    pulse = preset("stark_plateau").scaled(0.5)
    t = np.linspace(500.0, 500.0 + 2 * np.pi * HBAR / pulse.omega, 400)
    e = field_value(pulse, t)
    gaps = [np.diff(dressed_spectrum(build_electronic_hamiltonian(wire100, u, x), window=1))[0] for x in e]
    assert np.argmin(gaps) == np.argmax(np.abs(e))
