import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, strategies as st

from sshjunction import (LatticeState, WireParams, build_electronic_hamiltonian, build_gamma, build_projector,
                         make_rigid, preset, run_trajectory, sample_wigner, step)
from sshjunction.dynamics import (OrbitalSet, StepRejected, TrajectoryState, _jump_measure, advance,
                                  density_matrix, ground_orbitals, initial_state, nuclear_derivatives,
                                  orbital_derivatives, total_energy, RK_C)
from sshjunction.fields import OFF
from sshjunction.lattice import HBAR
from sshjunction.leads import Projector

from conftest import random_geometry


def test_initial_orbitals_are_occupied_eigenvectors(wire20, ground20):
    orb = ground_orbitals(wire20, ground20.u)
    psi = orb.amplitudes
    h = build_electronic_hamiltonian(wire20, ground20.u)
    assert psi.shape == (20, 10)
    assert np.allclose(psi.conj().T @ psi, np.eye(10), atol=1e-12)
    energies = np.real(np.einsum("nj,nm,mj->j", psi.conj(), h, psi))
    assert np.all(energies <= wire20.fermi_energy)
    assert np.allclose(h @ psi, psi * energies, atol=1e-10)


def test_ground_density_matrix(wire20, ground20):
    rho = density_matrix(ground_orbitals(wire20, ground20.u))
    assert np.allclose(rho, rho.conj().T)
    assert np.isclose(np.trace(rho).real, 20)
    assert np.allclose(np.diag(rho).real, 1.0, atol=1e-10)
    half = rho / 2
    assert np.abs(half @ half - half).max() < 1e-10


def test_uniform_orbital_density():
    n = 8
    rho = density_matrix(OrbitalSet(np.full((n, 1), 1 / np.sqrt(n), dtype=complex)))
    assert np.allclose(rho, 2.0 / n)


def test_ground_state_is_stationary(wire20, ground20):
    rho = density_matrix(ground_orbitals(wire20, ground20.u))
    du, dp = nuclear_derivatives(wire20, ground20, rho, 0.0)
    assert np.abs(dp).max() < 1e-8 and np.all(du == 0)


def test_field_force_vanishes_for_neutral_sites(wire20, ground20):
    rho = np.eye(20, dtype=complex)
    _, dp0 = nuclear_derivatives(wire20, ground20, rho, 0.0)
    _, dp1 = nuclear_derivatives(wire20, ground20, rho, 0.05)
    assert np.array_equal(dp0, dp1)


def test_clamped_ends_feel_no_force(wire20, rng):
    lat = LatticeState(random_geometry(20, rng), rng.standard_normal(20))
    lat.p[[0, -1]] = 0.0
    rho = density_matrix(ground_orbitals(wire20, lat.u))
    du, dp = nuclear_derivatives(wire20, lat, rho, 0.02)
    assert du[0] == du[-1] == dp[0] == dp[-1] == 0.0
    # site 2 sees the clamped neighbour u_1 = 0
    k = wire20.k_spring
    bond = np.real(np.diagonal(rho, 1))
    expected = -k * (2 * lat.u[1] - lat.u[2]) + 2 * wire20.alpha * (bond[1] - bond[0]) - 0.02 * (rho[1, 1].real - 1)
    assert np.isclose(dp[1], expected)


@given(st.integers(2, 12), st.integers(0, 1000), st.floats(0.0, 1.0))
def test_absorbing_term_dissipates_norm(half, seed, switch):
    rng = np.random.default_rng(seed)
    p = WireParams(n_sites=2 * half)
    lat = LatticeState.at_rest(random_geometry(p.n_sites, rng))
    psi = rng.standard_normal((p.n_sites, 3)) + 1j * rng.standard_normal((p.n_sites, 3))
    gamma = build_gamma(build_projector(build_electronic_hamiltonian(p, lat.u, 0.01)), switch)
    dpsi = orbital_derivatives(p, lat, psi, 0.01, gamma)
    rate = 2 * np.real(np.sum(psi.conj() * dpsi, axis=0))
    expected = -(2 / HBAR) * p.coupling_strength * np.real(np.einsum("nj,nm,mj->j", psi.conj(), gamma.matrix, psi))
    assert np.allclose(rate, expected, atol=1e-12)
    assert np.all(rate <= 1e-12)


def test_end_site_absorber_decay_rate():
    p = WireParams(n_sites=8)
    psi = np.zeros((8, 1), dtype=complex)
    psi[0] = 0.6
    psi[3] = 0.8
    gamma = build_gamma(Projector(np.eye(8), np.zeros(8)), 1.0)
    dpsi = orbital_derivatives(p, LatticeState.at_rest(np.zeros(8)), psi, 0.0, gamma)
    rate = 2 * np.real(np.vdot(psi, dpsi))
    assert np.isclose(rate, -(2 / HBAR) * p.coupling_strength * 0.36)


def test_single_step_norm_loss_matches_analytic_rate(wire20, ground20, modes20):
    lat = sample_wigner(wire20, modes20, 5)
    rng = np.random.default_rng(1)
    psi = ground_orbitals(wire20, lat.u).amplitudes + 0.1 * rng.standard_normal((20, 10))
    psi /= np.linalg.norm(psi, axis=0)
    state = TrajectoryState(lat, OrbitalSet(psi), time=20.0)
    h = build_electronic_hamiltonian(wire20, lat.u)
    g = build_gamma(build_projector(h), 1.0).matrix
    rate = -(2 / HBAR) * wire20.coupling_strength * np.real(np.einsum("nj,nm,mj->j", psi.conj(), g, psi))
    n0 = state.orbitals.norms()
    h1, h2 = 1e-5, 2e-5
    d1 = (step(wire20, state, OFF, h1).orbitals.norms() - n0) / h1
    d2 = (step(wire20, state, OFF, h2).orbitals.norms() - n0) / h2
    assert np.abs(2 * d1 - d2 - rate).max() < 1e-8  # Richardson extrapolation of the step


def test_free_evolution_of_an_eigenvector_is_a_phase(wire20, ground20):
    p = make_rigid(replace(wire20, coupling_strength=0.0))
    state = initial_state(p, ground20)
    record, final = run_trajectory(p, state, OFF, t_final=100.0, dt=0.025, record_interval=5.0)
    ratio = final.orbitals.amplitudes / state.orbitals.amplitudes
    big = np.abs(state.orbitals.amplitudes) > 1e-3
    assert np.abs(np.abs(ratio[big]) - 1.0).max() < 1e-10
    assert np.abs(record.norms - 1.0).max() < 1e-10


def test_closed_flexible_dynamics_stays_orthonormal(wire20, modes20):
    p = replace(wire20, coupling_strength=0.0)
    state = initial_state(p, sample_wigner(p, modes20, 11))
    _, final = run_trajectory(p, state, preset("f3"), t_final=100.0, dt=0.025, record_interval=1.0)
    psi = final.orbitals.amplitudes
    assert np.abs(psi.conj().T @ psi - np.eye(10)).max() < 1e-8


def test_oversized_step_is_rejected(wire20, ground20):
    state = initial_state(wire20, ground20)
    state.time = 20.0
    state.orbitals.amplitudes[:] = np.linalg.qr(np.random.default_rng(0).standard_normal((20, 10)))[0]
    with pytest.raises(StepRejected):
        run_trajectory(wire20, state, OFF, t_final=20.0, dt=2.0, record_interval=2.0)
    with pytest.raises(ValueError):
        step(wire20, state, OFF, 0.0)


def test_grid_validation(wire20, ground20):
    state = initial_state(wire20, ground20)
    with pytest.raises(ValueError):
        run_trajectory(wire20, state, OFF, t_final=1.03, dt=0.05)
    with pytest.raises(ValueError):
        run_trajectory(wire20, state, OFF, t_final=1.0, dt=0.05, engine="fortran")


def test_rigid_field_free_ground_state_has_no_current(wire20, ground20):
    p = make_rigid(wire20)
    record, _ = run_trajectory(p, initial_state(p, ground20), OFF, t_final=100.0, dt=0.05)
    assert np.abs(record.j_L).max() < 1e-10 and np.abs(record.j_R).max() < 1e-10
    assert np.abs(record.q_L).max() < 1e-10 and np.abs(record.q_R).max() < 1e-10


def test_strong_short_pulse_rectifies(wire20, ground20):
    p = make_rigid(wire20)
    pulse = preset("f4", omega=1.3)
    record, _ = run_trajectory(p, initial_state(p, ground20, pulse), pulse, t_final=100.0, dt=0.05)
    assert abs(record.q_L[-1] - record.q_R[-1]) > 1e-3
    assert record.q_L[-1] + record.q_R[-1] > 1e-2


def test_mirror_image_swaps_the_leads(wire20, modes20):
    lat = sample_wigner(wire20, modes20, 3)
    pulse = preset("f4", omega=1.25, phi_2w=0.4, phi_w=0.1)
    flipped = replace(pulse, phi_w=pulse.phi_w + np.pi, phi_2w=pulse.phi_2w + np.pi)  # E -> -E
    a, _ = run_trajectory(wire20, initial_state(wire20, lat, pulse), pulse, t_final=80.0, dt=0.05)
    b, _ = run_trajectory(wire20, initial_state(wire20, lat.mirrored(), flipped), flipped, t_final=80.0, dt=0.05)
    assert np.allclose(a.field, -b.field, atol=1e-15)
    scale = max(np.abs(a.j_L).max(), np.abs(a.j_R).max())
    assert np.abs(a.j_L - b.j_R).max() < 1e-8 * scale
    assert np.abs(a.j_R - b.j_L).max() < 1e-8 * scale
    assert np.isclose(a.q_L[-1], b.q_R[-1], rtol=1e-7) and np.isclose(a.q_R[-1], b.q_L[-1], rtol=1e-7)


def test_compiled_and_reference_engines_agree(wire20, modes20):
    lat = sample_wigner(wire20, modes20, 8)
    pulse = preset("f4", omega=1.3, t_center=8.0, t_width=4.0)
    runs = [run_trajectory(wire20, initial_state(wire20, lat, pulse), pulse, t_final=15.0, dt=0.05,
                           record_interval=0.5, n_levels=2, engine=e) for e in ("compiled", "numpy")]
    (ra, fa), (rb, fb) = runs
    assert np.abs(fa.orbitals.amplitudes - fb.orbitals.amplitudes).max() < 1e-10
    assert np.abs(fa.lattice.p - fb.lattice.p).max() < 1e-10
    for name in ("j_L", "j_R", "q_L", "q_R", "norms", "dressed_levels"):
        assert np.allclose(getattr(ra, name), getattr(rb, name), rtol=1e-8, atol=1e-12), name


def test_norms_fall_and_charges_grow(wire20, modes20):
    lat = sample_wigner(wire20, modes20, 21)
    pulse = preset("f4", omega=1.2)
    record, _ = run_trajectory(wire20, initial_state(wire20, lat, pulse), pulse, t_final=100.0, dt=0.05,
                               record_interval=0.25)
    assert np.all(np.diff(record.norms, axis=0) <= 1e-8)
    on = record.times >= 10.0
    assert np.all(np.diff(record.q_L[on]) >= -1e-6) and np.all(np.diff(record.q_R[on]) >= -1e-6)
    lost = 2 * (10 - record.norms.sum(axis=1))
    assert np.abs(record.q_L + record.q_R - lost).max() < 1e-6


def test_time_step_convergence_on_short_pulse(wire20, ground20):
    p = make_rigid(wire20)
    pulse = preset("f3")
    q = []
    for dt in (0.025, 0.0125):
        record, _ = run_trajectory(p, initial_state(p, ground20, pulse), pulse, t_final=80.0, dt=dt)
        q.append(np.array([record.q_L[-1], record.q_R[-1]]))
    assert np.abs(q[0] - q[1]).max() < 1e-4


def test_field_free_lattice_oscillates_about_the_optimum(wire20, ground20, modes20):
    p = replace(wire20, coupling_strength=0.0)
    state = initial_state(p, sample_wigner(p, modes20, 2))
    alt = []
    for _ in range(100):
        _, state = run_trajectory(p, state, OFF, t_final=5.0, dt=0.05, record_interval=5.0)
        state.time = 0.0
        alt.append(np.abs(np.diff(state.lattice.u)).mean())
    reference = np.abs(np.diff(ground20.u)).mean()
    assert abs(np.mean(alt) / reference - 1.0) < 0.1


def test_energy_is_conserved_without_field_and_leads(wire20, modes20):
    p = replace(wire20, coupling_strength=0.0)
    state = initial_state(p, sample_wigner(p, modes20, 4))
    e0 = total_energy(p, state)
    _, final = run_trajectory(p, state, OFF, t_final=20.0, dt=0.025, record_interval=1.0)
    assert abs(total_energy(p, final) / e0 - 1.0) < 1e-8


def test_jump_measure():
    x = RK_C[:, None, None]
    smooth = np.concatenate([1 + 0.1 * x, -0.3 * x], axis=2)
    assert _jump_measure(smooth) < 1e-14
    jump = smooth.copy()
    jump[RK_C > 0.5] += 0.2
    assert _jump_measure(jump) > 0.05


def test_advance_equals_step_on_smooth_dynamics(wire20, modes20):
    lat = sample_wigner(wire20, modes20, 9)
    state = initial_state(wire20, lat)
    state.time = 12.0
    a = step(wire20, state, preset("f4", t_center=12.0), 0.05)
    b = advance(wire20, state, preset("f4", t_center=12.0), 0.05)
    assert np.array_equal(a.orbitals.amplitudes, b.orbitals.amplitudes)
    assert b.time == pytest.approx(12.05)
