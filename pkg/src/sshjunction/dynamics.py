"""Mean-field (Ehrenfest) propagation of orbitals and lattice with absorbing leads.

Two routes compute the same equations of motion.  ``step`` and the helpers
around it are plain numpy, one function per physical operation, and serve as
the reference.  ``run_trajectory`` drives the compiled kernel in
``_kernel``, which fuses all stages of a step for production runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop853

from . import _kernel
from .fields import LaserPulse, OFF, field_value
from .lattice import HBAR, LatticeState, WireParams, build_electronic_hamiltonian, hopping, onsite
from .leads import build_gamma, build_projector, coupling_switch
from .observables import TrajectoryRecord, lead_current

N_STAGES = _dop853.N_STAGES
RK_A = np.ascontiguousarray(_dop853.A[:N_STAGES, :N_STAGES])
RK_B = np.ascontiguousarray(_dop853.B)
RK_C = np.ascontiguousarray(_dop853.C[:N_STAGES])

NORM_GROWTH_TOL = 1e-6
# A level swapping across the Fermi energy (e.g. the two end states of a
# long wire under a strong static-like field) makes P e_1 / P e_N jump on a
# time scale far below dt.  The jump is detected from the stage values of
# those columns departing from a straight line in time, and the step is
# bisected down to dt / 2**MAX_REFINE so the discontinuity sits in a tiny
# substep.
PROJECTOR_JUMP_TOL = 0.005
MAX_REFINE = 12


class StepRejected(RuntimeError):
    """An orbital norm grew during a step: the time step is too large."""


@dataclass
class OrbitalSet:
    amplitudes: np.ndarray  # (N, N/2) complex, column j = <n|eps_j>
    occupancy: float = 2.0

    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=0)


@dataclass
class TrajectoryState:
    lattice: LatticeState
    orbitals: OrbitalSet
    time: float = 0.0
    charges: np.ndarray = field(default_factory=lambda: np.zeros(2))  # deposited (q_L, q_R)

    def copy(self) -> "TrajectoryState":
        return TrajectoryState(LatticeState(self.lattice.u.copy(), self.lattice.p.copy()),
                               OrbitalSet(self.orbitals.amplitudes.copy(), self.orbitals.occupancy),
                               self.time, self.charges.copy())


def ground_orbitals(params: WireParams, u, field: float = 0.0) -> OrbitalSet:
    """Lowest N/2 eigenvectors of the wire Hamiltonian at geometry ``u``."""
    h = build_electronic_hamiltonian(params, u, field)
    w, v = np.linalg.eigh(h)
    return OrbitalSet(v[:, : params.n_occupied].astype(complex))


def initial_state(params: WireParams, lattice: LatticeState, pulse: LaserPulse = OFF) -> TrajectoryState:
    orbitals = ground_orbitals(params, lattice.u, field_value(pulse, 0.0))
    return TrajectoryState(LatticeState(lattice.u.copy(), lattice.p.copy()), orbitals, 0.0)


def density_matrix(orbitals: OrbitalSet) -> np.ndarray:
    """rho_{n,m} = sum_j f_j <eps_j|n><m|eps_j>."""
    psi = orbitals.amplitudes
    return orbitals.occupancy * (psi.conj() @ psi.T)


def nuclear_derivatives(params: WireParams, lattice: LatticeState, rho, field: float):
    """(du/dt, dp/dt); both vanish at the clamped end sites."""
    u = lattice.u
    n = params.n_sites
    du = lattice.p / params.mass
    dp = np.zeros(n)
    i = np.arange(1, n - 1)
    bond = np.real(np.diagonal(rho, 1))  # Re rho_{n,n+1}
    dp[i] = (-params.k_spring * (2 * u[i] - u[i + 1] - u[i - 1])
             + 2 * params.alpha * (bond[i] - bond[i - 1])
             - params.e_charge * field * (np.real(np.diagonal(rho))[i] - 1.0))
    du = du.copy()
    du[0] = du[-1] = 0.0
    return du, dp


def orbital_derivatives(params: WireParams, lattice: LatticeState, psi, field: float, gamma) -> np.ndarray:
    """d psi/dt from i hbar psi' = H psi - i (t_coup^2/t_lead) Gamma psi."""
    h = build_electronic_hamiltonian(params, lattice.u, field)
    g = gamma.matrix if hasattr(gamma, "matrix") else gamma
    return (-1j / HBAR) * (h @ psi - 1j * params.coupling_strength * (g @ psi))


def _rhs(params, pulse, t, u, p, psi, switch_ramp):
    lat = LatticeState(u, p)
    e = field_value(pulse, t)
    s = coupling_switch(t, switch_ramp)
    proj = build_projector(build_electronic_hamiltonian(params, u, e), params.fermi_energy)
    gamma = build_gamma(proj, s)
    orb = OrbitalSet(psi)
    rho = density_matrix(orb)
    du, dp = nuclear_derivatives(params, lat, rho, e)
    dpsi = orbital_derivatives(params, lat, psi, e, gamma)
    dq = np.array([lead_current(rho, proj, "L", params.coupling_strength, s),
                   lead_current(rho, proj, "R", params.coupling_strength, s)])
    return (du, dp, dpsi, dq), proj.matrix[:, [0, -1]]


def _rk(params, state, pulse, dt, switch_ramp):
    """Plain RK step; returns the new state and the projector-jump measure."""
    t = state.time
    y = (state.lattice.u, state.lattice.p, state.orbitals.amplitudes, state.charges)
    ks = []
    cols = []
    for i in range(N_STAGES):
        stage = [comp + dt * sum(RK_A[i, j] * ks[j][c] for j in range(i)) if i else comp
                 for c, comp in enumerate(y)]
        k, col = _rhs(params, pulse, t + RK_C[i] * dt, stage[0], stage[1], stage[2], switch_ramp)
        ks.append(k)
        cols.append(col)
    jump = _jump_measure(np.array(cols))
    new = [comp + dt * sum(RK_B[i] * ks[i][c] for i in range(N_STAGES)) for c, comp in enumerate(y)]
    new[0][0] = new[0][-1] = 0.0
    new[1][0] = new[1][-1] = 0.0
    out = TrajectoryState(LatticeState(new[0], new[1]), OrbitalSet(new[2], state.orbitals.occupancy),
                          t + dt, new[3])
    return out, jump


def _jump_measure(cols) -> float:
    """Largest departure of stage projector columns from linear-in-time behaviour."""
    first, last = np.argmin(RK_C), np.argmax(RK_C)
    x = ((RK_C - RK_C[first]) / (RK_C[last] - RK_C[first]))[:, None, None]
    lin = (1.0 - x) * cols[first] + x * cols[last]
    return float(np.abs(cols - lin).max())


def _check_growth(before: TrajectoryState, after: TrajectoryState, dt: float):
    growth = after.orbitals.norms() - before.orbitals.norms()
    if growth.max() > NORM_GROWTH_TOL:
        raise StepRejected(f"orbital norm grew by {growth.max():.2e} at t={before.time:.3f} fs (dt={dt})")


def step(params: WireParams, state: TrajectoryState, pulse: LaserPulse, dt: float,
         switch_ramp: float = 10.0) -> TrajectoryState:
    """One explicit order-8 Runge-Kutta step (DOP853 tableau, fixed step).

    The projector and Gamma are rebuilt at every stage from the stage-time
    field and stage displacements.  Deposited charges are carried along as
    two extra integration variables.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    out, _ = _rk(params, state, pulse, dt, switch_ramp)
    _check_growth(state, out, dt)
    return out


def advance(params: WireParams, state: TrajectoryState, pulse: LaserPulse, dt: float,
            switch_ramp: float = 10.0) -> TrajectoryState:
    """``step`` with bisection of steps across which the projector jumps."""
    def refine(st, h, depth):
        out, jump = _rk(params, st, pulse, h, switch_ramp)
        if jump > PROJECTOR_JUMP_TOL and depth < MAX_REFINE:
            return refine(refine(st, 0.5 * h, depth + 1), 0.5 * h, depth + 1)
        return out

    if not dt > 0:
        raise ValueError("dt must be positive")
    out = refine(state, dt, 0)
    out.time = state.time + dt
    _check_growth(state, out, dt)
    return out


def total_energy(params: WireParams, state: TrajectoryState, field: float = 0.0) -> float:
    """Mean-field electronic energy Tr(rho H) plus lattice kinetic and elastic energy."""
    h = build_electronic_hamiltonian(params, state.lattice.u, field)
    rho = density_matrix(state.orbitals)
    e_el = float(np.real(np.sum(rho * h)))  # sum_{nm} rho_{nm} H_{nm}, H real symmetric
    kin = float(np.sum(state.lattice.p ** 2)) / (2 * params.mass)
    ela = 0.5 * params.k_spring * float(np.sum(np.diff(state.lattice.u) ** 2))
    return e_el + kin + ela


def _grid(t_final: float, dt: float, record_interval: float):
    n_steps = int(round(t_final / dt))
    if not np.isclose(n_steps * dt, t_final, rtol=0, atol=1e-9 * max(1.0, t_final)):
        raise ValueError("t_final must be an integer multiple of dt")
    every = max(1, int(round(record_interval / dt)))
    if not np.isclose(every * dt, record_interval, rtol=1e-9) and record_interval > dt:
        raise ValueError("record_interval must be an integer multiple of dt")
    return n_steps, every


def run_trajectory(params: WireParams, initial: TrajectoryState, pulse: LaserPulse, t_final: float,
                   dt: float = 0.025, record_interval: float = 0.5, n_levels: int = 0,
                   switch_ramp: float = 10.0, engine: str = "compiled", seed=None):
    """Propagate from ``initial`` (at t=0) to ``t_final`` and record observables.

    Returns ``(record, final_state)``.  ``n_levels`` > 0 also records that
    many light-dressed levels on each side of the Fermi energy.
    ``engine="numpy"`` uses the reference ``step`` route.
    """
    n_steps, every = _grid(t_final, dt, record_interval)
    n_rec = n_steps // every + 1
    rec_steps = np.arange(n_rec) * every
    times = rec_steps * dt
    if engine == "numpy":
        return _run_numpy(params, initial, pulse, dt, n_steps, every, times, n_levels, switch_ramp, seed)
    if engine != "compiled":
        raise ValueError(f"unknown engine {engine!r}")

    stage_t = (np.arange(n_steps)[:, None] + RK_C[None, :]) * dt
    stage_field = np.ascontiguousarray(field_value(pulse, stage_t))
    stage_switch = np.ascontiguousarray(coupling_switch(stage_t, switch_ramp))
    rec_field = field_value(pulse, times)
    rec_switch = coupling_switch(times, switch_ramp)

    u = initial.lattice.u.copy()
    p = initial.lattice.p.copy()
    psi = np.ascontiguousarray(initial.orbitals.amplitudes, dtype=complex).copy()
    q = initial.charges.astype(float).copy()
    out = _kernel.allocate_records(n_rec, psi.shape[1], n_levels)
    prm = _kernel.pack_params(params, initial.orbitals.occupancy)
    k, r = 0, 0
    while True:
        status, k, r = _kernel.propagate(
            u, p, psi, q, prm, stage_field, stage_switch, rec_field, rec_switch, RK_A, RK_B, dt, RK_C, every,
            NORM_GROWTH_TOL, PROJECTOR_JUMP_TOL, n_levels, k, r, *out, *_kernel.zolotarev_tables())
        if status == 0:
            break
        if status != 3:
            raise StepRejected(f"{_kernel.STATUS[status]} at t={k * dt:.3f} fs (dt={dt})")
        before = np.sum(np.abs(psi) ** 2, axis=0)
        _refine_compiled(prm, pulse, switch_ramp, u, p, psi, q, k * dt, dt, 0)
        growth = np.sum(np.abs(psi) ** 2, axis=0) - before
        if growth.max() > NORM_GROWTH_TOL:
            raise StepRejected(f"orbital norm grew by {growth.max():.2e} at t={k * dt:.3f} fs (dt={dt})")
        k += 1
    j_l, j_r, q_l, q_r, norms, levels = out
    record = TrajectoryRecord(times, rec_field, j_l, j_r, q_l, q_r,
                              levels if n_levels else None, norms, seed=seed)
    final = TrajectoryState(LatticeState(u, p), OrbitalSet(psi, initial.orbitals.occupancy),
                            n_steps * dt, q)
    return record, final


def _refine_compiled(prm, pulse, switch_ramp, u, p, psi, q, t0, h, depth):
    """Compiled counterpart of ``advance``'s bisection for one flagged step."""
    times = t0 + RK_C * h
    fields = np.asarray(field_value(pulse, times), dtype=float)
    switches = np.asarray(coupling_switch(times, switch_ramp), dtype=float)
    saved = (u.copy(), p.copy(), psi.copy(), q.copy())
    jump = _kernel.single_step(u, p, psi, q, prm, fields, switches, RK_A, RK_B, RK_C, h)
    if jump > PROJECTOR_JUMP_TOL and depth < MAX_REFINE:
        for arr, keep in zip((u, p, psi, q), saved):
            arr[...] = keep
        _refine_compiled(prm, pulse, switch_ramp, u, p, psi, q, t0, 0.5 * h, depth + 1)
        _refine_compiled(prm, pulse, switch_ramp, u, p, psi, q, t0 + 0.5 * h, 0.5 * h, depth + 1)


def _observe(params, state, field, switch, n_levels):
    h = build_electronic_hamiltonian(params, state.lattice.u, field)
    proj = build_projector(h, params.fermi_energy)
    rho = density_matrix(state.orbitals)
    jl = lead_current(rho, proj, "L", params.coupling_strength, switch)
    jr = lead_current(rho, proj, "R", params.coupling_strength, switch)
    levels = None
    if n_levels:
        w = proj.eigen_energies
        k = params.n_occupied
        levels = w[k - n_levels:k + n_levels]
    return jl, jr, levels


def _run_numpy(params, initial, pulse, dt, n_steps, every, times, n_levels, switch_ramp, seed):
    n_rec = len(times)
    j_l, j_r, q_l, q_r = (np.zeros(n_rec) for _ in range(4))
    norms = np.zeros((n_rec, initial.orbitals.amplitudes.shape[1]))
    levels = np.zeros((n_rec, 2 * n_levels)) if n_levels else None
    rec_field = field_value(pulse, times)
    state = initial.copy()
    state.time = 0.0
    r = 0
    for k in range(n_steps + 1):
        if k % every == 0:
            jl, jr, lev = _observe(params, state, rec_field[r], coupling_switch(state.time, switch_ramp), n_levels)
            j_l[r], j_r[r] = jl, jr
            q_l[r], q_r[r] = state.charges
            norms[r] = state.orbitals.norms()
            if n_levels:
                levels[r] = lev
            r += 1
        if k < n_steps:
            state = advance(params, state, pulse, dt, switch_ramp)
    record = TrajectoryRecord(np.asarray(times), rec_field, j_l, j_r, q_l, q_r, levels, norms, seed=seed)
    return record, state
