"""Lead embedding: memory kernel, lead propagator, Fermi-blocking projector,
absorbing Gamma matrix, and exact finite-lead references.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal, lu_factor, lu_solve
from scipy.special import j1, jv

from .fields import OFF, field_value
from .lattice import HBAR, WireParams, build_electronic_hamiltonian

DEGENERACY_TOL = 1e-9  # eV; levels this close to the Fermi energy count as blocked


@dataclass
class Projector:
    matrix: np.ndarray
    eigen_energies: np.ndarray

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))


@dataclass
class GammaMatrix:
    matrix: np.ndarray
    switch: float


def memory_kernel(t, t_lead: float):
    """Boundary autocorrelation 2 J1(z)/z of a semi-infinite chain, z = 2 t_lead t / hbar."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("memory kernel is defined for t >= 0")
    z = 2.0 * t_lead * t / HBAR
    small = z < 1e-8
    zs = np.where(small, 1.0, z)
    out = np.where(small, 1.0 - z ** 2 / 8.0, 2.0 * j1(zs) / zs)
    return float(out) if out.ndim == 0 else out


def _lead_side(beta: str, n_sites: int):
    if beta == "L":
        return 1
    if beta == "R":
        return n_sites
    raise ValueError(f"lead must be 'L' or 'R', got {beta!r}")


def lead_propagator_element(n: int, m: int, beta: str, t, t_lead: float, n_sites: int):
    """<n| exp(-i H_beta t / hbar) |m> for the isolated semi-infinite lead.

    Sites use the wire numbering: the left lead occupies n <= 0 and the right
    lead n >= N+1; the attachment sites n_beta (1 or N) are allowed and give
    the vanishing boundary values.
    """
    nb = _lead_side(beta, n_sites)
    if beta == "L" and (n > 1 or m > 1):
        raise ValueError("left-lead sites must satisfy n, m <= 0")
    if beta == "R" and (n < n_sites or m < n_sites):
        raise ValueError("right-lead sites must satisfy n, m >= N+1")
    z = 2.0 * t_lead * np.asarray(t, dtype=float) / HBAR
    k1, k2 = n - m, n + m - 2 * nb
    return (1j ** (k1 % 4)) * jv(k1, z) - (1j ** (k2 % 4)) * jv(k2, z)


def build_projector(h_el, fermi_energy: float = 0.0) -> Projector:
    """Projector onto instantaneous eigenstates strictly above the Fermi energy."""
    h_el = np.asarray(h_el)
    if h_el.ndim != 2 or h_el.shape[0] != h_el.shape[1]:
        raise ValueError("Hamiltonian must be square")
    scale = max(1.0, float(np.abs(h_el).max()))
    if np.abs(h_el - h_el.conj().T).max() > 1e-12 * scale:
        raise ValueError("Hamiltonian is not Hermitian")
    w, v = np.linalg.eigh(h_el)
    up = v[:, w > fermi_energy + DEGENERACY_TOL]
    return Projector(up @ up.conj().T, w)


def upper_half_projector(params: WireParams, u, field: float = 0.0) -> Projector:
    return build_projector(build_electronic_hamiltonian(params, u, field), params.fermi_energy)


def build_gamma(proj: Projector, switch: float = 1.0) -> GammaMatrix:
    """Gamma = switch * (P e1 e1^T P + P eN eN^T P)."""
    p = proj.matrix
    c1, cn = p[:, :1], p[:, -1:]
    g = c1 @ c1.conj().T + cn @ cn.conj().T
    return GammaMatrix(switch * g, float(switch))


def coupling_switch(t, ramp_duration: float = 10.0):
    """sin^2 ramp from 0 at t=0 to 1 at ``ramp_duration``; constant afterwards."""
    t_arr = np.asarray(t, dtype=float)
    if ramp_duration <= 0:
        out = np.ones_like(t_arr)
    else:
        x = np.clip(t_arr / ramp_duration, 0.0, 1.0)
        out = np.sin(0.5 * np.pi * x) ** 2
    return float(out) if np.ndim(t) == 0 else out


def absorbing_hamiltonian(params: WireParams, u, field: float = 0.0, proj=None, switch: float = 1.0):
    """Non-Hermitian H - i (t_coup^2/t_lead) Gamma; ``proj=None`` uses P = identity."""
    h = build_electronic_hamiltonian(params, u, field).astype(complex)
    if proj is None:
        proj = Projector(np.eye(params.n_sites), np.linalg.eigvalsh(h.real))
    return h - 1j * params.coupling_strength * build_gamma(proj, switch).matrix


@dataclass
class OracleResult:
    times: np.ndarray
    norm: np.ndarray  # molecular-region norm of each orbital, shape (T, n_orb)
    left: np.ndarray  # population that has entered the left lead
    right: np.ndarray


def reflection_time(params: WireParams, n_lead_sites: int) -> float:
    return n_lead_sites * HBAR / (2.0 * params.lead_hopping)


def _composite_chain(params: WireParams, u, n_lead_sites: int):
    """Tridiagonal (diag, offdiag) of lead-wire-lead with plain single-site couplings."""
    n = params.n_sites
    h_mol = build_electronic_hamiltonian(params, u)
    diag = np.zeros(2 * n_lead_sites + n)
    off = np.full(2 * n_lead_sites + n - 1, -params.lead_hopping)
    s = n_lead_sites
    off[s - 1] = -params.t_coup
    off[s + n - 1] = -params.t_coup
    off[s:s + n - 1] = np.diag(h_mol, 1)
    return diag, off


def finite_lead_oracle(params: WireParams, n_lead_sites: int, initial_orbitals, u=None, pulse=OFF,
                       t_final: float = 5.0, times=None) -> OracleResult:
    """Propagate wire orbitals on the explicit lead-wire-lead chain.

    The leads are ``n_lead_sites`` long, couple through single bonds t_coup
    and carry no projector.  The lattice is static.  Without a field the
    propagation is exact (eigendecomposition of the composite chain); with a
    field it is integrated with a tight-tolerance DOP853.
    """
    n = params.n_sites
    if t_final >= reflection_time(params, n_lead_sites):
        raise ValueError(
            f"t_final={t_final} fs reaches the lead reflection time "
            f"{reflection_time(params, n_lead_sites):.3f} fs; use more lead sites")
    u = np.zeros(n) if u is None else np.asarray(u, dtype=float)
    psi0 = np.asarray(initial_orbitals, dtype=complex)
    if psi0.ndim == 1:
        psi0 = psi0[:, None]
    if times is None:
        times = np.linspace(0.0, t_final, 201)
    s = n_lead_sites
    diag, off = _composite_chain(params, u, s)
    full0 = np.zeros((diag.size, psi0.shape[1]), dtype=complex)
    full0[s:s + n] = psi0

    if pulse.kind == "off":
        w, v = eigh_tridiagonal(diag, off)
        c0 = v.T @ full0
        states = [v @ (np.exp(-1j * w * t / HBAR)[:, None] * c0) for t in times]
    else:
        x = params.site_positions(u) * params.e_charge
        nrow = diag.size

        def rhs(t, y):
            psi = y.reshape(nrow, -1)
            hpsi = diag[:, None] * psi
            hpsi[:-1] += off[:, None] * psi[1:]
            hpsi[1:] += off[:, None] * psi[:-1]
            hpsi[s:s + n] += field_value(pulse, t) * x[:, None] * psi[s:s + n]
            return (-1j / HBAR * hpsi).ravel()

        sol = solve_ivp(rhs, (0.0, times[-1]), full0.ravel(), method="DOP853", t_eval=times,
                        rtol=1e-10, atol=1e-12)
        states = [sol.y[:, i].reshape(nrow, -1) for i in range(len(times))]

    dens = np.array([np.abs(st) ** 2 for st in states])
    return OracleResult(np.asarray(times), dens[:, s:s + n].sum(axis=1),
                        dens[:, :s].sum(axis=1), dens[:, s + n:].sum(axis=1))


def markovian_norm_history(params: WireParams, initial_orbitals, u=None, times=None, t_final: float = 5.0):
    """Norm decay under H - i c Gamma with P = identity (end-site absorbers), no field."""
    n = params.n_sites
    u = np.zeros(n) if u is None else np.asarray(u, dtype=float)
    psi0 = np.asarray(initial_orbitals, dtype=complex)
    if psi0.ndim == 1:
        psi0 = psi0[:, None]
    if times is None:
        times = np.linspace(0.0, t_final, 201)
    h_eff = absorbing_hamiltonian(params, u)
    w, v = np.linalg.eig(h_eff)
    c0 = np.linalg.solve(v, psi0)
    norms = [np.sum(np.abs(v @ (np.exp(-1j * w * t / HBAR)[:, None] * c0)) ** 2, axis=0) for t in times]
    return np.asarray(times), np.array(norms)


def nonmarkovian_norm_history(params: WireParams, initial_orbitals, u=None, t_final: float = 5.0,
                              dt: float = 2e-3):
    """Integrate the wire equation with the exact lead memory kernel (P = identity).

    i hbar psi' = H psi + (t_coup^2 / (i hbar)) sum_beta e_beta int_0^t K(t-s) psi_beta(s) ds

    Trapezoidal rule for both the time step and the convolution; second
    order in ``dt``.  Semi-infinite leads, so no reflections.
    """
    n = params.n_sites
    u = np.zeros(n) if u is None else np.asarray(u, dtype=float)
    psi = np.asarray(initial_orbitals, dtype=complex)
    if psi.ndim == 1:
        psi = psi[:, None]
    n_steps = int(round(t_final / dt))
    times = dt * np.arange(n_steps + 1)
    kern = memory_kernel(times, params.lead_hopping)
    h = build_electronic_hamiltonian(params, u)
    ends = [0, n - 1]
    tc2 = params.t_coup ** 2
    # psi' = A psi + B(t), B from memory; A = -i H / hbar
    a_mat = -1j * h / HBAR
    mem_coeff = -tc2 / HBAR ** 2  # (1/(i hbar)) * (t_c^2/(i hbar))
    # implicit part: memory integral's newest point carries weight dt/2 * K(0)
    implicit = a_mat.copy()
    for e in ends:
        implicit[e, e] += mem_coeff * 0.5 * dt * kern[0]
    lhs = lu_factor(np.eye(n) - 0.5 * dt * implicit)
    hist = np.zeros((n_steps + 1, 2, psi.shape[1]), dtype=complex)
    hist[0] = psi[ends]
    norms = np.empty((n_steps + 1, psi.shape[1]))
    norms[0] = np.sum(np.abs(psi) ** 2, axis=0)

    def memory(k, include_last):
        # trapezoid of K(t_k - s) psi_end(s) over s in [0, t_k], optionally without the s=t_k term
        if k == 0:
            return np.zeros((2, psi.shape[1]), dtype=complex)
        w = np.full(k + 1, dt)
        w[0] = w[-1] = 0.5 * dt
        kk = kern[k::-1] * w
        if not include_last:
            kk = kk.copy()
            kk[-1] = 0.0
        return np.einsum("s,sej->ej", kk, hist[:k + 1])

    def deriv_explicit(k, state):
        d = a_mat @ state
        mem = memory(k, include_last=True)
        for i, e in enumerate(ends):
            d[e] += mem_coeff * mem[i]
        return d

    f_prev = deriv_explicit(0, psi)
    for k in range(1, n_steps + 1):
        mem_partial = memory(k, include_last=False) if k > 0 else None
        rhs = psi + 0.5 * dt * f_prev
        for i, e in enumerate(ends):
            rhs[e] += 0.5 * dt * mem_coeff * mem_partial[i]
        psi = lu_solve(lhs, rhs)
        hist[k] = psi[ends]
        f_prev = deriv_explicit(k, psi)
        norms[k] = np.sum(np.abs(psi) ** 2, axis=0)
    return times, norms


def compare_markovian(params: WireParams, n_lead_sites: int = 400, t_final=None, orbital_index=None,
                      n_times: int = 241):
    """Relative deviation of the absorbing-potential norm from the finite-lead result.

    The wire is undimerized and static; the initial orbital is the lowest
    unoccupied eigenstate unless ``orbital_index`` is given.  Returns
    ``(times, exact, markov, window_mask, max_rel_dev)``; the window is
    t in [10 hbar/t_lead, t_final].
    """
    n = params.n_sites
    t_ref = reflection_time(params, n_lead_sites)
    if t_final is None:
        t_final = 0.95 * t_ref
    u = np.zeros(n)
    w, v = np.linalg.eigh(build_electronic_hamiltonian(params, u))
    k = params.n_occupied if orbital_index is None else orbital_index
    psi0 = v[:, k]
    times = np.linspace(0.0, t_final, n_times)
    exact = finite_lead_oracle(params, n_lead_sites, psi0, u=u, t_final=t_final, times=times).norm[:, 0]
    markov = markovian_norm_history(params, psi0, u=u, times=times)[1][:, 0]
    window = times >= 10.0 * HBAR / params.lead_hopping
    dev = np.abs(markov - exact) / exact
    max_dev = float(dev[window].max()) if window.any() else 0.0
    return times, exact, markov, window, max_dev
