"""SSH chain: electronic Hamiltonian, ground-state geometry, normal modes and
Wigner sampling of lattice initial conditions.

Units throughout are eV, fs and Angstrom; fields are in V/Angstrom and the
elementary charge enters as ``e_charge`` (1 by default) so that ``x * E`` is
an energy in eV.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import minimize

HBAR = 0.6582119569  # eV fs
RIGID_MASS_FACTOR = 1.0e6


class ConvergenceError(RuntimeError):
    """Raised when the geometry optimizer does not reach its gradient target."""


@dataclass(frozen=True)
class WireParams:
    """Physical constants of the oligomer and its contacts.

    ``coupling_strength`` is the ratio t_coup**2 / t_lead that sets the
    strength of the absorbing term; ``lead_hopping`` only matters for the
    finite-bandwidth validation path.
    """

    n_sites: int = 20
    t0: float = 2.5
    alpha: float = 4.1
    k_spring: float = 21.0
    mass: float = 1349.14
    lattice_const: float = 1.22
    e_charge: float = 1.0
    lead_hopping: float = 20.0
    coupling_strength: float = 0.1
    fermi_energy: float = 0.0

    def __post_init__(self):
        if self.n_sites < 4 or self.n_sites % 2:
            raise ValueError(f"n_sites must be even and >= 4, got {self.n_sites}")
        for name in ("t0", "k_spring", "mass", "lattice_const", "lead_hopping"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.coupling_strength >= 0:
            raise ValueError("coupling_strength must be non-negative")

    @property
    def t_coup(self) -> float:
        return float(np.sqrt(self.coupling_strength * self.lead_hopping))

    @property
    def n_occupied(self) -> int:
        return self.n_sites // 2

    def site_positions(self, u=None) -> np.ndarray:
        """Site coordinates measured from the middle of the wire."""
        n = np.arange(1, self.n_sites + 1)
        x = (n - 0.5 * (self.n_sites + 1)) * self.lattice_const
        return x if u is None else x + u


@dataclass
class LatticeState:
    """Displacements ``u`` and momenta ``p`` of all N sites (ends clamped)."""

    u: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.u.shape != self.p.shape or self.u.ndim != 1:
            raise ValueError("u and p must be 1-d arrays of equal length")

    @classmethod
    def at_rest(cls, u) -> "LatticeState":
        u = np.asarray(u, dtype=float)
        return cls(u.copy(), np.zeros_like(u))

    def mirrored(self) -> "LatticeState":
        """Reflection n -> N+1-n, which also flips the sign of displacements."""
        return LatticeState(-self.u[::-1].copy(), -self.p[::-1].copy())


@dataclass
class NormalModes:
    frequencies: np.ndarray  # fs^-1, ascending
    modeshapes: np.ndarray  # (N-2, N-2), columns are modes over free sites
    ground_geometry: np.ndarray  # u*, length N
    hessian: np.ndarray = field(repr=False, default=None)

    @property
    def zero_point_energy(self) -> float:
        return float(0.5 * HBAR * self.frequencies.sum())


def _check_dims(params: WireParams, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (params.n_sites,):
        raise ValueError(f"expected {params.n_sites} displacements, got shape {u.shape}")
    return u


def hopping(params: WireParams, u) -> np.ndarray:
    """Bond hoppings -t0 + alpha (u_{n+1} - u_n), length N-1."""
    return -params.t0 + params.alpha * np.diff(u)


def onsite(params: WireParams, u, field_value: float) -> np.ndarray:
    return params.e_charge * field_value * params.site_positions(u)


def build_electronic_hamiltonian(params: WireParams, state, field_value: float = 0.0) -> np.ndarray:
    """Dense real-symmetric tight-binding matrix of the wire.

    ``state`` may be a LatticeState or a displacement vector.
    """
    u = _check_dims(params, getattr(state, "u", state))
    off = hopping(params, u)
    h = np.diag(onsite(params, u, field_value))
    h += np.diag(off, 1) + np.diag(off, -1)
    return h


def electronic_levels(params: WireParams, u, field_value: float = 0.0, vectors=False):
    u = _check_dims(params, u)
    d = onsite(params, u, field_value)
    e = hopping(params, u)
    if vectors:
        return eigh_tridiagonal(d, e)
    return eigh_tridiagonal(d, e, eigvals_only=True)


def band_gap(params: WireParams, u, field_value: float = 0.0) -> float:
    w = electronic_levels(params, u, field_value)
    k = params.n_occupied
    return float(w[k] - w[k - 1])


def elastic_energy(params: WireParams, u) -> float:
    return 0.5 * params.k_spring * float(np.sum(np.diff(u) ** 2))


def total_ground_energy(params: WireParams, u) -> float:
    """Doubly occupied lower half of the spectrum plus the spring energy, E=0."""
    u = _check_dims(params, u)
    w = electronic_levels(params, u)
    return 2.0 * float(w[: params.n_occupied].sum()) + elastic_energy(params, u)


def ground_gradient(params: WireParams, u) -> np.ndarray:
    """Analytic dE/du_n over all sites (Hellmann-Feynman, E=0).

    Entries at the clamped ends are returned too; callers usually drop them.
    """
    u = _check_dims(params, u)
    w, v = electronic_levels(params, u, vectors=True)
    occ = v[:, : params.n_occupied]
    bond_rho = 2.0 * np.sum(occ[:-1] * occ[1:], axis=1)  # rho_{n,n+1}
    g = np.zeros(params.n_sites)
    g[1:] += 2.0 * params.alpha * bond_rho
    g[:-1] -= 2.0 * params.alpha * bond_rho
    du = np.diff(u)
    g[:-1] -= params.k_spring * du
    g[1:] += params.k_spring * du
    return g


def _embed(params, free):
    u = np.zeros(params.n_sites)
    u[1:-1] = free
    return u


def free_hessian(params: WireParams, u, step: float = 1e-4) -> np.ndarray:
    """Central finite differences of the analytic gradient over free sites."""
    u = _check_dims(params, u)
    n = params.n_sites - 2
    hess = np.empty((n, n))
    for i in range(n):
        du = np.zeros(params.n_sites)
        du[i + 1] = step
        hess[i] = (ground_gradient(params, u + du)[1:-1] - ground_gradient(params, u - du)[1:-1]) / (2 * step)
    return hess


def staggered_seed(params: WireParams, amplitude: float = 0.05) -> np.ndarray:
    """Alternating displacements with short (double) bonds at both chain ends."""
    u = amplitude * (-1.0) ** np.arange(1, params.n_sites + 1)
    u[0] = u[-1] = 0.0
    return u


def optimize_geometry(params: WireParams, seed_amplitude: float = 0.05, gtol: float = 1e-8,
                      max_newton: int = 20, initial=None) -> LatticeState:
    """Minimize the ground-state energy over the free displacements.

    BFGS from a staggered seed (or from ``initial``), followed by Newton
    polishing with the finite-difference Hessian until the max-norm gradient
    is below ``gtol``.  A start that already meets ``gtol`` is returned as is.
    """
    def fun(free):
        return total_ground_energy(params, _embed(params, free))

    def jac(free):
        return ground_gradient(params, _embed(params, free))[1:-1]

    if initial is None:
        free = staggered_seed(params, seed_amplitude)[1:-1]
    else:
        free = _check_dims(params, initial)[1:-1].copy()
    if np.abs(jac(free)).max() >= gtol:
        free = minimize(fun, free, jac=jac, method="BFGS", options={"gtol": 1e-9, "maxiter": 5000}).x
    for _ in range(max_newton):
        g = jac(free)
        if np.abs(g).max() < gtol:
            break
        hess = free_hessian(params, _embed(params, free))
        free = free - np.linalg.solve(0.5 * (hess + hess.T), g)
    g = jac(free)
    if np.abs(g).max() >= gtol:
        raise ConvergenceError(f"gradient max-norm {np.abs(g).max():.3e} eV/A after polishing")
    return LatticeState.at_rest(_embed(params, free))


def normal_mode_analysis(params: WireParams, ground: LatticeState, step: float = 1e-4) -> NormalModes:
    u = _check_dims(params, ground.u)
    hess = free_hessian(params, u, step)
    hess = 0.5 * (hess + hess.T)
    evals, vecs = np.linalg.eigh(hess / params.mass)
    if evals.min() < -1e-8:
        raise ValueError(f"Hessian has a negative eigenvalue {evals.min():.3e}; geometry is not a minimum")
    return NormalModes(np.sqrt(np.clip(evals, 0.0, None)), vecs, u.copy(), hess)


def wigner_widths(params: WireParams, modes: NormalModes):
    """Standard deviations of mode coordinates and momenta in the T=0 Wigner function."""
    sigma_q = np.sqrt(HBAR / (2.0 * params.mass * modes.frequencies))
    sigma_p = np.sqrt(HBAR * params.mass * modes.frequencies / 2.0)
    return sigma_q, sigma_p


def sample_wigner(params: WireParams, modes: NormalModes, rng_seed) -> LatticeState:
    """Draw one lattice initial condition from the ground-state Wigner distribution.

    The harmonic T=0 distribution is a product of Gaussians in mode
    coordinates, so it is sampled directly.
    """
    rng = np.random.default_rng(rng_seed)
    sigma_q, sigma_p = wigner_widths(params, modes)
    q = rng.normal(size=sigma_q.size) * sigma_q
    pk = rng.normal(size=sigma_p.size) * sigma_p
    u = modes.ground_geometry.copy()
    p = np.zeros(params.n_sites)
    u[1:-1] += modes.modeshapes @ q
    p[1:-1] = modes.modeshapes @ pk
    u[0] = u[-1] = 0.0
    return LatticeState(u, p)


def lattice_energy(params: WireParams, state: LatticeState) -> float:
    """Adiabatic ground-state energy plus kinetic energy of the lattice."""
    return total_ground_energy(params, state.u) + float(np.sum(state.p ** 2)) / (2.0 * params.mass)


def make_rigid(params: WireParams) -> WireParams:
    return replace(params, mass=params.mass * RIGID_MASS_FACTOR)
