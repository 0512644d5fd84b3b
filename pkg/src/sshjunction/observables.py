"""Lead currents, deposited charge, rectification efficiency and dressed spectra.

Sign convention: currents and charges count electrons *entering* a lead,
so both are non-negative in this model (electrons only leave the wire).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .lattice import HBAR

ETA_THRESHOLD = 1e-6  # |e|
CSV_COLUMNS = ("t", "E", "jL", "jR", "qL", "qR")


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    field: np.ndarray
    j_L: np.ndarray
    j_R: np.ndarray
    q_L: np.ndarray
    q_R: np.ndarray
    dressed_levels: np.ndarray | None = None
    norms: np.ndarray | None = None  # per-orbital norms on the record grid
    seed: int | None = None

    @property
    def final_norm(self) -> float:
        """Electrons left in the wire (occupancy 2 per orbital)."""
        return float(2.0 * self.norms[-1].sum()) if self.norms is not None else math.nan

    def columns(self) -> dict:
        cols = {"t": self.times, "E": self.field, "jL": self.j_L, "jR": self.j_R,
                "qL": self.q_L, "qR": self.q_R}
        if self.dressed_levels is not None:
            for k in range(self.dressed_levels.shape[1]):
                cols[f"eps_{k + 1}"] = self.dressed_levels[:, k]
        return cols


@dataclass
class EnsembleSummary:
    times: np.ndarray
    mean: dict
    stderr: dict
    n_traj: int
    final_q_L: np.ndarray  # per trajectory, final deposited charge
    final_q_R: np.ndarray
    seeds: list = field(default_factory=list)

    @property
    def q_L(self) -> float:
        return float(self.final_q_L.mean())

    @property
    def q_R(self) -> float:
        return float(self.final_q_R.mean())

    @property
    def q_diff(self) -> float:
        return self.q_L - self.q_R

    @property
    def q_sum(self) -> float:
        return self.q_L + self.q_R

    @property
    def q_diff_stderr(self) -> float:
        return _scalar_stderr(self.final_q_L - self.final_q_R)

    @property
    def q_sum_stderr(self) -> float:
        return _scalar_stderr(self.final_q_L + self.final_q_R)

    @property
    def eta(self) -> float:
        return efficiency(self.q_L, self.q_R)

    @property
    def eta_stderr(self) -> float:
        """Delta-method error of the ratio of ensemble means."""
        if self.n_traj < 2 or not math.isfinite(self.eta):
            return 0.0 if self.n_traj < 2 else math.nan
        d = self.final_q_L - self.final_q_R
        s = self.final_q_L + self.final_q_R
        lin = (d - self.eta * s) / self.q_sum
        return _scalar_stderr(lin)

    def scalars(self) -> dict:
        return {"n_traj": self.n_traj, "q_L": self.q_L, "q_R": self.q_R,
                "q_diff": self.q_diff, "q_diff_stderr": self.q_diff_stderr,
                "q_sum": self.q_sum, "q_sum_stderr": self.q_sum_stderr,
                "eta": self.eta, "eta_stderr": self.eta_stderr,
                "eta_defined": math.isfinite(self.eta)}


def _scalar_stderr(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def lead_current(rho, proj, beta: str, coupling_strength: float, switch: float = 1.0) -> float:
    """Electron current into lead ``beta`` in |e|/fs.

    (2/hbar) (t_coup^2/t_lead) s(t) sum_{n,m} Re{P_{nb,m} P_{n,nb} rho_{n,m}}
    """
    p = getattr(proj, "matrix", proj)
    nb = {"L": 0, "R": p.shape[0] - 1}[beta]
    val = p[:, nb] @ rho @ p[nb, :]
    return float(2.0 * coupling_strength * switch / HBAR * np.real(val))


def accumulate_charge(q_L: float, q_R: float, j_prev, j_now, dt_grid: float):
    """Trapezoidal update of (q_L, q_R) over one record interval."""
    return (q_L + 0.5 * dt_grid * (j_prev[0] + j_now[0]),
            q_R + 0.5 * dt_grid * (j_prev[1] + j_now[1]))


def cumulative_charge(times, current) -> np.ndarray:
    return cumulative_trapezoid(current, times, initial=0.0)


def efficiency(q_L: float, q_R: float, threshold: float = ETA_THRESHOLD) -> float:
    """(q_L - q_R)/(q_L + q_R); NaN when too little charge was deposited."""
    total = q_L + q_R
    if not total >= threshold:
        return math.nan
    return float((q_L - q_R) / total)


def dressed_spectrum(h_el, window: int | None = None, n_occupied: int | None = None) -> np.ndarray:
    """Ascending eigenvalues; ``window`` keeps that many levels each side of the gap."""
    h_el = np.asarray(h_el)
    if np.abs(h_el - h_el.conj().T).max() > 1e-12 * max(1.0, float(np.abs(h_el).max())):
        raise ValueError("Hamiltonian is not Hermitian")
    w = np.linalg.eigvalsh(h_el)
    if window is None:
        return w
    k = h_el.shape[0] // 2 if n_occupied is None else n_occupied
    return w[max(0, k - window):k + window]
