"""Seeded Wigner ensembles of trajectories, run serially or in a process pool.

Every trajectory's seed is a pure function of ``(base_seed, index)`` and the
reduction is done in index order after all workers finish, so summaries do
not depend on the number of workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .dynamics import initial_state, run_trajectory
from .fields import LaserPulse
from .lattice import LatticeState, WireParams, make_rigid, normal_mode_analysis, optimize_geometry, sample_wigner
from .observables import EnsembleSummary, TrajectoryRecord

log = logging.getLogger(__name__)

CHANNELS = ("field", "j_L", "j_R", "q_L", "q_R")


class EnsembleError(RuntimeError):
    def __init__(self, index, seed, cause):
        super().__init__(f"trajectory {index} (seed {seed}) failed: {cause}")
        self.index = index
        self.seed = seed


@dataclass(frozen=True)
class EnsembleConfig:
    wire: WireParams
    pulse: LaserPulse
    n_traj: int = 1
    base_seed: int = 0
    t_final: float = 100.0
    dt: float = 0.025
    record_interval: float = 0.5
    rigid: bool = False
    n_levels: int = 0
    switch_ramp: float = 10.0

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.rigid and self.n_traj != 1:
            object.__setattr__(self, "n_traj", 1)

    @property
    def effective_wire(self) -> WireParams:
        return make_rigid(self.wire) if self.rigid else self.wire


def trajectory_seed(base_seed: int, index: int) -> int:
    """64-bit seed for trajectory ``index``, hashed from (base_seed, index)."""
    ss = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


@lru_cache(maxsize=16)
def ground_state(wire: WireParams):
    """Optimal geometry and its normal modes (cached per parameter set)."""
    ground = optimize_geometry(wire)
    return ground, normal_mode_analysis(wire, ground)


def initial_lattice(config: EnsembleConfig, index: int) -> LatticeState:
    ground, modes = ground_state(config.wire)
    if config.rigid:
        return LatticeState.at_rest(ground.u)
    return sample_wigner(config.wire, modes, trajectory_seed(config.base_seed, index))


def run_single(config: EnsembleConfig, index: int) -> TrajectoryRecord:
    seed = None if config.rigid else trajectory_seed(config.base_seed, index)
    try:
        lattice = initial_lattice(config, index)
        wire = config.effective_wire
        state = initial_state(wire, lattice, config.pulse)
        record, _ = run_trajectory(wire, state, config.pulse, config.t_final, config.dt,
                                   config.record_interval, config.n_levels, config.switch_ramp, seed=seed)
    except Exception as exc:  # noqa: BLE001 - rewrapped with the seed for reproduction
        raise EnsembleError(index, seed, exc) from exc
    return record


def _run_chunk(args):
    config, indices = args
    return [run_single(config, i) for i in indices]


def sampling_error(series) -> np.ndarray:
    """Standard error of the mean across trajectories (axis 0)."""
    series = np.asarray(series, dtype=float)
    n = series.shape[0]
    if n < 2:
        raise ValueError("sampling error needs at least two trajectories")
    return series.std(axis=0, ddof=1) / math.sqrt(n)


def summarize(records) -> EnsembleSummary:
    """Ordered reduction of trajectory records to means and standard errors."""
    records = list(records)
    n = len(records)
    stacks = {name: np.stack([getattr(r, name) for r in records]) for name in CHANNELS}
    stacks["norm"] = np.stack([2.0 * r.norms.sum(axis=1) for r in records])
    if records[0].dressed_levels is not None:
        stacks["levels"] = np.stack([r.dressed_levels for r in records])
    mean = {k: v.mean(axis=0) for k, v in stacks.items()}
    stderr = {k: (sampling_error(v) if n > 1 else np.zeros_like(v[0])) for k, v in stacks.items()}
    return EnsembleSummary(records[0].times.copy(), mean, stderr, n,
                           np.array([r.q_L[-1] for r in records]),
                           np.array([r.q_R[-1] for r in records]),
                           [r.seed for r in records])


def run_ensemble(config: EnsembleConfig, workers: int = 1, keep_records: bool = False):
    """Run all trajectories and return the ensemble summary.

    With ``keep_records`` the per-trajectory records are returned as well.
    """
    indices = list(range(config.n_traj))
    records: list[TrajectoryRecord] = []
    if workers <= 1 or config.n_traj == 1:
        for i in indices:
            records.append(run_single(config, i))
            log.info("trajectory %d/%d done (q_L=%.4g, q_R=%.4g)", i + 1, config.n_traj,
                     records[-1].q_L[-1], records[-1].q_R[-1])
    else:
        chunks = [indices[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(config, c) for c in chunks]))
        by_index = {}
        for chunk, part in zip(chunks, parts):
            by_index.update(zip(chunk, part))
        records = [by_index[i] for i in indices]
        log.info("%d trajectories done on %d workers", config.n_traj, workers)
    summary = summarize(records)
    return (summary, records) if keep_records else summary


def with_pulse(config: EnsembleConfig, pulse: LaserPulse) -> EnsembleConfig:
    return replace(config, pulse=pulse)
