"""Laser-driven electron transport along vibrating SSH wires between metallic leads."""

__version__ = "0.1.0"

from .fields import LaserPulse, field_value, preset
from .lattice import (
    HBAR,
    LatticeState,
    NormalModes,
    WireParams,
    band_gap,
    build_electronic_hamiltonian,
    make_rigid,
    normal_mode_analysis,
    optimize_geometry,
    sample_wigner,
    total_ground_energy,
)
from .leads import (
    build_gamma,
    build_projector,
    coupling_switch,
    finite_lead_oracle,
    lead_propagator_element,
    memory_kernel,
)
from .observables import EnsembleSummary, TrajectoryRecord, dressed_spectrum, efficiency, lead_current
from .dynamics import OrbitalSet, TrajectoryState, advance, initial_state, run_trajectory, step
from .ensemble import EnsembleConfig, run_ensemble, sampling_error, trajectory_seed
from .config import ExperimentConfig
