"""Exciton energy transfer on simulated quantum circuits.

Pauli-encoded Frenkel and multi-exciton Hamiltonians, an exact propagator,
McLachlan variational dynamics, first-order Trotter evolution and the
time-dilation error mitigation built on top of them.
"""

__version__ = "0.1.0"

from .errors import ConfigError, NumericalError, QExcitonError
from .pauli import PauliString, PauliSum, matrix_to_pauli_sum, to_matrix
from .sim import Circuit, Gate, NoiseModel, run_circuit, hadamard_test
from .hamiltonians import (
    HBAR_EV_FS,
    FrenkelSnapshot,
    HamiltonianTrajectory,
    MoleculeElectronicSpec,
    build_fullspace,
    build_tfi,
    encode_frenkel_binary,
    frenkel_pauli_sum,
    section_v_model,
    synthesize_trajectory,
)
from .exact import evolve_exact
from .analysis import Encoding, EnsembleSpec, PopulationSeries, ensemble_average, ipr, site_populations
from .vqa import Ansatz, Backend, VqaConfig, build_mv_analytic, build_mv_sampled, hamiltonian_ansatz, make_default_ansatz, run_vqa
from .trotter import run_trotter, trotter_step_circuit
from .mitigation import MitigationResult, apply_alpha, extract_alpha, perturbation_diagnostics, windowed_alpha

__all__ = [name for name in dir() if not name.startswith("_")]
