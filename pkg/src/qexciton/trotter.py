"""First-order Trotter evolution."""

from __future__ import annotations

import numpy as np

from .analysis import Encoding, PopulationSeries, site_populations
from .errors import ConfigError
from .exact import HamiltonianSource, hamiltonian_at, is_static
from .hamiltonians import HBAR_EV_FS
from .pauli import PauliSum
from .sim import NOISELESS, Circuit, NoiseModel, apply_gate, counts_to_probabilities, exp_gate, num_qubits_of, sample_bitstrings, to_density


def trotter_step_circuit(h: PauliSum, dt: float, hbar: float = HBAR_EV_FS) -> Circuit:
    """prod_j exp(-i c_j h_j dt / hbar), first canonical term applied first."""
    if not h.is_hermitian():
        raise ConfigError("Trotter step needs a Hermitian Hamiltonian")
    if h.identity_coefficient() != 0:
        raise ConfigError("strip the identity term before building a Trotter step")
    gates = [exp_gate(s, -c.real * dt / hbar) for c, s in h]
    return Circuit(h.num_qubits, tuple(gates))


def _measured_populations(state, encoding, shots, rng):
    if shots is None:
        return site_populations(state, encoding)
    n = num_qubits_of(state)
    counts = sample_bitstrings(state, shots, rng)
    probs = counts_to_probabilities(counts, n)
    # feed the histogram back as a diagonal density matrix
    return site_populations(np.diag(probs).astype(complex), encoding)


def run_trotter(
    h_source: HamiltonianSource,
    psi0: np.ndarray,
    total_time: float,
    dt: float,
    encoding: Encoding,
    noise: NoiseModel = NOISELESS,
    shots: int | None = None,
    seed=None,
    hbar: float = HBAR_EV_FS,
    return_states: bool = False,
):
    """Populations after every Trotter step.

    With per-gate noise the state is a density matrix that accumulates one
    channel per gate, so the damping grows with the number of steps.  With
    ``shots`` the populations come from sampled histograms.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if total_time < 0:
        raise ConfigError("total_time must be non-negative")
    if noise.active and noise.mode != "per_gate":
        raise ConfigError("Trotter runs support per-gate noise only")
    steps = int(round(total_time / dt))
    rng = np.random.default_rng(seed)
    state = np.asarray(psi0, dtype=complex)
    if noise.active and state.ndim == 1:
        state = to_density(state)
    static = h_source.without_identity() if is_static(h_source) else None
    circuit = trotter_step_circuit(static, dt, hbar) if static is not None else None
    times = [0.0]
    pops = [_measured_populations(state, encoding, shots, rng)]
    states = [state]
    for k in range(steps):
        if static is None:
            circuit = trotter_step_circuit(hamiltonian_at(h_source, k * dt).without_identity(), dt, hbar)
        for g in circuit.gates:
            state = apply_gate(state, g, noise)
        times.append((k + 1) * dt)
        pops.append(_measured_populations(state, encoding, shots, rng))
        if return_states:
            states.append(state)
    series = PopulationSeries.from_populations(times, pops)
    return (series, states) if return_states else series
