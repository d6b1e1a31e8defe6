"""McLachlan variational time evolution.

The ansatz is prod_k exp(i theta_k R_k) |psi0>, parameter 1 applied first.
The parameter velocity solves M thetadot = V with

    M_kl = Re <d_k psi | d_l psi>,   V_k = Im <d_k psi | H | psi>,

and the Euler update advances theta by thetadot * dt / hbar.  This sign of
V makes a single generator equal to H reproduce exp(-i H t) exactly.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, product
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .exact import HamiltonianSource, hamiltonian_at, is_static
from .hamiltonians import HBAR_EV_FS
from .pauli import PauliString, PauliSum
from .sim import NOISELESS, Circuit, NoiseModel, exp_gate, hadamard_test, pauli_gate, run_circuit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Ansatz:
    psi0_prep: Circuit
    generators: tuple[PauliString, ...]
    layers: int = 1

    def __post_init__(self):
        gens = tuple(PauliString(str(g)) for g in self.generators)
        if not gens:
            raise ConfigError("ansatz needs at least one generator")
        if self.layers < 1:
            raise ConfigError("layers must be >= 1")
        for g in gens:
            if g.num_qubits != self.psi0_prep.num_qubits:
                raise ConfigError(f"generator {g} does not match the register width")
        object.__setattr__(self, "generators", gens)

    @property
    def num_qubits(self) -> int:
        return self.psi0_prep.num_qubits

    @property
    def parameter_generators(self) -> tuple[PauliString, ...]:
        return self.generators * self.layers

    @property
    def num_parameters(self) -> int:
        return len(self.generators) * self.layers

    def labels(self) -> list[str]:
        return [f"L{i // len(self.generators) + 1}:{g}" for i, g in enumerate(self.parameter_generators)]

    def gates(self, theta) -> list:
        theta = self._check(theta)
        return [exp_gate(g, a) for g, a in zip(self.parameter_generators, theta)]

    def circuit(self, theta) -> Circuit:
        return Circuit(self.num_qubits, tuple(self.gates(theta)))

    def state(self, theta) -> np.ndarray:
        return run_circuit(self.psi0_prep + self.circuit(theta))

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.num_parameters:
            raise ConfigError(f"expected {self.num_parameters} parameters, got {theta.size}")
        if not np.all(np.isfinite(theta)):
            raise NumericalError("non-finite variational parameters")
        return theta


def make_default_ansatz(num_qubits: int, layers: int = 1, psi0_prep: Circuit | None = None) -> Ansatz:
    """All single-qubit then all two-qubit Pauli generators, per layer.

    Two-qubit generators run over qubit pairs (m, n), m < n, and then over
    axis pairs in XYZ x XYZ order.
    """
    if num_qubits < 1:
        raise ConfigError("need at least one qubit")
    gens = [PauliString.from_ops(num_qubits, {q: a}) for q in range(num_qubits) for a in "XYZ"]
    for m, n in combinations(range(num_qubits), 2):
        for a, b in product("XYZ", repeat=2):
            gens.append(PauliString.from_ops(num_qubits, {m: a, n: b}))
    prep = psi0_prep if psi0_prep is not None else Circuit(num_qubits)
    return Ansatz(prep, tuple(gens), layers)


def hamiltonian_ansatz(h: PauliSum, psi0_prep: Circuit, layers: int = 1) -> Ansatz:
    """Generators are the non-identity terms of ``h`` in canonical order."""
    gens = tuple(s for _, s in h.without_identity())
    return Ansatz(psi0_prep, gens, layers)


@dataclass(frozen=True)
class ParameterVector:
    t: float
    theta: np.ndarray


@lru_cache(maxsize=4096)
def _pauli_matrix(p: PauliString) -> np.ndarray:
    return p.to_matrix()


def _gate_unitaries(ansatz: Ansatz, theta: np.ndarray) -> list[np.ndarray]:
    eye = np.eye(1 << ansatz.num_qubits)
    return [math.cos(a) * eye + 1j * math.sin(a) * _pauli_matrix(g)
            for g, a in zip(ansatz.parameter_generators, theta)]


def _tangents(ansatz: Ansatz, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Columns |d_k psi> = U_K..U_{k+1} (i R_k) U_k..U_1 |psi0>, and |psi>."""
    theta = ansatz._check(theta)
    units = _gate_unitaries(ansatz, theta)
    psi = run_circuit(ansatz.psi0_prep)
    fwd = []
    for u in units:
        psi = u @ psi
        fwd.append(psi)
    cols = [None] * len(units)
    suffix = np.eye(psi.size, dtype=complex)
    for k in range(len(units) - 1, -1, -1):
        cols[k] = suffix @ (1j * (_pauli_matrix(ansatz.parameter_generators[k]) @ fwd[k]))
        suffix = suffix @ units[k]
    return np.column_stack(cols), psi


def tangent_state(ansatz: Ansatz, theta, k: int) -> np.ndarray:
    """|d psi / d theta_k> (0-based ``k``)."""
    if not 0 <= k < ansatz.num_parameters:
        raise ConfigError(f"parameter index {k} out of range")
    return _tangents(ansatz, theta)[0][:, k]


def build_mv_analytic(ansatz: Ansatz, theta, h: PauliSum) -> tuple[np.ndarray, np.ndarray]:
    if not h.is_hermitian():
        raise ConfigError("Hamiltonian must be Hermitian")
    tangents, psi = _tangents(ansatz, theta)
    overlaps = tangents.conj().T @ tangents
    m = overlaps.real
    m = 0.5 * (m + m.T)
    v = (tangents.conj().T @ h.apply(psi)).imag
    return m, v


@dataclass(frozen=True)
class Backend:
    """How M and V are obtained.

    ``analytic``: exact statevector algebra.  ``sampled``: Hadamard-test
    circuits with ``shots`` samples (``shots=None`` gives the exact ancilla
    expectation).  ``noisy``: the same circuits on the density-matrix
    backend with depolarizing noise ``noise``.
    """

    kind: str = "analytic"
    shots: int | None = None
    seed: int | None = None
    noise: NoiseModel = NOISELESS

    def __post_init__(self):
        if self.kind not in ("analytic", "sampled", "noisy"):
            raise ConfigError(f"unknown backend {self.kind!r}")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if self.kind == "noisy" and self.noise.mode == "off":
            object.__setattr__(self, "noise", NoiseModel(self.noise.lam, "per_gate"))

    @classmethod
    def noisy(cls, lam: float, shots: int | None = 8192, seed=None, mode: str = "per_gate") -> Backend:
        return cls("noisy", shots, seed, NoiseModel(lam, mode))


@dataclass
class MVEstimate:
    m: np.ndarray
    v: np.ndarray
    m_sigma: np.ndarray
    v_sigma: np.ndarray


def build_mv_sampled(
    ansatz: Ansatz,
    theta,
    h: PauliSum,
    backend: Backend,
    rng: np.random.Generator | None = None,
    return_sigma: bool = False,
):
    """M and V from Hadamard-test circuits, one circuit per element and term.

    M_kl (k < l) uses branch0 = U_l..U_{k+1} R_k U_k..U_1 and
    branch1 = R_l U_l..U_1 at ancilla phase 0.  V_k sums c_j times the test
    with branch0 = U_K..R_k..U_1, branch1 = h_j U_K..U_1 at phase pi, which
    is -Re of the overlap.  Diagonal M_kk = <psi|R_k R_k|psi> = 1 is not
    measured.  With ``return_sigma`` the binomial standard errors are
    returned as well.
    """
    if backend.kind == "analytic":
        raise ConfigError("build_mv_sampled needs a sampled or noisy backend")
    if not h.is_hermitian():
        raise ConfigError("Hamiltonian must be Hermitian")
    theta = ansatz._check(theta)
    if rng is None:
        rng = np.random.default_rng(backend.seed)
    noise = backend.noise if backend.kind == "noisy" else NOISELESS
    shots = backend.shots
    n = ansatz.num_qubits
    gates = ansatz.gates(theta)
    gens = ansatz.parameter_generators
    K = len(gates)
    prep = ansatz.psi0_prep

    def measure(b0, b1, phi):
        seed = None if shots is None else int(rng.integers(2**63))
        z = hadamard_test(prep, Circuit(n, b0), Circuit(n, b1), phi, noise, shots, seed)
        var = 0.0 if shots is None else max(1 - z * z, 0.0) / shots
        return z, var

    m = np.eye(K)
    m_var = np.zeros((K, K))
    for k in range(K):
        for l in range(k + 1, K):
            b0 = gates[: k + 1] + [pauli_gate(gens[k])] + gates[k + 1: l + 1]
            b1 = gates[: l + 1] + [pauli_gate(gens[l])]
            z, var = measure(b0, b1, 0.0)
            m[k, l] = m[l, k] = z
            m_var[k, l] = m_var[l, k] = var
    v = np.zeros(K)
    v_var = np.zeros(K)
    for k in range(K):
        b0 = gates[: k + 1] + [pauli_gate(gens[k])] + gates[k + 1:]
        for c, s in h.without_identity():
            z, var = measure(b0, gates + [pauli_gate(s)], math.pi)
            v[k] += c.real * z
            v_var[k] += c.real**2 * var
    ident = h.identity_coefficient().real
    if ident != 0.0:
        # identity term: -c Re<psi|U..R_k..|psi>, measured like the others
        for k in range(K):
            b0 = gates[: k + 1] + [pauli_gate(gens[k])] + gates[k + 1:]
            z, var = measure(b0, list(gates), math.pi)
            v[k] += ident * z
            v_var[k] += ident**2 * var
    if return_sigma:
        return MVEstimate(m, v, np.sqrt(m_var), np.sqrt(v_var))
    return m, v


def solve_thetadot(m: np.ndarray, v: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Tikhonov solution argmin |M x - V|^2 + eps |x|^2."""
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float).reshape(-1)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != v.size:
        raise ConfigError("M must be square and match V")
    if eps < 0:
        raise ConfigError("eps must be >= 0")
    if eps == 0:
        try:
            return np.linalg.solve(m, v)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular M with eps=0") from exc
    if log.isEnabledFor(logging.DEBUG):
        log.debug("M singular values: %s", np.array2string(np.linalg.svd(m, compute_uv=False), precision=3))
    a = m.T @ m + eps * np.eye(m.shape[0])
    x = np.linalg.solve(a, m.T @ v)
    if not np.all(np.isfinite(x)):
        raise NumericalError("non-finite parameter velocity")
    return x


@dataclass
class VqaConfig:
    """Run settings; ``alpha`` relabels step times as dt/alpha."""

    dt: float
    total_time: float
    eps: float = 1e-6
    backend: Backend = field(default_factory=Backend)
    alpha: float = 1.0
    hbar: float = HBAR_EV_FS

    def __post_init__(self):
        if self.dt <= 0 or self.total_time < 0:
            raise ConfigError("dt must be positive and total_time non-negative")
        if self.eps < 0:
            raise ConfigError("eps must be >= 0")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")

    @property
    def num_steps(self) -> int:
        return int(round(self.total_time / self.dt))


def thetadot(ansatz: Ansatz, theta, h: PauliSum, config: VqaConfig, rng=None) -> np.ndarray:
    if config.backend.kind == "analytic":
        m, v = build_mv_analytic(ansatz, theta, h)
    else:
        m, v = build_mv_sampled(ansatz, theta, h, config.backend, rng)
    return solve_thetadot(m, v, config.eps)


def run_vqa(
    h_source: HamiltonianSource,
    ansatz: Ansatz,
    config: VqaConfig,
    theta0=None,
    t0: float = 0.0,
) -> tuple[list[ParameterVector], list[np.ndarray]]:
    """Euler-integrate theta and return parameters and states at every step.

    The Hamiltonian is evaluated at each step's start time with its identity
    component stripped; states are the ideal ansatz states for the recorded
    parameters.
    """
    theta = np.zeros(ansatz.num_parameters) if theta0 is None else ansatz._check(theta0).copy()
    rng = np.random.default_rng(config.backend.seed)
    dt_label = config.dt / config.alpha
    params = [ParameterVector(t0, theta.copy())]
    states = [ansatz.state(theta)]
    static_h = h_source.without_identity() if is_static(h_source) else None
    for step in range(config.num_steps):
        t_model = t0 + step * config.dt
        h = static_h if static_h is not None else hamiltonian_at(h_source, t_model).without_identity()
        theta = theta + thetadot(ansatz, theta, h, config, rng) * config.dt / config.hbar
        if not np.all(np.isfinite(theta)):
            raise NumericalError(f"parameters diverged at step {step + 1}")
        params.append(ParameterVector(t0 + (step + 1) * dt_label, theta.copy()))
        states.append(ansatz.state(theta))
    return params, states


def write_theta_csv(params: Sequence[ParameterVector], path, labels: Sequence[str] | None = None) -> None:
    k = params[0].theta.size
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t_fs"] + [f"theta_{i + 1}" for i in range(k)])
        for p in params:
            w.writerow([repr(float(p.t))] + [repr(float(x)) for x in p.theta])
    if labels is not None:
        log.debug("parameter order: %s", ", ".join(labels))


def read_theta_csv(path) -> list[ParameterVector]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return [ParameterVector(float(r[0]), np.array([float(x) for x in r[1:]])) for r in rows[1:] if r]
