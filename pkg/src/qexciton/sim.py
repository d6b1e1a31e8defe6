"""Statevector and density-matrix circuit execution.

States are plain numpy arrays: a 1-D array of ``2^L`` amplitudes is a pure
state, a 2-D ``2^L x 2^L`` array is a density matrix.  Only the density
backend can carry noise.

Gate conventions: ``exp`` is ``exp(i*alpha*P)`` with no half angle;
``rz`` is ``exp(-i*phi*Z/2)``.
"""

from __future__ import annotations

import csv
import difflib
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigError, NumericalError
from .pauli import PauliString, PauliSum

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)

GATE_KINDS = ("exp", "pauli", "h", "x", "rz", "cpauli", "cexp")


@dataclass(frozen=True)
class Gate:
    """One circuit instruction.

    ``pauli`` is a full-width string for the Pauli-based kinds; ``qubit`` is
    the target of ``h``/``x``/``rz`` or the control of ``cpauli``/``cexp``.
    """

    kind: str
    pauli: PauliString | None = None
    angle: float = 0.0
    qubit: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ConfigError(f"unknown gate kind {self.kind!r}")
        if self.kind in ("exp", "pauli", "cpauli", "cexp") and self.pauli is None:
            raise ConfigError(f"{self.kind} gate needs a Pauli string")
        if self.kind in ("h", "x", "rz", "cpauli", "cexp") and self.qubit is None:
            raise ConfigError(f"{self.kind} gate needs a qubit index")
        if self.kind in ("cpauli", "cexp") and self.pauli.letters[self.qubit] != "I":
            raise ConfigError("controlled gate acts on its own control qubit")

    def support(self) -> tuple[int, ...]:
        qs = set(self.pauli.support()) if self.pauli is not None else set()
        if self.qubit is not None:
            qs.add(self.qubit)
        return tuple(sorted(qs))

    def controlled(self, control: int) -> Gate:
        """Controlled version of a Pauli or Pauli-exponential gate."""
        if self.kind == "pauli":
            return Gate("cpauli", self.pauli, qubit=control)
        if self.kind == "exp":
            return Gate("cexp", self.pauli, self.angle, qubit=control)
        raise ConfigError(f"cannot control a {self.kind} gate")


def exp_gate(pauli, alpha: float) -> Gate:
    return Gate("exp", PauliString(str(pauli)), float(alpha))


def pauli_gate(pauli) -> Gate:
    return Gate("pauli", PauliString(str(pauli)))


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if g.pauli is not None and g.pauli.num_qubits != self.num_qubits:
                raise ConfigError(f"gate {g} does not match circuit width {self.num_qubits}")
            if g.qubit is not None and not 0 <= g.qubit < self.num_qubits:
                raise ConfigError(f"qubit index {g.qubit} out of range")

    def __add__(self, other: Circuit) -> Circuit:
        if other.num_qubits != self.num_qubits:
            raise ConfigError("circuit width mismatch")
        return Circuit(self.num_qubits, self.gates + other.gates)

    def __len__(self):
        return len(self.gates)

    def widened(self, extra: int) -> Circuit:
        """Same gates on a register with ``extra`` qubits appended at the end."""
        out = []
        for g in self.gates:
            p = PauliString(g.pauli.letters + "I" * extra) if g.pauli is not None else None
            out.append(Gate(g.kind, p, g.angle, g.qubit))
        return Circuit(self.num_qubits + extra, tuple(out))


def basis_prep(index: int, num_qubits: int) -> Circuit:
    """X gates that take ``|0...0>`` to basis state ``index``."""
    if not 0 <= index < 1 << num_qubits:
        raise ConfigError(f"basis index {index} out of range")
    gates = [Gate("x", qubit=q) for q in range(num_qubits) if (index >> (num_qubits - 1 - q)) & 1]
    return Circuit(num_qubits, tuple(gates))


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing noise with a single strength ``lam``.

    ``per_gate`` depolarizes the support of every gate; ``global_once``
    applies one global channel at the end of the circuit.
    """

    lam: float = 0.0
    mode: str = "off"

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"noise strength {self.lam} outside [0, 1]")
        if self.mode not in ("off", "per_gate", "global_once"):
            raise ConfigError(f"unknown noise mode {self.mode!r}")

    @property
    def active(self) -> bool:
        return self.mode != "off" and self.lam > 0.0


NOISELESS = NoiseModel()


def num_qubits_of(state: np.ndarray) -> int:
    n = state.shape[0].bit_length() - 1
    if 1 << n != state.shape[0]:
        raise ConfigError(f"state dimension {state.shape[0]} is not a power of two")
    return n


def zero_state(num_qubits: int) -> np.ndarray:
    psi = np.zeros(1 << num_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def basis_state(index: int, num_qubits: int) -> np.ndarray:
    psi = np.zeros(1 << num_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def to_density(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def _single_qubit(arr: np.ndarray, mat: np.ndarray, q: int, n: int) -> np.ndarray:
    shape = arr.shape
    t = arr.reshape((1 << q, 2, -1))
    return np.einsum("ij,ajb->aib", mat, t).reshape(shape)


def _control_mask(control: int, n: int, dim: int) -> np.ndarray:
    return ((np.arange(dim) >> (n - 1 - control)) & 1).astype(bool)


def _left(gate: Gate, arr: np.ndarray, n: int) -> np.ndarray:
    """Apply the gate unitary along axis 0."""
    k = gate.kind
    if k == "exp":
        return math.cos(gate.angle) * arr + 1j * math.sin(gate.angle) * gate.pauli.apply(arr)
    if k == "pauli":
        return gate.pauli.apply(arr)
    if k == "h":
        return _single_qubit(arr, _H, gate.qubit, n)
    if k == "x":
        return _single_qubit(arr, _X, gate.qubit, n)
    if k == "rz":
        half = gate.angle / 2
        mat = np.diag([np.exp(-1j * half), np.exp(1j * half)])
        return _single_qubit(arr, mat, gate.qubit, n)
    # controlled kinds: act only where the control bit is 1
    if k == "cpauli":
        target = gate.pauli.apply(arr)
    else:
        target = math.cos(gate.angle) * arr + 1j * math.sin(gate.angle) * gate.pauli.apply(arr)
    mask = _control_mask(gate.qubit, n, arr.shape[0]).reshape((-1,) + (1,) * (arr.ndim - 1))
    return np.where(mask, target, arr)


def _conjugate_by(gate: Gate, rho: np.ndarray, n: int) -> np.ndarray:
    a = _left(gate, rho, n)
    return _left(gate, a.conj().T, n).conj().T


def apply_depolarizing(rho: np.ndarray, lam: float, qubits: Iterable[int] | None = None) -> np.ndarray:
    """Depolarize ``qubits`` (all when None) with probability ``lam``.

    ``rho -> (1-lam) rho + lam Tr_S[rho] (x) I_S / 2^|S|``.
    """
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"depolarizing strength {lam} outside [0, 1]")
    if rho.ndim != 2:
        raise ConfigError("depolarizing needs a density matrix")
    n = num_qubits_of(rho)
    dim = rho.shape[0]
    if lam == 0.0:
        return rho.copy()
    if qubits is None:
        return (1 - lam) * rho + lam * np.eye(dim) / dim
    qs = sorted(set(qubits))
    if not qs:
        return rho.copy()
    if len(qs) == n:
        return (1 - lam) * rho + lam * np.eye(dim) / dim
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for q in qs:
        cols[q] = rows[q]
    keep = [q for q in range(n) if q not in qs]
    reduced = np.einsum(
        "".join(rows + cols) + "->" + "".join([rows[q] for q in keep] + [cols[q] for q in keep]),
        rho.reshape([2] * (2 * n)),
    )
    # re-embed with identity on the traced qubits
    out_rows = list(letters[:n])
    out_cols = list(letters[n:2 * n])
    operands = [reduced]
    subs = ["".join([out_rows[q] for q in keep] + [out_cols[q] for q in keep])]
    eye = np.eye(2) / 2
    for q in qs:
        operands.append(eye)
        subs.append(out_rows[q] + out_cols[q])
    mixed = np.einsum(",".join(subs) + "->" + "".join(out_rows + out_cols), *operands)
    return (1 - lam) * rho + lam * mixed.reshape(dim, dim)


def apply_gate(state: np.ndarray, gate: Gate, noise: NoiseModel = NOISELESS) -> np.ndarray:
    """Apply one gate; on a density matrix with per-gate noise, depolarize its support."""
    n = num_qubits_of(state)
    for q in gate.support():
        if q >= n:
            raise ConfigError(f"gate acts on qubit {q} of a {n}-qubit state")
    if gate.pauli is not None and gate.pauli.num_qubits != n:
        raise ConfigError("gate width does not match the state")
    if state.ndim == 1:
        if noise.active and noise.mode == "per_gate":
            raise ConfigError("per-gate noise requires the density-matrix backend")
        return _left(gate, state, n)
    out = _conjugate_by(gate, state, n)
    if noise.active and noise.mode == "per_gate":
        out = apply_depolarizing(out, noise.lam, gate.support())
    return out


def run_circuit(circuit: Circuit, state: np.ndarray | None = None, noise: NoiseModel = NOISELESS) -> np.ndarray:
    """Run ``circuit`` on ``state`` (``|0...0>`` by default).

    Noise needs a density matrix; a pure initial state is promoted when noise
    is active.
    """
    if state is None:
        state = zero_state(circuit.num_qubits)
    if num_qubits_of(state) != circuit.num_qubits:
        raise ConfigError("state and circuit widths differ")
    if noise.active and state.ndim == 1:
        state = to_density(state)
    for g in circuit.gates:
        state = apply_gate(state, g, noise)
    if noise.active and noise.mode == "global_once":
        state = apply_depolarizing(state, noise.lam)
    return state


def expectation(state: np.ndarray, obs: PauliSum, tol: float = 1e-10) -> float:
    """<psi|O|psi> or Tr[rho O] for a Hermitian Pauli sum."""
    if obs.num_qubits != num_qubits_of(state):
        raise ConfigError(f"observable on {obs.num_qubits} qubits, state on {num_qubits_of(state)}")
    if not obs.is_hermitian():
        raise ConfigError("expectation needs a Hermitian observable")
    if state.ndim == 1:
        val = np.vdot(state, obs.apply(state))
    else:
        val = np.trace(obs.apply(state))
    if abs(val.imag) > tol * max(1.0, abs(val.real)):
        raise NumericalError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def probabilities(state: np.ndarray) -> np.ndarray:
    p = np.abs(state) ** 2 if state.ndim == 1 else np.real(np.diag(state))
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def bitstring(index: int, num_qubits: int) -> str:
    return format(index, f"0{num_qubits}b")


def sample_bitstrings(state: np.ndarray, shots: int, seed=None) -> dict[str, int]:
    """Draw ``shots`` computational-basis samples; returns nonzero counts only."""
    if shots < 1:
        raise ConfigError("shots must be >= 1")
    n = num_qubits_of(state)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probabilities(state))
    return {bitstring(i, n): int(c) for i, c in enumerate(counts) if c}


def counts_to_probabilities(counts: dict[str, int], num_qubits: int) -> np.ndarray:
    p = np.zeros(1 << num_qubits)
    for bits, c in counts.items():
        p[int(bits, 2)] += c
    total = p.sum()
    if total <= 0:
        raise ConfigError("empty histogram")
    return p / total


def write_histogram_csv(counts: dict[str, int], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bitstring", "count"])
        for bits in sorted(counts):
            w.writerow([bits, counts[bits]])


def read_histogram_csv(path) -> dict[str, int]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["bitstring"]: int(row["count"]) for row in csv.DictReader(fh)}


# ---------------------------------------------------------------------------
# Hadamard test


def hadamard_circuit(psi0_prep: Circuit, branch0: Circuit, branch1: Circuit, phi: float) -> Circuit:
    """Interferometer whose ancilla <Z> is Re[e^{i phi} <psi0|B0^dag B1|psi0>].

    The ancilla is appended as the last qubit and prepared in
    (|0> + e^{i phi}|1>)/sqrt(2).  Gates shared by both branches (found by
    sequence alignment) run uncontrolled; gates only in ``branch0`` are
    controlled on ancilla |0> (X-sandwiched) and gates only in ``branch1`` on
    ancilla |1>.
    """
    n = psi0_prep.num_qubits
    if branch0.num_qubits != n or branch1.num_qubits != n:
        raise ConfigError("branch circuits must act on the system register only")
    anc = n
    gates: list[Gate] = [g for g in psi0_prep.widened(1).gates]
    gates.append(Gate("h", qubit=anc))
    if phi % (2 * math.pi) != 0.0:
        gates.append(Gate("rz", angle=phi, qubit=anc))
    w0 = branch0.widened(1).gates
    w1 = branch1.widened(1).gates
    flipped = False

    def emit_controlled(seq, on_zero: bool):
        nonlocal flipped
        for g in seq:
            if on_zero != flipped:
                gates.append(Gate("x", qubit=anc))
                flipped = on_zero
            gates.append(g.controlled(anc))

    matcher = difflib.SequenceMatcher(a=w0, b=w1, autojunk=False)
    for op, i1, i2, j1, j2 in matcher.get_opcodes():
        if op == "equal":
            gates.extend(w0[i1:i2])
            continue
        emit_controlled(w0[i1:i2], on_zero=True)
        emit_controlled(w1[j1:j2], on_zero=False)
    if flipped:
        gates.append(Gate("x", qubit=anc))
    gates.append(Gate("h", qubit=anc))
    return Circuit(n + 1, tuple(gates))


def _ancilla_z(state: np.ndarray) -> float:
    p = probabilities(state)
    # ancilla is the least significant bit
    return float(p[0::2].sum() - p[1::2].sum())


def hadamard_test(
    psi0_prep: Circuit,
    branch0: Circuit,
    branch1: Circuit,
    phi: float = 0.0,
    noise: NoiseModel = NOISELESS,
    shots: int | None = None,
    seed=None,
) -> float:
    """Ancilla <Z> of the Hadamard-test circuit.

    With ``shots=None`` the exact expectation is returned; otherwise the
    ancilla is sampled ``shots`` times.  ``phi=0`` gives the real part of
    <psi0|B0^dag B1|psi0>, ``phi=pi`` its negative, ``phi=-pi/2`` the
    imaginary part.
    """
    circ = hadamard_circuit(psi0_prep, branch0, branch1, phi)
    state = run_circuit(circ, noise=noise)
    z = _ancilla_z(state)
    if shots is None:
        return z
    if shots < 1:
        raise ConfigError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    p0 = min(max((1 + z) / 2, 0.0), 1.0)
    k = rng.binomial(shots, p0)
    return 2 * k / shots - 1


# ---------------------------------------------------------------------------
# Readout calibration


@dataclass(frozen=True)
class ReadoutCalibration:
    """Column-stochastic map with ``p_noisy = W @ p_ideal``."""

    W: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.W, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ConfigError("calibration matrix must be square")
        if np.any(w < -1e-12) or np.any(w > 1 + 1e-12):
            raise ConfigError("calibration entries must lie in [0, 1]")
        if not np.allclose(w.sum(axis=0), 1.0, atol=1e-10):
            raise ConfigError("calibration columns must sum to 1")
        object.__setattr__(self, "W", w)

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.W))

    def apply(self, p_ideal: np.ndarray) -> np.ndarray:
        return self.W @ np.asarray(p_ideal, dtype=float)


def build_readout_calibration(readout_flip_probs, num_qubits: int) -> ReadoutCalibration:
    """Tensor-product calibration from per-qubit flip probabilities.

    Each entry is either ``p`` (symmetric) or ``(p01, p10)`` where ``p01`` is
    the chance of reading 1 from a prepared 0.  A single entry is broadcast
    to every qubit when passed as a bare scalar.
    """
    probs = readout_flip_probs
    if np.isscalar(probs):
        probs = [probs] * num_qubits
    if len(probs) != num_qubits:
        raise ConfigError(f"need {num_qubits} flip-probability entries, got {len(probs)}")
    w = np.ones((1, 1))
    for entry in probs:
        p01, p10 = (entry, entry) if np.isscalar(entry) else entry
        if not (0 <= p01 <= 1 and 0 <= p10 <= 1):
            raise ConfigError("flip probabilities must lie in [0, 1]")
        w = np.kron(w, np.array([[1 - p01, p10], [p01, 1 - p10]]))
    return ReadoutCalibration(w)


def correct_readout(counts, calibration: ReadoutCalibration, clip: bool = True) -> np.ndarray:
    """Invert the calibration on a histogram or probability vector."""
    w = calibration.W
    n = w.shape[0].bit_length() - 1
    p = counts_to_probabilities(counts, n) if isinstance(counts, dict) else np.asarray(counts, dtype=float)
    if p.shape != (w.shape[0],):
        raise ConfigError("probability vector does not match the calibration")
    if calibration.condition_number > 1e12:
        raise NumericalError("calibration matrix is singular")
    ideal = np.linalg.solve(w, p)
    if clip:
        ideal = np.clip(ideal, 0.0, None)
        ideal = ideal / ideal.sum()
    return ideal
