"""Exciton Hamiltonians in Pauli form.

Units: energies in eV, times in fs.  Sites are 0-based internally; CSV
headers and printed output use 1-based labels.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError
from .pauli import PauliString, PauliSum

HBAR_EV_FS = 0.6582119569
COULOMB_EV_ANGSTROM = 14.39964
PAD_ENERGY_EV = 10.0

# |a><b| on one qubit as Pauli combinations
_PROJECTOR_PAULIS = {
    (0, 0): ((0.5, "I"), (0.5, "Z")),
    (1, 1): ((0.5, "I"), (-0.5, "Z")),
    (0, 1): ((0.5, "X"), (0.5j, "Y")),
    (1, 0): ((0.5, "X"), (-0.5j, "Y")),
}


@dataclass(frozen=True)
class FrenkelSnapshot:
    """Site energies and symmetric couplings of a single-exciton Hamiltonian."""

    energies: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float).reshape(-1)
        v = np.asarray(self.couplings, dtype=float)
        n = e.size
        if n == 0:
            raise ConfigError("a Frenkel snapshot needs at least one site")
        if v.shape != (n, n):
            raise ConfigError(f"couplings must be {n}x{n}, got {v.shape}")
        if not np.allclose(v, v.T, atol=1e-12, rtol=0):
            raise ConfigError("couplings must be symmetric")
        if np.any(np.diag(v) != 0):
            raise ConfigError("coupling diagonal must be exactly zero")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "couplings", v)

    @property
    def num_sites(self) -> int:
        return self.energies.size

    def matrix(self) -> np.ndarray:
        return np.diag(self.energies) + self.couplings

    @classmethod
    def chain(cls, energies: Sequence[float], coupling: float, periodic: bool = False) -> FrenkelSnapshot:
        n = len(energies)
        v = np.zeros((n, n))
        for m in range(n - 1):
            v[m, m + 1] = v[m + 1, m] = coupling
        if periodic and n > 2:
            v[0, n - 1] = v[n - 1, 0] = coupling
        return cls(np.asarray(energies, dtype=float), v)


def section_v_model(delta_e: float = 0.020, coupling: float = 0.040) -> FrenkelSnapshot:
    """Four-site periodic chain with E1=E2=+dE/2 and E3=E4=-dE/2 (eV)."""
    half = delta_e / 2
    return FrenkelSnapshot.chain([half, half, -half, -half], coupling, periodic=True)


def padded_size(n: int) -> int:
    return 1 << max(0, math.ceil(math.log2(n))) if n > 1 else 2


def pad_snapshot(snap: FrenkelSnapshot, pad_energy: float = PAD_ENERGY_EV) -> FrenkelSnapshot:
    """Append decoupled virtual sites so the size is a power of two (min 2)."""
    n = snap.num_sites
    size = padded_size(n)
    if size == n:
        return snap
    e = np.concatenate([snap.energies, np.full(size - n, pad_energy)])
    v = np.zeros((size, size))
    v[:n, :n] = snap.couplings
    return FrenkelSnapshot(e, v)


def encode_frenkel_binary(snap: FrenkelSnapshot) -> tuple[PauliSum, float]:
    """Binary-encode a Frenkel snapshot onto log2(N) qubits.

    Each ``|m><n|`` is expanded bit by bit into single-qubit Paulis, so basis
    index ``m`` (site ``m+1``) is the register value with qubit 1 most
    significant.  The identity component is returned separately as an
    energy offset.
    """
    padded = pad_snapshot(snap)
    n = padded.num_sites
    num_qubits = n.bit_length() - 1
    h = padded.matrix()
    acc: dict[str, complex] = {}
    for m, k in product(range(n), repeat=2):
        value = h[m, k]
        if value == 0:
            continue
        factors = []
        for q in range(num_qubits):
            shift = num_qubits - 1 - q
            factors.append(_PROJECTOR_PAULIS[((m >> shift) & 1, (k >> shift) & 1)])
        for combo in product(*factors):
            coeff = value
            letters = []
            for c, letter in combo:
                coeff *= c
                letters.append(letter)
            key = "".join(letters)
            acc[key] = acc.get(key, 0j) + coeff
    full = PauliSum(((c, s) for s, c in acc.items()), num_qubits)
    if not full.is_hermitian():
        raise ConfigError("encoded Hamiltonian is not Hermitian")
    offset = full.identity_coefficient().real
    return full.without_identity().real(), float(offset)


def frenkel_pauli_sum(snap: FrenkelSnapshot) -> PauliSum:
    """Encoded Hamiltonian with the identity offset stripped."""
    return encode_frenkel_binary(snap)[0]


# ---------------------------------------------------------------------------
# full Hilbert space (one qubit per molecule)


@dataclass(frozen=True)
class MoleculeElectronicSpec:
    """Two-level chromophore: excitation energy, three dipoles, position.

    Dipoles are in e*Angstrom, position in Angstrom, energy in eV.
    """

    excited_energy: float
    ground_dipole: np.ndarray = field(default_factory=lambda: np.zeros(3))
    excited_dipole: np.ndarray = field(default_factory=lambda: np.zeros(3))
    transition_dipole: np.ndarray = field(default_factory=lambda: np.zeros(3))
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("ground_dipole", "excited_dipole", "transition_dipole", "position"):
            vec = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if vec.shape != (3,):
                raise ConfigError(f"{name} must be a 3-vector")
            object.__setattr__(self, name, vec)
        object.__setattr__(self, "excited_energy", float(self.excited_energy))

    @classmethod
    def from_dict(cls, d: dict) -> MoleculeElectronicSpec:
        return cls(
            d["energy"],
            d.get("ground_dipole", (0, 0, 0)),
            d.get("excited_dipole", (0, 0, 0)),
            d.get("transition_dipole", (0, 0, 0)),
            d.get("position", (0, 0, 0)),
        )

    def to_dict(self) -> dict:
        return {
            "energy": self.excited_energy,
            "ground_dipole": self.ground_dipole.tolist(),
            "excited_dipole": self.excited_dipole.tolist(),
            "transition_dipole": self.transition_dipole.tolist(),
            "position": self.position.tolist(),
        }


def dipole_coupling(mu_a, mu_b, r_a, r_b, kappa: float = COULOMB_EV_ANGSTROM) -> float:
    """Point-dipole interaction kappa*[mu_a.mu_b - 3(mu_a.r)(mu_b.r)]/r^3."""
    mu_a, mu_b = np.asarray(mu_a, float), np.asarray(mu_b, float)
    d = np.asarray(r_a, float) - np.asarray(r_b, float)
    r = float(np.linalg.norm(d))
    if r == 0.0:
        raise ConfigError("dipole coupling needs distinct positions")
    u = d / r
    return float(kappa * (mu_a @ mu_b - 3 * (mu_a @ u) * (mu_b @ u)) / r**3)


@dataclass(frozen=True)
class FullSpaceCoefficients:
    """Pauli coefficients of the multi-exciton Hamiltonian.

    Pair arrays are indexed ``[m, n]`` with ``n < m``; entries with
    ``n >= m`` are zero.  ``xz[m, n]`` multiplies X_m Z_n and ``zx[m, n]``
    multiplies Z_m X_n.
    """

    constant: float
    z: np.ndarray
    x: np.ndarray
    xx: np.ndarray
    xz: np.ndarray
    zx: np.ndarray
    zz: np.ndarray
    s: np.ndarray
    d: np.ndarray
    t: np.ndarray


def fullspace_coefficients(specs: Sequence[MoleculeElectronicSpec], kappa: float = COULOMB_EV_ANGSTROM) -> FullSpaceCoefficients:
    n = len(specs)
    if n < 1:
        raise ConfigError("need at least one molecule")
    pos = [s.position for s in specs]
    for i in range(n):
        for j in range(i):
            if np.allclose(pos[i], pos[j]):
                raise ConfigError(f"molecules {j + 1} and {i + 1} share a position")
    # one-body terms with (0|h|0) = (0|h|1) = 0 and (1|h|1) = E
    energies = np.array([s.excited_energy for s in specs])
    s_one = energies / 2
    d_one = -energies / 2
    x_one = np.zeros(n)
    # charge-distribution dipoles for |S), |D), |T)
    mu_s = [(s.ground_dipole + s.excited_dipole) / 2 for s in specs]
    mu_d = [(s.ground_dipole - s.excited_dipole) / 2 for s in specs]
    mu_t = [s.transition_dipole for s in specs]

    def pair(mu_m, mu_n, m, k):
        return dipole_coupling(mu_m[m], mu_n[k], pos[m], pos[k], kappa)

    constant = float(s_one.sum())
    z = d_one.copy()
    x = x_one.copy()
    xx, xz, zx, zz = (np.zeros((n, n)) for _ in range(4))
    for m in range(n):
        for k in range(n):
            if k == m:
                continue
            z[m] += pair(mu_d, mu_s, m, k)
            x[m] += pair(mu_t, mu_s, m, k)
            if k < m:
                constant += pair(mu_s, mu_s, m, k)
                xx[m, k] = pair(mu_t, mu_t, m, k)
                xz[m, k] = pair(mu_t, mu_d, m, k)
                zx[m, k] = pair(mu_d, mu_t, m, k)
                zz[m, k] = pair(mu_d, mu_d, m, k)
    return FullSpaceCoefficients(constant, z, x, xx, xz, zx, zz, s_one, d_one, x_one)


def build_fullspace(specs: Sequence[MoleculeElectronicSpec], kappa: float = COULOMB_EV_ANGSTROM) -> PauliSum:
    """Multi-exciton Hamiltonian on one qubit per molecule (molecule m -> qubit m)."""
    c = fullspace_coefficients(specs, kappa)
    n = len(specs)

    def ps(ops):
        return PauliString.from_ops(n, ops)

    terms = [(c.constant, PauliString.identity(n))]
    for m in range(n):
        terms.append((c.z[m], ps({m: "Z"})))
        terms.append((c.x[m], ps({m: "X"})))
        for k in range(m):
            terms.append((c.xx[m, k], ps({m: "X", k: "X"})))
            terms.append((c.xz[m, k], ps({m: "X", k: "Z"})))
            terms.append((c.zx[m, k], ps({m: "Z", k: "X"})))
            terms.append((c.zz[m, k], ps({m: "Z", k: "Z"})))
    return PauliSum(terms, n)


def build_tfi(h: float, J: float) -> PauliSum:
    """Two-spin transverse-field Ising model h(X1 + X2) + J Z1 Z2."""
    return PauliSum([(h, "XI"), (h, "IX"), (J, "ZZ")], 2)


def read_molecules(path) -> list[MoleculeElectronicSpec]:
    """JSON list of molecule records (or ``{"molecules": [...]}``)."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("molecules", [])
    return [MoleculeElectronicSpec.from_dict(d) for d in data]


# ---------------------------------------------------------------------------
# time-dependent Frenkel Hamiltonians


@dataclass(frozen=True)
class HamiltonianTrajectory:
    """Frenkel snapshots on a strictly increasing time grid (fs)."""

    times: np.ndarray
    energies: np.ndarray  # (T, N)
    couplings: np.ndarray  # (T, N, N)
    interpolation: str = "linear"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        e = np.asarray(self.energies, dtype=float)
        v = np.asarray(self.couplings, dtype=float)
        if t.size == 0:
            raise ConfigError("trajectory is empty")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("trajectory times must be strictly increasing")
        if e.ndim != 2 or e.shape[0] != t.size:
            raise ConfigError("energies must have shape (T, N)")
        n = e.shape[1]
        if v.shape != (t.size, n, n):
            raise ConfigError("couplings must have shape (T, N, N)")
        if self.interpolation not in ("linear", "piecewise_constant"):
            raise ConfigError(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "couplings", v)

    @classmethod
    def from_snapshots(cls, times, snapshots: Sequence[FrenkelSnapshot], interpolation: str = "linear"):
        sizes = {s.num_sites for s in snapshots}
        if len(sizes) != 1:
            raise ConfigError("all snapshots must have the same number of sites")
        return cls(
            np.asarray(times, float),
            np.stack([s.energies for s in snapshots]),
            np.stack([s.couplings for s in snapshots]),
            interpolation,
        )

    @property
    def num_sites(self) -> int:
        return self.energies.shape[1]

    def snapshot(self, i: int) -> FrenkelSnapshot:
        return FrenkelSnapshot(self.energies[i], self.couplings[i])

    def with_interpolation(self, mode: str) -> HamiltonianTrajectory:
        return HamiltonianTrajectory(self.times, self.energies, self.couplings, mode)


def interpolate(traj: HamiltonianTrajectory, t: float) -> FrenkelSnapshot:
    times = traj.times
    tol = 1e-9 * max(1.0, abs(times[-1]))
    if t < times[0] - tol or t > times[-1] + tol:
        raise ConfigError(f"t={t} fs outside trajectory range [{times[0]}, {times[-1]}]")
    t = min(max(t, times[0]), times[-1])
    i = int(np.searchsorted(times, t, side="right")) - 1
    i = min(max(i, 0), times.size - 1)
    if abs(times[i] - t) <= tol or traj.interpolation == "piecewise_constant" or i == times.size - 1:
        return traj.snapshot(i)
    w = (t - times[i]) / (times[i + 1] - times[i])
    e = (1 - w) * traj.energies[i] + w * traj.energies[i + 1]
    v = (1 - w) * traj.couplings[i] + w * traj.couplings[i + 1]
    np.fill_diagonal(v, 0.0)
    return FrenkelSnapshot(e, 0.5 * (v + v.T))


def trajectory_source(traj: HamiltonianTrajectory) -> Callable[[float], PauliSum]:
    """Time-dependent encoded Hamiltonian ``t -> PauliSum`` (identity stripped).

    ``source.matrix(t)`` gives the same operator as a dense matrix without
    going through the Pauli expansion; the exact propagator uses it.
    """

    def source(t: float) -> PauliSum:
        return frenkel_pauli_sum(interpolate(traj, t))

    def matrix(t: float) -> np.ndarray:
        h = pad_snapshot(interpolate(traj, t)).matrix()
        return h - np.trace(h) / h.shape[0] * np.eye(h.shape[0])

    source.matrix = matrix
    source.num_sites = traj.num_sites
    source.duration = float(traj.times[-1])
    return source


def _broadcast(value, shape) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), shape).copy()
    if np.any(arr < 0):
        raise ConfigError("standard deviations must be non-negative")
    return arr


def synthesize_trajectory(
    mean: FrenkelSnapshot,
    energy_std,
    coupling_std,
    correlation_time: float,
    dt: float,
    duration: float,
    seed=None,
    interpolation: str = "linear",
) -> HamiltonianTrajectory:
    """Ornstein-Uhlenbeck fluctuations of every matrix element about ``mean``.

    Energies and upper-triangle couplings are independent stationary OU
    processes, sampled exactly on the ``dt`` grid and started from their
    stationary distribution.
    """
    if dt <= 0 or correlation_time <= 0 or duration <= 0:
        raise ConfigError("dt, correlation_time and duration must be positive")
    n = mean.num_sites
    steps = int(round(duration / dt))
    times = dt * np.arange(steps + 1)
    iu = np.triu_indices(n, k=1)
    mu = np.concatenate([mean.energies, mean.couplings[iu]])
    sigma = np.concatenate([_broadcast(energy_std, (n,)), _broadcast(coupling_std, (n, n))[iu]])
    rng = np.random.default_rng(seed)
    decay = math.exp(-dt / correlation_time)
    kick = math.sqrt(1 - decay**2)
    x = np.empty((steps + 1, mu.size))
    x[0] = mu + sigma * rng.standard_normal(mu.size)
    noise = rng.standard_normal((steps, mu.size))
    for k in range(steps):
        x[k + 1] = mu + (x[k] - mu) * decay + sigma * kick * noise[k]
    energies = x[:, :n]
    couplings = np.zeros((steps + 1, n, n))
    couplings[:, iu[0], iu[1]] = x[:, n:]
    couplings += couplings.transpose(0, 2, 1)
    return HamiltonianTrajectory(times, energies, couplings, interpolation)


def trajectory_header(n: int) -> list[str]:
    cols = ["t_fs"] + [f"E_{m + 1}" for m in range(n)]
    cols += [f"V_{m + 1}_{k + 1}" for m in range(n) for k in range(m + 1, n)]
    return cols


def write_trajectory_csv(traj: HamiltonianTrajectory, path) -> None:
    n = traj.num_sites
    iu = np.triu_indices(n, k=1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(n))
        for i, t in enumerate(traj.times):
            row = [t, *traj.energies[i], *traj.couplings[i][iu]]
            w.writerow([repr(float(x)) for x in row])


def read_trajectory_csv(path, interpolation: str = "linear") -> HamiltonianTrajectory:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty trajectory file")
    header = [h.strip() for h in rows[0]]
    n = sum(1 for h in header if h.startswith("E_"))
    if header != trajectory_header(n):
        raise ConfigError(f"{path}: unexpected trajectory header {header}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric trajectory entry") from exc
    if data.ndim != 2 or data.shape[0] == 0:
        raise ConfigError(f"{path}: no trajectory rows")
    iu = np.triu_indices(n, k=1)
    couplings = np.zeros((data.shape[0], n, n))
    couplings[:, iu[0], iu[1]] = data[:, 1 + n:]
    couplings += couplings.transpose(0, 2, 1)
    return HamiltonianTrajectory(data[:, 0], data[:, 1:1 + n], couplings, interpolation)


def read_snapshot_json(path) -> FrenkelSnapshot:
    """``{"energies": [...], "couplings": [[...], ...]}`` in eV."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "model" in data:
        data = data["model"]
    try:
        return FrenkelSnapshot(np.asarray(data["energies"], float), np.asarray(data["couplings"], float))
    except KeyError as exc:
        raise ConfigError(f"{path}: missing {exc.args[0]!r}") from exc
