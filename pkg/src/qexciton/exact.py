"""Reference propagator for static and time-dependent Pauli Hamiltonians."""

from __future__ import annotations

import math
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConfigError, NumericalError
from .hamiltonians import HBAR_EV_FS
from .pauli import PauliSum

HamiltonianSource = Union[PauliSum, Callable[[float], PauliSum]]

DEFAULT_MICRO_DT = 0.01
CONVERGENCE_TOL = 1e-8
MAX_HALVINGS = 8


def is_static(h_source) -> bool:
    return isinstance(h_source, PauliSum)


def hamiltonian_at(h_source: HamiltonianSource, t: float) -> PauliSum:
    return h_source if is_static(h_source) else h_source(t)


def hamiltonian_matrix(h_source: HamiltonianSource, t: float) -> np.ndarray:
    """Dense H(t), using the source's own ``matrix`` method when it has one."""
    if is_static(h_source):
        return h_source.to_matrix()
    dense = getattr(h_source, "matrix", None)
    return dense(t) if dense is not None else h_source(t).to_matrix()


def propagator(h, dt: float, hbar: float = HBAR_EV_FS) -> np.ndarray:
    """exp(-i H dt / hbar) through the eigendecomposition of H (PauliSum or matrix)."""
    mat = h.to_matrix() if isinstance(h, PauliSum) else np.asarray(h, dtype=complex)
    if not np.allclose(mat, mat.conj().T, atol=1e-12):
        raise ConfigError("propagator needs a Hermitian Hamiltonian")
    w, v = np.linalg.eigh(mat)
    return (v * np.exp(-1j * w * dt / hbar)) @ v.conj().T


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float).reshape(-1)
    if t.size == 0:
        raise ConfigError("empty time grid")
    if t[0] < 0 or np.any(np.diff(t) < 0):
        raise ConfigError("time grid must be non-decreasing and start at t >= 0")
    return t


def _evolve_static(h: PauliSum, psi0: np.ndarray, times: np.ndarray, hbar: float) -> list[np.ndarray]:
    w, v = np.linalg.eigh(h.to_matrix())
    coeffs = v.conj().T @ psi0
    return [v @ (np.exp(-1j * w * t / hbar) * coeffs) for t in times]


def _evolve_stepped(h_source, psi0, times, micro_dt, hbar) -> list[np.ndarray]:
    out = []
    psi = psi0.astype(complex)
    t_prev = 0.0
    for t in times:
        span = t - t_prev
        if span > 0:
            steps = max(1, math.ceil(span / micro_dt - 1e-9))
            h_step = span / steps
            for k in range(steps):
                t_mid = t_prev + (k + 0.5) * h_step
                psi = propagator(hamiltonian_matrix(h_source, t_mid), h_step, hbar) @ psi
        out.append(psi.copy())
        t_prev = t
    return out


def evolve_exact(
    h_source: HamiltonianSource,
    psi0: np.ndarray,
    t_grid: Sequence[float],
    micro_dt: float | None = None,
    hbar: float = HBAR_EV_FS,
) -> list[np.ndarray]:
    """States at each grid time under exp(-i H t / hbar).

    A static Hamiltonian is propagated in one shot per grid time.  A
    time-dependent one is held constant over micro steps (sampled at the step
    midpoint).  With ``micro_dt=None`` the step starts at 0.01 fs and is
    halved until the final state changes by less than 1e-8.
    """
    times = _check_grid(t_grid)
    psi0 = np.asarray(psi0, dtype=complex)
    if is_static(h_source):
        return _evolve_static(h_source, psi0, times, hbar)
    duration = getattr(h_source, "duration", None)
    if duration is not None and times[-1] > duration + 1e-9:
        raise ConfigError(f"trajectory ends at {duration} fs, grid needs {times[-1]} fs")
    if micro_dt is not None:
        if micro_dt <= 0:
            raise ConfigError("micro_dt must be positive")
        return _evolve_stepped(h_source, psi0, times, micro_dt, hbar)
    step = DEFAULT_MICRO_DT
    coarse = _evolve_stepped(h_source, psi0, times, step, hbar)
    for _ in range(MAX_HALVINGS):
        step /= 2
        fine = _evolve_stepped(h_source, psi0, times, step, hbar)
        if np.max(np.abs(fine[-1] - coarse[-1])) < CONVERGENCE_TOL:
            return fine
        coarse = fine
    raise NumericalError(f"exact propagation did not converge down to micro_dt={step} fs")
