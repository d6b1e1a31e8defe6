"""Site populations, IPR, ensemble averaging and PopulationSeries CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError
from .sim import num_qubits_of, probabilities


@dataclass(frozen=True)
class Encoding:
    """How sites map onto a register.

    ``binary``: site m+1 is basis index m of a log2-sized register.
    ``fullspace``: molecule m+1 is qubit m+1 and its population is the
    qubit's excitation probability.
    """

    kind: str
    num_sites: int

    def __post_init__(self):
        if self.kind not in ("binary", "fullspace"):
            raise ConfigError(f"unknown encoding {self.kind!r}")
        if self.num_sites < 1:
            raise ConfigError("encoding needs at least one site")

    @classmethod
    def binary(cls, n: int) -> Encoding:
        return cls("binary", n)

    @classmethod
    def fullspace(cls, n: int) -> Encoding:
        return cls("fullspace", n)


def binary_populations(state: np.ndarray, num_sites: int, return_norm: bool = False):
    """|amplitude_m|^2 over physical sites, renormalized after dropping padding."""
    p = probabilities(state)
    if num_sites > p.size:
        raise ConfigError(f"{num_sites} sites do not fit a register of dimension {p.size}")
    kept = p[:num_sites]
    norm = float(kept.sum())
    if norm <= 0:
        raise ConfigError("state has no weight on the physical sites")
    out = kept / norm
    return (out, norm) if return_norm else out


def fullspace_populations(state: np.ndarray) -> np.ndarray:
    """<(I - Z_m)/2> for each qubit m."""
    n = num_qubits_of(state)
    p = probabilities(state)
    idx = np.arange(p.size)
    return np.array([p[((idx >> (n - 1 - q)) & 1) == 1].sum() for q in range(n)])


def site_populations(state: np.ndarray, encoding: Encoding) -> np.ndarray:
    if encoding.kind == "binary":
        return binary_populations(state, encoding.num_sites)
    if num_qubits_of(state) != encoding.num_sites:
        raise ConfigError("full-space state must have one qubit per molecule")
    return fullspace_populations(state)


def ipr(p: np.ndarray) -> float:
    """Inverse participation ratio 1/sum(p^2) of a normalized population."""
    p = np.asarray(p, dtype=float)
    total = p.sum()
    if total <= 0:
        raise ConfigError("IPR of an all-zero population")
    if abs(total - 1) > 1e-8:
        p = p / total
    return float(1.0 / np.sum(p**2))


@dataclass(frozen=True)
class PopulationSeries:
    """Site populations and IPR on a time grid (fs).

    ``extra`` holds optional named per-time columns written after ``ipr``.
    """

    times: np.ndarray
    populations: np.ndarray  # (T, N)
    ipr: np.ndarray
    extra: tuple[tuple[str, np.ndarray], ...] = ()

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        p = np.asarray(self.populations, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        r = np.asarray(self.ipr, dtype=float).reshape(-1)
        if p.shape[0] != t.size or r.size != t.size:
            raise ConfigError("times, populations and ipr lengths differ")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("series times must be strictly increasing")
        extra = tuple((name, np.asarray(col, dtype=float).reshape(-1)) for name, col in self.extra)
        for name, col in extra:
            if col.size != t.size:
                raise ConfigError(f"extra column {name!r} has the wrong length")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "populations", p)
        object.__setattr__(self, "ipr", r)
        object.__setattr__(self, "extra", extra)

    @classmethod
    def from_populations(cls, times, populations, extra=()) -> PopulationSeries:
        p = np.asarray(populations, dtype=float)
        return cls(times, p, np.array([ipr(row) for row in p]), extra)

    @classmethod
    def from_states(cls, times, states, encoding: Encoding) -> PopulationSeries:
        return cls.from_populations(times, [site_populations(s, encoding) for s in states])

    @property
    def num_sites(self) -> int:
        return self.populations.shape[1]

    def __len__(self):
        return self.times.size

    def site(self, m: int) -> np.ndarray:
        """Population of 0-based site ``m``."""
        return self.populations[:, m]

    def columns(self) -> dict[str, np.ndarray]:
        cols = {f"p_{m + 1}": self.populations[:, m] for m in range(self.num_sites)}
        cols["ipr"] = self.ipr
        cols.update(dict(self.extra))
        return cols

    def at(self, t) -> np.ndarray:
        """Linear interpolation of every column at times ``t`` (no extrapolation)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tol = 1e-9 * max(1.0, abs(self.times[-1]))
        if np.any(t < self.times[0] - tol) or np.any(t > self.times[-1] + tol):
            raise ConfigError("interpolation outside the series time range")
        return np.column_stack([np.interp(t, self.times, col) for col in self.columns().values()])


def ensemble_average(members: Sequence[PopulationSeries]) -> PopulationSeries:
    """Mean populations with IPR recomputed from the mean.

    The member-averaged IPR is kept as the extra column ``ipr_member_mean``.
    """
    if not members:
        raise ConfigError("ensemble is empty")
    t0 = members[0].times
    for s in members[1:]:
        if s.times.shape != t0.shape or not np.array_equal(s.times, t0):
            raise ConfigError("ensemble members have different time grids")
        if s.num_sites != members[0].num_sites:
            raise ConfigError("ensemble members have different site counts")
    mean_p = np.mean([s.populations for s in members], axis=0)
    member_ipr = np.mean([s.ipr for s in members], axis=0)
    return PopulationSeries(
        t0,
        mean_p,
        np.array([ipr(row) for row in mean_p]),
        (("ipr_member_mean", member_ipr),),
    )


@dataclass(frozen=True)
class EnsembleSpec:
    trajectory_count: int = 100
    base_seed: int = 0

    def __post_init__(self):
        if self.trajectory_count < 1:
            raise ConfigError("trajectory_count must be >= 1")

    def member_seeds(self) -> list[int]:
        children = np.random.SeedSequence(self.base_seed).spawn(self.trajectory_count)
        return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def run_ensemble(spec: EnsembleSpec, member: Callable[[int], PopulationSeries]) -> PopulationSeries:
    """Run ``member(seed)`` for every derived seed and average the results."""
    return ensemble_average([member(seed) for seed in spec.member_seeds()])


def write_series_csv(series: PopulationSeries, path) -> None:
    cols = series.columns()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t_fs", *cols])
        for i, t in enumerate(series.times):
            w.writerow([repr(float(t))] + [repr(float(c[i])) for c in cols.values()])


def read_series_csv(path) -> PopulationSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration as exc:
            raise ConfigError(f"{path}: empty series file") from exc
        rows = [r for r in reader if r]
    if not header or header[0] != "t_fs" or "ipr" not in header:
        raise ConfigError(f"{path}: expected header 't_fs, p_1..p_N, ipr'")
    try:
        data = np.array([[float(x) for x in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry") from exc
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != len(header):
        raise ConfigError(f"{path}: malformed rows")
    k = header.index("ipr")
    pops = header[1:k]
    if pops != [f"p_{m + 1}" for m in range(len(pops))] or not pops:
        raise ConfigError(f"{path}: population columns must be p_1..p_N")
    extra = tuple((name, data[:, j]) for j, name in enumerate(header) if j > k)
    return PopulationSeries(data[:, 0], data[:, 1:k], data[:, k], extra)
