"""Time-dilation error mitigation for noisy variational dynamics.

Noise shrinks the parameter velocity, so the noisy run lags the true
dynamics.  A short Trotter reference fixes the lag factor alpha and the
VQA populations are relabelled as p_corr(t) = p_raw(alpha t).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .analysis import PopulationSeries
from .errors import ConfigError, NumericalError

DEFAULT_ALPHA_RANGE = (0.5, 3.0)
ALPHA_TOL = 1e-3
SCAN_POINTS = 101
_INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class MitigationResult:
    alpha: float
    t_cutoff: float
    objective: float
    window: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not math.isfinite(self.objective):
            raise NumericalError("mitigation objective is not finite")


def alpha_objective(p_vqa: PopulationSeries, p_trotter: PopulationSeries, alpha: float, t_cutoff: float, site: int = 0) -> float:
    """Trapezoid of (p_vqa(alpha t) - p_trotter(t))^2 on the Trotter grid up to t_cutoff."""
    t = p_trotter.times
    mask = t <= t_cutoff + 1e-9 * max(1.0, t_cutoff)
    t = t[mask]
    if t.size < 2:
        raise ConfigError("Trotter reference has fewer than two points before the cutoff")
    if alpha * t[-1] > p_vqa.times[-1] + 1e-9 * max(1.0, p_vqa.times[-1]):
        raise ConfigError(f"VQA series ends at {p_vqa.times[-1]} and cannot cover alpha*t_cutoff = {alpha * t[-1]}")
    raw = np.interp(alpha * t, p_vqa.times, p_vqa.site(site))
    diff = raw - p_trotter.site(site)[mask]
    return float(np.trapezoid(diff**2, t))


def _golden(f, a: float, b: float, tol: float) -> float:
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def extract_alpha(
    p_vqa: PopulationSeries,
    p_trotter: PopulationSeries,
    t_cutoff: float,
    alpha_range: tuple[float, float] = DEFAULT_ALPHA_RANGE,
    site: int = 0,
    tol: float = ALPHA_TOL,
) -> MitigationResult:
    """Best alpha for min int_0^tc (p_vqa(alpha t) - p_trotter(t))^2 dt.

    A coarse scan picks the bracket holding the global minimum and
    golden-section search refines it to ``tol``.  The upper end of
    ``alpha_range`` is lowered to what the VQA series can cover; a series too
    short even for the lower end is an error.
    """
    lo, hi = map(float, alpha_range)
    if not 0 < lo < hi:
        raise ConfigError("alpha_range must satisfy 0 < low < high")
    if t_cutoff <= 0:
        raise ConfigError("t_cutoff must be positive")
    if p_trotter.times[0] > 1e-12 or p_vqa.times[0] > 1e-12:
        raise ConfigError("both series must start at t = 0")
    if p_trotter.times[-1] < t_cutoff - 1e-9 * max(1.0, t_cutoff):
        raise ConfigError(f"Trotter reference ends at {p_trotter.times[-1]}, before the cutoff {t_cutoff}")
    t_end = p_trotter.times[p_trotter.times <= t_cutoff + 1e-9 * max(1.0, t_cutoff)][-1]
    hi = min(hi, p_vqa.times[-1] / t_end)
    if hi < lo:
        raise ConfigError(f"VQA series ends at {p_vqa.times[-1]} and cannot cover alpha={lo} up to {t_end}")

    def f(a):
        return alpha_objective(p_vqa, p_trotter, a, t_cutoff, site)

    grid = np.linspace(lo, hi, SCAN_POINTS)
    if lo < 1.0 < hi:
        # "no correction" is always a candidate
        grid = np.union1d(grid, [1.0])
    values = np.array([f(a) for a in grid])
    i = int(np.argmin(values))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    best = _golden(f, a, b, tol) if b > a else float(a)
    value = f(best)
    # keep the scan point when it is already at least as good
    if values[i] <= value:
        best, value = float(grid[i]), float(values[i])
    return MitigationResult(best, float(t_cutoff), value)


def apply_alpha(series: PopulationSeries, alpha: float) -> PopulationSeries:
    """p_corr(t) = p_raw(alpha t) for every column, on the raw grid divided by alpha."""
    if not alpha > 0:
        raise ConfigError("alpha must be positive")
    if len(series) == 0:
        raise ConfigError("empty series")
    return PopulationSeries(series.times / alpha, series.populations, series.ipr, series.extra)


def resample(series: PopulationSeries, times) -> PopulationSeries:
    """Linear interpolation of every column onto ``times`` inside the series range."""
    times = np.asarray(times, dtype=float)
    cols = series.at(times)
    n = series.num_sites
    extra = tuple((name, cols[:, n + 1 + j]) for j, (name, _) in enumerate(series.extra))
    return PopulationSeries(times, cols[:, :n], cols[:, n], extra)


def _with_window(exc: Exception, w: int) -> Exception:
    """Same exception type with the window index prefixed to the message."""
    try:
        wrapped = type(exc)(f"window {w}: {exc}")
    except Exception:
        return exc
    wrapped.window = w
    return wrapped


@dataclass(frozen=True)
class VqaWindow:
    """What a VQA runner hands back for one window.

    ``series`` is on raw VQA time relative to the window start,
    ``start_state`` is the variational state at the window start and
    ``carry`` is passed unchanged to the next call (e.g. the final theta).
    """

    series: PopulationSeries
    start_state: Any
    carry: Any = None


def windowed_alpha(
    vqa_runner: Callable[[float, float, Any], VqaWindow],
    trotter_runner: Callable[[Any, float, float], PopulationSeries],
    window_length: float,
    t_cutoff: float,
    num_windows: int,
    alpha_range: tuple[float, float] = DEFAULT_ALPHA_RANGE,
    site: int = 0,
    carry: Any = None,
) -> tuple[list[MitigationResult], PopulationSeries]:
    """Window-local alphas and the concatenated corrected series.

    Window w runs the VQA for ``window_length`` of raw time through
    ``vqa_runner(raw_start, window_length, carry)``.  A Trotter reference
    ``trotter_runner(start_state, physical_start, t_cutoff)`` is launched
    from the VQA state at the window start, alpha is fitted on the window,
    and the corrected window is appended after the previous one.
    """
    if window_length < t_cutoff:
        raise ConfigError("window_length must be at least t_cutoff")
    if num_windows < 1:
        raise ConfigError("need at least one window")
    results = []
    times, pops, iprs = [], [], []
    phys_start = 0.0
    for w in range(num_windows):
        raw_start = w * window_length
        try:
            win = vqa_runner(raw_start, window_length, carry)
            ref = trotter_runner(win.start_state, phys_start, t_cutoff)
        except Exception as exc:
            raise _with_window(exc, w) from exc
        fit = extract_alpha(win.series, ref, t_cutoff, alpha_range, site)
        corrected = apply_alpha(win.series, fit.alpha)
        phys_end = phys_start + corrected.times[-1]
        results.append(MitigationResult(fit.alpha, fit.t_cutoff, fit.objective, (phys_start, phys_end)))
        keep = slice(0 if w == 0 else 1, None)
        times.append(corrected.times[keep] + phys_start)
        pops.append(corrected.populations[keep])
        iprs.append(corrected.ipr[keep])
        phys_start = phys_end
        carry = win.carry
    series = PopulationSeries(np.concatenate(times), np.concatenate(pops), np.concatenate(iprs))
    return results, series


def perturbation_diagnostics(m0, v0, delta_m, delta_v) -> np.ndarray:
    """First-order change of theta-dot: M0^-1 dV - M0^-1 dM M0^-1 V0."""
    m0 = np.asarray(m0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    try:
        x0 = np.linalg.solve(m0, v0)
        return np.linalg.solve(m0, np.asarray(delta_v, dtype=float) - np.asarray(delta_m, dtype=float) @ x0)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("M0 is singular") from exc


def write_mitigation_csv(results, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["window_start_fs", "alpha", "objective"])
        for r in results:
            start = 0.0 if r.window is None else r.window[0]
            w.writerow([repr(float(start)), repr(float(r.alpha)), repr(float(r.objective))])


def read_mitigation_csv(path) -> list[tuple[float, float, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["window_start_fs", "alpha", "objective"]:
        raise ConfigError(f"{path}: expected header 'window_start_fs,alpha,objective'")
    return [tuple(float(x) for x in r) for r in rows[1:] if r]
