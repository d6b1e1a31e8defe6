"""Command-line front end.

    qexciton encode snapshot.json
    qexciton evolve --config run.json --method vqa --out runs/a
    qexciton mitigate --vqa vqa.csv --trotter trotter.csv --t-cutoff 20 --out runs/m
    qexciton ensemble --config run.json --out runs/e
    qexciton synth-traj --config run.json --out runs/t

Exit status: 0 on success, 1 on configuration errors, 2 on numerical failures.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .analysis import (
    EnsembleSpec,
    Encoding,
    PopulationSeries,
    read_series_csv,
    run_ensemble,
    write_series_csv,
)
from .errors import ConfigError, NumericalError
from .exact import HamiltonianSource, evolve_exact, hamiltonian_at
from .hamiltonians import (
    COULOMB_EV_ANGSTROM,
    HBAR_EV_FS,
    FrenkelSnapshot,
    MoleculeElectronicSpec,
    build_fullspace,
    build_tfi,
    encode_frenkel_binary,
    padded_size,
    read_snapshot_json,
    read_trajectory_csv,
    section_v_model,
    synthesize_trajectory,
    trajectory_source,
    write_trajectory_csv,
)
from .mitigation import apply_alpha, extract_alpha, write_mitigation_csv
from .sim import NOISELESS, basis_prep, basis_state
from .trotter import run_trotter
from .vqa import Backend, VqaConfig, hamiltonian_ansatz, make_default_ansatz, run_vqa, write_theta_csv

log = logging.getLogger("qexciton")

METHODS = ("exact", "vqa", "trotter")

DEFAULTS: dict[str, Any] = {
    "model": {"kind": "section_v"},
    "method": "exact",
    "dt": 1.9746,
    "total_time": 200.0,
    "seed": 0,
    "eps": 1e-6,
    "backend": {"kind": "analytic", "shots": None, "lambda": 0.0, "mode": "per_gate"},
    "ansatz": {"kind": "hamiltonian", "layers": 1},
    "ensemble": {
        "trajectory_count": 100,
        "energy_std": 0.01,
        "coupling_std": 0.005,
        "correlation_time": 50.0,
        "trajectory_dt": 1.0,
        "interpolation": "linear",
    },
}


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return _merge(DEFAULTS, data)


def _apply_overrides(cfg: dict, args) -> dict:
    if getattr(args, "method", None):
        cfg["method"] = args.method
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    backend = cfg["backend"]
    if getattr(args, "shots", None) is not None:
        backend["shots"] = args.shots
        if backend["kind"] == "analytic":
            backend["kind"] = "sampled"
    if getattr(args, "lam", None) is not None:
        backend["lambda"] = args.lam
        backend["kind"] = "noisy"
    return cfg


@dataclass
class Problem:
    h_source: HamiltonianSource
    psi0_index: int
    num_qubits: int
    encoding: Encoding
    hbar: float


def _mean_snapshot(model: dict) -> FrenkelSnapshot:
    kind = model.get("kind")
    if kind == "section_v":
        return section_v_model(model.get("delta_e", 0.020), model.get("coupling", 0.040))
    if kind == "frenkel":
        if "couplings" in model:
            return FrenkelSnapshot(np.asarray(model["energies"], float), np.asarray(model["couplings"], float))
        return FrenkelSnapshot.chain(model["energies"], model["coupling"], model.get("periodic", False))
    if kind == "snapshot":
        return read_snapshot_json(model["path"])
    raise ConfigError(f"model kind {kind!r} has no Frenkel snapshot")


def build_problem(cfg: dict, trajectory=None) -> Problem:
    """Hamiltonian source, initial basis index and readout encoding for a config."""
    model = cfg["model"]
    kind = model.get("kind")
    try:
        if kind == "tfi":
            h = build_tfi(model.get("h", 0.5), model.get("J", 0.5))
            return Problem(h, int(model.get("initial_index", 0)), 2, Encoding.binary(4), cfg.get("hbar", 1.0))
        if kind == "fullspace":
            specs = [MoleculeElectronicSpec.from_dict(d) for d in model["molecules"]]
            n = len(specs)
            site = int(model.get("initial_site", 1))
            if not 1 <= site <= n:
                raise ConfigError(f"initial_site must be in 1..{n}")
            h = build_fullspace(specs, model.get("kappa", COULOMB_EV_ANGSTROM))
            return Problem(h, 1 << (n - site), n, Encoding.fullspace(n), cfg.get("hbar", HBAR_EV_FS))
        if kind == "trajectory" or trajectory is not None:
            traj = trajectory if trajectory is not None else read_trajectory_csv(model["path"], model.get("interpolation", "linear"))
            n_sites = traj.num_sites
            source = trajectory_source(traj)
        else:
            snap = _mean_snapshot(model)
            n_sites = snap.num_sites
            source = encode_frenkel_binary(snap)[0]
    except KeyError as exc:
        raise ConfigError(f"model is missing {exc.args[0]!r}") from exc
    site = int(model.get("initial_site", 1))
    if not 1 <= site <= n_sites:
        raise ConfigError(f"initial_site must be in 1..{n_sites}")
    num_qubits = max(1, padded_size(n_sites).bit_length() - 1)
    return Problem(source, site - 1, num_qubits, Encoding.binary(n_sites), cfg.get("hbar", HBAR_EV_FS))


def _backend(cfg: dict) -> Backend:
    b = cfg["backend"]
    kind = b.get("kind", "analytic")
    shots = b.get("shots")
    if kind == "noisy":
        return Backend.noisy(float(b.get("lambda", 0.0)), shots, cfg["seed"], b.get("mode", "per_gate"))
    return Backend(kind, shots, cfg["seed"])


def _check_times(cfg: dict) -> tuple[float, float]:
    dt, total = float(cfg["dt"]), float(cfg["total_time"])
    if dt <= 0 or total < 0:
        raise ConfigError("dt must be positive and total_time non-negative")
    return dt, total


def evolve(cfg: dict, trajectory=None, out_dir: Path | None = None) -> PopulationSeries:
    """Run one configured evolution and optionally write its outputs."""
    method = cfg["method"]
    if method not in METHODS:
        raise ConfigError(f"method must be one of {', '.join(METHODS)}")
    prob = build_problem(cfg, trajectory)
    dt, total = _check_times(cfg)
    psi0 = basis_state(prob.psi0_index, prob.num_qubits)
    if method == "exact":
        grid = dt * np.arange(int(round(total / dt)) + 1)
        return PopulationSeries.from_states(grid, evolve_exact(prob.h_source, psi0, grid, hbar=prob.hbar), prob.encoding)
    backend = _backend(cfg)
    if method == "trotter":
        noise = backend.noise if backend.kind == "noisy" else NOISELESS
        return run_trotter(prob.h_source, psi0, total, dt, prob.encoding, noise, backend.shots, cfg["seed"], prob.hbar)
    prep = basis_prep(prob.psi0_index, prob.num_qubits)
    a = cfg["ansatz"]
    layers = int(a.get("layers", 1))
    if a.get("kind") == "default":
        ansatz = make_default_ansatz(prob.num_qubits, layers, prep)
    elif a.get("kind") == "hamiltonian":
        h0 = hamiltonian_at(prob.h_source, 0.0)
        ansatz = hamiltonian_ansatz(h0, prep, layers)
    else:
        raise ConfigError("ansatz kind must be 'default' or 'hamiltonian'")
    config = VqaConfig(dt, total, float(cfg["eps"]), backend, float(cfg.get("alpha", 1.0)), prob.hbar)
    params, states = run_vqa(prob.h_source, ansatz, config)
    if out_dir is not None:
        write_theta_csv(params, out_dir / "theta.csv", ansatz.labels())
    return PopulationSeries.from_states([p.t for p in params], states, prob.encoding)


def _write_config(cfg: dict, out_dir: Path) -> None:
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_encode(args) -> int:
    if args.snapshot:
        snap = read_snapshot_json(args.snapshot)
    else:
        snap = _mean_snapshot(load_config(args.config)["model"])
    h, offset = encode_frenkel_binary(snap)
    print(h.to_text())
    print(f"offset {offset!r}")
    return 0


def cmd_evolve(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = _out_dir(args.out)
    series = evolve(cfg, out_dir=out)
    write_series_csv(series, out / "populations.csv")
    _write_config(cfg, out)
    log.info("wrote %d rows to %s", len(series), out / "populations.csv")
    return 0


def cmd_mitigate(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    mcfg = cfg.get("mitigation", {})
    t_cut = args.t_cutoff if args.t_cutoff is not None else mcfg.get("t_cutoff")
    if t_cut is None:
        raise ConfigError("mitigate needs --t-cutoff or mitigation.t_cutoff in the config")
    alpha_range = tuple(args.alpha_range or mcfg.get("alpha_range", (0.5, 3.0)))
    vqa = read_series_csv(args.vqa)
    trotter = read_series_csv(args.trotter)
    result = extract_alpha(vqa, trotter, float(t_cut), alpha_range)
    out = _out_dir(args.out)
    write_series_csv(apply_alpha(vqa, result.alpha), out / "corrected.csv")
    write_mitigation_csv([result], out / "mitigation.csv")
    resolved = {
        "vqa": str(args.vqa),
        "trotter": str(args.trotter),
        "mitigation": {"t_cutoff": float(t_cut), "alpha_range": list(alpha_range)},
        "alpha": result.alpha,
        "objective": result.objective,
    }
    _write_config(resolved, out)
    print(f"alpha {float(result.alpha)!r}")
    return 0


def _ensemble_member_factory(cfg: dict):
    ens = cfg["ensemble"]
    mean = _mean_snapshot(cfg["model"])
    dt, total = _check_times(cfg)
    try:
        corr = float(ens["correlation_time"])
        step = float(ens["trajectory_dt"])
        e_std, v_std = ens["energy_std"], ens["coupling_std"]
    except KeyError as exc:
        raise ConfigError(f"ensemble is missing {exc.args[0]!r}") from exc
    # cover the last evolution step even if total is not a multiple of the trajectory step
    duration = max(total, step) + step

    def trajectory(seed):
        return synthesize_trajectory(mean, e_std, v_std, corr, step, duration, seed, ens.get("interpolation", "linear"))

    def member(seed):
        member_cfg = copy.deepcopy(cfg)
        member_cfg["seed"] = seed
        return evolve(member_cfg, trajectory=trajectory(seed))

    return trajectory, member


def cmd_ensemble(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    ens = cfg["ensemble"]
    if args.count is not None:
        ens["trajectory_count"] = args.count
    ens["base_seed"] = cfg["seed"]
    spec = EnsembleSpec(int(ens["trajectory_count"]), int(ens["base_seed"]))
    _, member = _ensemble_member_factory(cfg)
    mean = run_ensemble(spec, member)
    out = _out_dir(args.out)
    write_series_csv(mean, out / "ensemble.csv")
    _write_config(cfg, out)
    return 0


def cmd_synth_traj(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    trajectory, _ = _ensemble_member_factory(cfg)
    out = _out_dir(args.out)
    write_trajectory_csv(trajectory(cfg["seed"]), out / "trajectory.csv")
    _write_config(cfg, out)
    return 0


def _alpha_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected LOW,HIGH") from exc
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qexciton", description="Exciton dynamics on simulated quantum circuits.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    enc = sub.add_parser("encode", help="print the Pauli encoding of a Frenkel snapshot")
    enc.add_argument("snapshot", nargs="?", help="snapshot JSON with energies and couplings")
    enc.add_argument("--config")
    enc.set_defaults(func=cmd_encode)

    def run_flags(sp, method=True):
        sp.add_argument("--config")
        sp.add_argument("--out", required=True)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--shots", type=int)
        sp.add_argument("--lambda", dest="lam", type=float)
        if method:
            sp.add_argument("--method", choices=METHODS)

    ev = sub.add_parser("evolve", help="run exact, VQA or Trotter dynamics")
    run_flags(ev)
    ev.set_defaults(func=cmd_evolve)

    mit = sub.add_parser("mitigate", help="fit alpha and rescale a VQA series")
    mit.add_argument("--vqa", required=True)
    mit.add_argument("--trotter", required=True)
    mit.add_argument("--t-cutoff", type=float)
    mit.add_argument("--alpha-range", type=_alpha_range)
    mit.add_argument("--config")
    mit.add_argument("--out", required=True)
    mit.set_defaults(func=cmd_mitigate)

    ens = sub.add_parser("ensemble", help="average runs over synthetic fluctuating Hamiltonians")
    run_flags(ens)
    ens.add_argument("--count", type=int)
    ens.set_defaults(func=cmd_ensemble)

    st = sub.add_parser("synth-traj", help="write a synthetic Hamiltonian trajectory")
    run_flags(st, method=False)
    st.set_defaults(func=cmd_synth_traj)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"qexciton: config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"qexciton: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
