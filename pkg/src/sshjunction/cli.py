"""Command-line front end: ``sshjunction {optimize,run,sweep,validate-leads}``.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
failure (optimizer, propagation, or a failed lead validation).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, ExperimentConfig
from .dynamics import StepRejected
from .ensemble import EnsembleError, run_ensemble
from .lattice import ConvergenceError, HBAR, band_gap, normal_mode_analysis, optimize_geometry, total_ground_energy
from .leads import compare_markovian, reflection_time
from .output import write_json, write_sweep, write_timeseries

log = logging.getLogger("sshjunction")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ValidationFailed(RuntimeError):
    pass


def cmd_optimize(cfg: ExperimentConfig, out: Path, args) -> int:
    wire = cfg.wire
    initial = None
    if args.start_from:
        try:
            initial = np.asarray(json.loads(Path(args.start_from).read_text())["geometry_u"], dtype=float)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read starting geometry: {exc}") from None
    ground = optimize_geometry(wire, initial=initial)
    modes = normal_mode_analysis(wire, ground)
    payload = {
        "command": "optimize", "config_hash": cfg.hash, "n_sites": wire.n_sites,
        "geometry_u": ground.u, "bond_alternation": np.diff(ground.u),
        "gap_eV": band_gap(wire, ground.u), "ground_energy_eV": total_ground_energy(wire, ground.u),
        "mode_frequencies_per_fs": modes.frequencies, "mode_energies_eV": HBAR * modes.frequencies,
        "zero_point_energy_eV": modes.zero_point_energy,
    }
    path = write_json(out / "optimize.json", payload)
    log.info("gap %.4f eV, zero-point energy %.4f eV -> %s", payload["gap_eV"], modes.zero_point_energy, path)
    return EXIT_OK


def _summary_payload(summary, command, cfg, extra=None) -> dict:
    return {"command": command, "config_hash": cfg.hash, "base_seed": cfg.ensemble.base_seed,
            "rigid": cfg.ensemble.rigid, "seeds": summary.seeds,
            "final_norm_mean": float(summary.mean["norm"][-1]), **summary.scalars(), **(extra or {})}


def cmd_run(cfg: ExperimentConfig, out: Path, args) -> int:
    summary = run_ensemble(cfg.ensemble_config(), workers=cfg.ensemble.workers)
    write_timeseries(out / "run.csv", summary, "run", cfg.hash, cfg.ensemble.base_seed)
    write_json(out / "run.json", _summary_payload(summary, "run", cfg))
    log.info("q_L=%.5g q_R=%.5g eta=%s", summary.q_L, summary.q_R, summary.eta)
    return EXIT_OK


def sweep_pulse(pulse, variable: str, value: float):
    if variable == "omega":
        return replace(pulse, omega=float(value))
    return pulse.with_relative_phase(float(value))


def cmd_sweep(cfg: ExperimentConfig, out: Path, args) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep command needs a [sweep] section")
    rows = []
    failures = 0
    for i, value in enumerate(cfg.sweep.grid()):
        pulse = sweep_pulse(cfg.pulse, cfg.sweep.variable, value)
        try:
            summary = run_ensemble(cfg.ensemble_config(pulse), workers=cfg.ensemble.workers)
        except (EnsembleError, StepRejected, ConvergenceError) as exc:
            failures += 1
            log.warning("sweep point %s=%g failed: %s", cfg.sweep.variable, value, exc)
            rows.append({"value": value, "n_traj": 0, "status": "failed"})
            continue
        rows.append({"value": value, **summary.scalars(), "status": "ok"})
        if cfg.output.time_series:
            write_timeseries(out / f"sweep_{i:03d}.csv", summary, "sweep", cfg.hash, cfg.ensemble.base_seed,
                             {cfg.sweep.variable: value})
        log.info("%s=%.4f q_L-q_R=%.5g eta=%s", cfg.sweep.variable, value, summary.q_diff, summary.eta)
    write_sweep(out / "sweep.csv", rows, cfg.sweep.variable, cfg.hash, cfg.ensemble.base_seed)
    write_json(out / "sweep.json", {"command": "sweep", "config_hash": cfg.hash,
                                    "base_seed": cfg.ensemble.base_seed, "variable": cfg.sweep.variable,
                                    "points": rows, "failed_points": failures})
    return EXIT_NUMERIC if failures == len(rows) else EXIT_OK


def cmd_validate_leads(cfg: ExperimentConfig, out: Path, args) -> int:
    v = cfg.validation
    wire = replace(cfg.wire, n_sites=v.n_sites)
    t_ref = reflection_time(wire, v.n_lead_sites)
    t_final = 0.95 * t_ref if v.t_final is None else v.t_final
    if t_final >= t_ref:
        raise ConfigError(f"t_final={t_final} fs reaches the reflection time {t_ref:.3f} fs; "
                          "increase n_lead_sites")
    times, exact, markov, window, dev = compare_markovian(wire, v.n_lead_sites, t_final)
    passed = bool(dev <= v.tolerance)
    payload = {"command": "validate-leads", "config_hash": cfg.hash, "n_sites": v.n_sites,
               "n_lead_sites": v.n_lead_sites, "lead_hopping_eV": wire.lead_hopping,
               "t_coup_eV": wire.t_coup, "reflection_time_fs": t_ref, "t_final_fs": t_final,
               "window_start_fs": 10.0 * HBAR / wire.lead_hopping, "max_relative_deviation": dev,
               "tolerance": v.tolerance, "passed": passed}
    write_json(out / "validate_leads.json", payload)
    lines = ["# sshjunction command=validate-leads config_hash=" + cfg.hash, "t,norm_finite_leads,norm_absorbing,in_window"]
    lines += [f"{t!r},{a!r},{b!r},{int(w)}" for t, a, b, w in zip(times.tolist(), exact.tolist(), markov.tolist(), window)]
    (out / "validate_leads.csv").write_text("\n".join(lines) + "\n")
    log.info("max relative deviation %.4g (tolerance %.3g): %s", dev, v.tolerance, "PASS" if passed else "FAIL")
    if not passed:
        raise ValidationFailed(f"deviation {dev:.4g} exceeds tolerance {v.tolerance}")
    return EXIT_OK


COMMANDS = {"optimize": cmd_optimize, "run": cmd_run, "sweep": cmd_sweep, "validate-leads": cmd_validate_leads}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML experiment file")
    common.add_argument("--seed", type=int, help="override [ensemble] base_seed")
    common.add_argument("--out", help="override [output] directory")
    common.add_argument("--traj", type=int, help="override [ensemble] n_traj")
    common.add_argument("--rigid", action="store_true", help="single trajectory of the rigid wire")
    common.add_argument("--workers", type=int, help="override [ensemble] workers (processes)")
    common.add_argument("-q", "--quiet", action="store_true", help="no progress output")
    parser = argparse.ArgumentParser(prog="sshjunction", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    opt = sub.add_parser("optimize", parents=[common], help="ground-state geometry and normal modes")
    opt.add_argument("--start-from", help="optimize.json whose geometry seeds the optimizer")
    sub.add_parser("run", parents=[common], help="single trajectory or ensemble")
    sub.add_parser("sweep", parents=[common], help="ensembles over a frequency or phase grid")
    sub.add_parser("validate-leads", parents=[common], help="absorbing leads against finite explicit leads")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, stream=sys.stderr,
                        format="%(message)s")
    try:
        cfg = cfgmod.load(args.config)
        if args.traj is not None and args.traj < 1:
            raise ConfigError("--traj must be >= 1")
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = cfg.with_overrides(seed=args.seed, n_traj=args.traj, rigid=args.rigid, directory=args.out,
                                 workers=args.workers)
        out = Path(cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.toml").write_text(cfg.canonical())
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, StepRejected, EnsembleError, ValidationFailed, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
