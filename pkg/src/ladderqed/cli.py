"""Command-line front end.

Usage::

    ladderqed map --config docs/configs/two_photon_map.ini --out out/ --threads 4
    ladderqed selfcheck

Exit status: 0 on success, 2 for a configuration or input error, 3 when a
solver fails, 4 when a check fails.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .checks import run_all
from .config import ConfigError, RunConfig, load_config
from .dressed import SIDEBAND_PAIRS, sideband_frequencies
from .response import ResponseModel, sideband_transmission, two_tone_oracle
from .steady import SolverError, evolve_oracle
from .sweep import SweepSpec, export, run_sweep
from .twolevel import fit_traces, read_traces, synthesize_traces

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4

log = logging.getLogger("ladderqed")


def _fmt(x) -> str:
    return repr(float(x))


def _write(cfg: RunConfig, name: str, blob) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / name
    if isinstance(blob, str):
        blob = blob.encode("utf-8")
    path.write_bytes(blob)
    log.info("wrote %s", path)
    return path


def _sweep_for(cfg: RunConfig, outputs) -> SweepSpec:
    """The configured sweep with ``outputs``; a single drive point if none is configured."""
    if cfg.sweep is not None:
        return replace(cfg.sweep, outputs=tuple(outputs))
    d = cfg.drive
    if d.amplitude_mode == "dbm":
        lo, scale = d.value, "dbm"
    else:
        lo, scale = d.rabi10(cfg.system), "rabi"
    return SweepSpec(
        drive_min=lo,
        drive_max=lo,
        drive_n=1,
        drive_scale=scale,
        probe_min=d.omega_d,
        probe_max=d.omega_d,
        probe_n=1,
        drive_frequency_mode=cfg.drive_frequency,
        drive_frequency=d.omega_d if cfg.drive_frequency == "explicit" else None,
        outputs=tuple(outputs),
        calibration=cfg.calibration,
        nonideal=cfg.nonideal,
    )


def _sideband_rows(result, populations) -> str:
    buf = io.StringIO()
    buf.write("drive_value,rabi10_ghz,lower,upper,frequency_ghz,kind\n")
    freqs = result.data["sidebands"]
    for i, d in enumerate(result.drive_values):
        for k, (lo, up) in enumerate(SIDEBAND_PAIRS):
            diff = populations[i, "gme".index(up)] - populations[i, "gme".index(lo)]
            kind = "gain" if diff > 0 else "loss" if diff < 0 else "none"
            buf.write(f"{_fmt(d)},{_fmt(result.rabi10[i])},{lo},{up},{_fmt(freqs[i, k])},{kind}\n")
    return buf.getvalue()


def cmd_dressed(cfg: RunConfig, args) -> int:
    spec = _sweep_for(cfg, ("dressed_energies", "overlaps", "sidebands", "populations"))
    result = run_sweep(cfg.system, spec, threads=cfg.threads, timestamp=cfg.timestamp)
    _write(cfg, "energies.csv", export(_only(result, "dressed_energies"), "drive_table"))
    _write(cfg, "overlaps.csv", export(_only(result, "overlaps"), "drive_table"))
    meta = export(_only(result, "sidebands"), "drive_table").split(b"\n", 1)[0] + b"\n"
    _write(cfg, "sidebands.csv", meta + _sideband_rows(result, result.data["populations"]).encode())
    return EXIT_SOLVER if result.flags.any() else EXIT_OK


def _only(result, name):
    return replace(result, data={name: result.data[name]})


def cmd_populations(cfg: RunConfig, args) -> int:
    spec = _sweep_for(cfg, ("populations",))
    result = run_sweep(cfg.system, spec, threads=cfg.threads, timestamp=cfg.timestamp)
    _write(cfg, "populations.csv", export(result, "drive_table"))
    return EXIT_SOLVER if result.flags.any() else EXIT_OK


def cmd_map(cfg: RunConfig, args) -> int:
    if cfg.sweep is None:
        raise ConfigError(f"{cfg.source}: map needs a [sweep] section")
    spec = cfg.sweep
    if "transmission_map" not in spec.outputs:
        spec = replace(spec, outputs=("transmission_map",) + spec.outputs)
    result = run_sweep(cfg.system, spec, threads=cfg.threads, timestamp=cfg.timestamp)
    _write(cfg, "map.csv", export(result, "long"))
    if cfg.write_matrix:
        _write(cfg, "map_matrix.csv", export(result, "matrix"))
    if len(spec.outputs) > 1:
        _write(cfg, "drive_table.csv", export(result, "drive_table"))
    n_bad = int(result.flags.sum())
    if n_bad:
        log.error("%d map cells failed", n_bad)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_sidebands(cfg: RunConfig, args) -> int:
    params, drive = cfg.system, cfg.drive
    model = ResponseModel(params, drive, cfg.nonideal)
    table = sideband_frequencies(model.basis, model.stationary.populations, drive.omega_d)
    full = np.abs(model.transmission(table.frequencies))
    lines = ["lower,upper,frequency_ghz,kind,abs_t_isolated,abs_t_full"]
    for k, sb in enumerate(table):
        iso = abs(sideband_transmission(params, drive, sb.lower, sb.upper, cfg.nonideal))
        lines.append(f"{sb.lower},{sb.upper},{_fmt(sb.frequency)},{sb.kind},{_fmt(iso)},{_fmt(full[k])}")
    text = "\n".join(lines) + "\n"
    _write(cfg, "sidebands.csv", text)
    print(text, end="")
    return EXIT_OK


def cmd_synth(cfg: RunConfig, args) -> int:
    s = cfg.synth
    data = synthesize_traces(
        cfg.system,
        cfg.calibration,
        powers=s["powers"],
        detunings=np.linspace(s["detuning_min"], s["detuning_max"], s["detuning_n"]),
        noise=s["noise"],
        seed=s["seed"],
        reference_ghz=s["reference_ghz"],
    )
    _write(cfg, "traces.csv", data.to_text())
    return EXIT_OK


def cmd_fit(cfg: RunConfig, args) -> int:
    path = args.data or cfg.fit.get("data")
    if path is None:
        raise ConfigError(f"{cfg.source}: fit needs [fit] data or --data")
    try:
        data = read_traces(path)
    except OSError as exc:
        raise ConfigError(f"cannot read traces {path}: {exc.strerror}") from None
    result = fit_traces(
        data,
        cfg.system,
        cfg.calibration,
        reference_ghz=cfg.fit["reference_ghz"],
        fixed=cfg.fit["fixed"],
        max_iterations=cfg.fit["max_iterations"],
    )
    report = result.report()
    _write(cfg, "fit_report.txt", report + "\n")
    summary = {
        "params": result.params.to_dict(),
        "anchor_dbm": result.calibration.anchor_dbm,
        "anchor_rabi10": result.calibration.anchor_rabi10,
        "stderr": result.stderr,
        "chi2": result.chi2,
        "n_points": result.n_points,
        "converged": result.converged,
        "identifiable": result.identifiable,
        "fixed": list(result.fixed),
        "weak_resonant_abs_t": abs(result.weak_resonant_t()),
    }
    _write(cfg, "fit.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(report)
    if not result.converged:
        log.error("fit did not converge: %s", result.message)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_selfcheck(cfg: RunConfig, args) -> int:
    results = run_all(
        cfg.system,
        cfg.drive,
        nonideal=cfg.nonideal,
        xi_sign=-1.0 if args.corrupt_xi else 1.0,
        n_oracle=args.points,
        seed=args.seed,
    )
    text = "\n".join(r.line() for r in results) + "\n"
    print(text, end="")
    if args.out is not None:
        _write(cfg, "selfcheck.txt", text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def cmd_oracle(cfg: RunConfig, args) -> int:
    params, drive = cfg.system, cfg.drive
    model = ResponseModel(params, drive, cfg.nonideal)
    rho0 = np.zeros((3, 3), dtype=complex)
    rho0[0, 0] = 1.0
    oracle = evolve_oracle(params, drive, rho0, nonideal=cfg.nonideal)
    solver = model.stationary.rho_bare.data
    diff = float(np.max(np.abs(solver - oracle.data)))
    lines = ["row,col,re_solver,im_solver,re_oracle,im_oracle"]
    for a in range(3):
        for b in range(3):
            s, o = solver[a, b], oracle.data[a, b]
            lines.append(f"{a},{b},{_fmt(s.real)},{_fmt(s.imag)},{_fmt(o.real)},{_fmt(o.imag)}")
    print(f"stationary state: max |solver - oracle| = {diff:.3g}")
    ok = diff < 1e-6
    if cfg.probe is not None:
        t_lin = complex(model.transmission([cfg.probe.omega_p])[0])
        t_osc = two_tone_oracle(params, drive, cfg.probe, nonideal=cfg.nonideal).t
        lines.append(f"# probe {_fmt(cfg.probe.omega_p)} GHz: t_linear={t_lin!r} t_two_tone={t_osc!r}")
        gap = abs(abs(t_lin) - abs(t_osc))
        print(f"probe transmission: |t| linear {abs(t_lin):.6f}, two-tone {abs(t_osc):.6f}")
        ok = ok and gap < 1e-3
    _write(cfg, "oracle.csv", "\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "dressed": (cmd_dressed, "dressed energies, bare overlaps and sideband frequencies over the drive axis"),
    "populations": (cmd_populations, "stationary dressed-state density matrix over the drive axis"),
    "map": (cmd_map, "probe transmission map over drive strength and probe frequency"),
    "sidebands": (cmd_sidebands, "sideband table at the configured drive point"),
    "synth": (cmd_synth, "synthetic two-level drive-transmission traces"),
    "fit": (cmd_fit, "fit two-level drive-transmission traces"),
    "selfcheck": (cmd_selfcheck, "run the internal consistency checks"),
    "oracle": (cmd_oracle, "compare the solvers with direct time integration at one drive point"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="INI configuration file")
    common.add_argument("-o", "--out", type=Path, help="output directory (overrides [output] directory)")
    common.add_argument("--threads", type=int, help="maximum worker threads for sweeps")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a configuration key; may be repeated")
    common.add_argument("--timestamp", action="store_true", help="record the run time in output metadata")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ladderqed", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "fit":
            p.add_argument("--data", type=Path, help="trace file (overrides [fit] data)")
        if name == "selfcheck":
            p.add_argument("--points", type=int, default=5, help="random drive points for the oracle check")
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--corrupt-xi", action="store_true", help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    func, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.config, args.set)
        if args.out is not None:
            cfg.output_dir = args.out
        if args.threads is not None:
            cfg.threads = args.threads
        if args.timestamp:
            cfg.timestamp = True
        return func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # bad values that slipped past config parsing, or malformed input files
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
