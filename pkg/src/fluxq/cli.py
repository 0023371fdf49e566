"""``fluxq`` command-line front end.

Exit codes: 0 success, 1 computation failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import shutil
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .circuit import FluxBias, potential
from .config import ConfigError, OutputSettings, RunConfig, load_config
from .decoherence import t1_curve
from .eigensolver import SolverError, qubit_frequency, wavefunction_phase_basis
from .landscape import Axis, FluxMap, fixed_probe_map, sweep_frequency
from .landscape.calibration import CalibrationError, infer_crosstalk
from .landscape.readout import NonDispersiveError, calibration_probe
from .landscape.sweep import SweepError
from .plotting import heatmap_svg, line_plot_svg
from .tls import SwapSpectrumConfig, is_detectable, sample_ensemble, simulate_strain_spectrum

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _axis(name: str, text: str) -> Axis:
    try:
        return Axis.parse(name, text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _log(args: argparse.Namespace, cfg: RunConfig, msg: str) -> None:
    if cfg.output.verbosity > 0:
        print(msg, file=sys.stderr, flush=True)


def _metadata(cfg: RunConfig, args: argparse.Namespace, **extra: Any) -> dict[str, Any]:
    meta = {"fluxq_version": __version__, "command": args.command, "config": cfg.to_dict(), **extra}
    if args.timestamp:
        meta["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return meta


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.output.dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write_map(fmap: FluxMap, cfg: RunConfig, stem: str, svg: Callable[[], str] | None) -> list[Path]:
    out = _out_dir(cfg)
    written = []
    if "csv" in cfg.output.formats:
        written.append(fmap.save(out / f"{stem}.csv"))
    if "json" in cfg.output.formats:
        written.append(fmap.save(out / f"{stem}.json"))
    if "svg" in cfg.output.formats and svg is not None:
        path = out / f"{stem}.svg"
        path.write_text(svg())
        written.append(path)
    return written


def _write_json(data: Any, path: Path) -> Path:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    return path


# subcommands ----------------------------------------------------------------


def cmd_freq(cfg: RunConfig, args: argparse.Namespace) -> int:
    bias = FluxBias(args.phi_t, args.phi_b)
    f01, spec = qubit_frequency(cfg.device, bias, cfg.solve)
    result = {
        "device": cfg.device.name,
        "phi_t": bias.phi_t,
        "phi_b": bias.phi_b,
        "f01_ghz": f01,
        "levels_ghz": [float(v) for v in spec.levels],
        "cutoff_used": spec.cutoff_used,
        "residual": spec.residual,
        "resolution_limited": spec.resolution_limited,
        "below_resolution": spec.below_resolution,
    }
    if args.json:
        print(json.dumps(result, sort_keys=True))
        return EXIT_OK
    print(f"device {cfg.device.name}  phi_t={bias.phi_t:g}  phi_b={bias.phi_b:g}")
    print(f"f01 = {f01:.9g} GHz  (cutoff {spec.cutoff_used}, residual {spec.residual:.2e})")
    if spec.below_resolution:
        print("note: f01 is below the numerical resolution floor")
    print(" k   E_k (GHz)        E_k - E_0 (GHz)")
    for k, e in enumerate(spec.levels):
        print(f"{k:2d}   {e:15.9f}  {e - spec.levels[0]:15.9f}")
    return EXIT_OK


def _config_hash(payload: dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def cmd_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    phi_t = _axis("phi_t", args.phi_t)
    phi_b = _axis("phi_b", args.phi_b)
    out = _out_dir(cfg)
    key = _config_hash(
        {"device": cfg.device.to_dict(), "solve": cfg.to_dict()["solve"],
         "phi_t": phi_t.to_dict(), "phi_b": phi_b.to_dict()}
    )
    ckpt = out / "sweep.rows"
    ckpt.mkdir(exist_ok=True)
    done = [0]

    def row_source(i: int):
        path = ckpt / f"row_{i:05d}.json"
        if not path.exists():
            return None
        data = json.loads(path.read_text())
        if data.get("key") != key or len(data["values"]) != phi_t.count:
            return None
        done[0] += 1
        return np.array([np.nan if v is None else v for v in data["values"]])

    def on_row(i: int, values: np.ndarray) -> None:
        vals = [None if np.isnan(v) else float(v) for v in values]
        (ckpt / f"row_{i:05d}.json").write_text(json.dumps({"key": key, "values": vals}))
        done[0] += 1
        _log(args, cfg, f"sweep: row {i + 1}/{phi_b.count} ({done[0]} done)")

    fmap = sweep_frequency(cfg.device, phi_t, phi_b, cfg.solve, args.threads, row_source, on_row)
    fmap.metadata.update(_metadata(cfg, args, seed=cfg.seed))
    files = _write_map(
        fmap, cfg, "sweep",
        lambda: heatmap_svg(fmap, f"f01 (GHz), {cfg.device.name}", log_scale=args.log),
    )
    if not args.keep_checkpoints:
        shutil.rmtree(ckpt, ignore_errors=True)
    v = fmap.values
    summary = {"min_f01_ghz": float(np.nanmin(v)), "max_f01_ghz": float(np.nanmax(v)),
               "n_failed": fmap.n_sentinel, "files": [str(p) for p in files]}
    print(json.dumps(summary, sort_keys=True) if args.json else
          f"f01 range {summary['min_f01_ghz']:.6g} .. {summary['max_f01_ghz']:.6g} GHz; wrote "
          + ", ".join(summary["files"]))
    return EXIT_OK


def cmd_potential(cfg: RunConfig, args: argparse.Namespace) -> int:
    bias = FluxBias(args.phi_t, args.phi_b)
    _, spec = qubit_frequency(cfg.device, bias, cfg.solve)
    phase = np.linspace(-np.pi, np.pi, args.points)
    u = potential(phase, bias, cfg.device)
    n_states = min(args.states, spec.states.shape[1])
    psi = [wavefunction_phase_basis(spec.states[:, k], phase) for k in range(n_states)]
    out = _out_dir(cfg)
    meta = _metadata(cfg, args, phi_t=bias.phi_t, phi_b=bias.phi_b,
                     levels_ghz=[float(v) for v in spec.levels[:n_states]])
    files = []
    if "csv" in cfg.output.formats:
        lines = ["# fluxq-potential v1", "# metadata: " + json.dumps(meta, sort_keys=True)]
        lines.append(",".join(["phase", "u_ghz"] + [f"psi{k}_re,psi{k}_im" for k in range(n_states)]))
        for j in range(phase.size):
            cells = [repr(float(phase[j])), repr(float(u[j]))]
            for p in psi:
                cells += [repr(float(p[j].real)), repr(float(p[j].imag))]
            lines.append(",".join(cells))
        path = out / "potential.csv"
        path.write_text("\n".join(lines) + "\n")
        files.append(path)
    if "json" in cfg.output.formats:
        files.append(_write_json({
            "format": "fluxq-potential", "version": 1, "phase": phase.tolist(), "u_ghz": u.tolist(),
            "psi": [{"re": p.real.tolist(), "im": p.imag.tolist()} for p in psi], "metadata": meta,
        }, out / "potential.json"))
    if "svg" in cfg.output.formats:
        # probability densities drawn on top of the potential, offset by their level
        scale = 0.25 * float(np.ptp(u)) / max(float(np.max(np.abs(psi[0]) ** 2)), 1e-300)
        series = {"U(phi)": u}
        for k, p in enumerate(psi):
            series[f"|psi{k}|^2"] = spec.levels[k] + scale * np.abs(p) ** 2
        path = out / "potential.svg"
        path.write_text(line_plot_svg(phase, series, f"potential, phi_t={bias.phi_t:g} phi_b={bias.phi_b:g}",
                                      "phase", "energy (GHz)", log_y=False))
        files.append(path)
    print("wrote " + ", ".join(str(p) for p in files))
    return EXIT_OK


def cmd_probe_map(cfg: RunConfig, args: argparse.Namespace) -> int:
    i_t = _axis("i_t", args.i_t)
    i_b = _axis("i_b", args.i_b)
    readout = cfg.readout
    if readout.f_probe_ghz is None:
        readout = calibration_probe(cfg.device, readout, cfg.solve)
    fmap = fixed_probe_map(cfg.device, readout, cfg.crosstalk, i_t, i_b, cfg.solve, args.threads)
    fmap.metadata.update(_metadata(cfg, args))
    files = _write_map(fmap, cfg, "probe_map", lambda: heatmap_svg(fmap, "|S21| at fixed probe"))
    print("wrote " + ", ".join(str(p) for p in files))
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig, args: argparse.Namespace) -> int:
    try:
        fmap = FluxMap.load(args.map_file)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read map {args.map_file}: {exc}") from exc
    result = infer_crosstalk(fmap, cfg.crosstalk, max_objective=args.max_objective)
    doc = {"format": "fluxq-crosstalk", "version": 1, **result.to_dict(),
           "metadata": _metadata(cfg, args, map_file=str(args.map_file))}
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if "json" in cfg.output.formats:
        (_out_dir(cfg) / "crosstalk.json").write_text(text)
    print(json.dumps(doc, sort_keys=True) if args.json else text, end="" if not args.json else "\n")
    return EXIT_OK


def cmd_t1(cfg: RunConfig, args: argparse.Namespace) -> int:
    axis = _axis("f01", args.f01)
    table = t1_curve(cfg.device, cfg.readout, cfg.env, axis.values, args.numeric, cfg.solve)
    table.metadata.update(_metadata(cfg, args))
    out = _out_dir(cfg)
    files = []
    if "csv" in cfg.output.formats:
        path = out / "t1.csv"
        path.write_text(table.to_csv())
        files.append(path)
    if "json" in cfg.output.formats:
        files.append(_write_json(table.to_json_dict(), out / "t1.json"))
    if "svg" in cfg.output.formats:
        series = {"Purcell": table.column("t1_purcell_s"), "charge noise": table.column("t1_charge_s"),
                  "total": table.column("t1_total_s")}
        path = out / "t1.svg"
        path.write_text(line_plot_svg(axis.values, series, f"T1 limits, {cfg.device.name}",
                                      "f01 (GHz)", "T1 (s)", log_y=True))
        files.append(path)
    if args.json:
        print(json.dumps(table.to_json_dict(), sort_keys=True))
    else:
        print("wrote " + ", ".join(str(p) for p in files))
    return EXIT_OK


def cmd_tls(cfg: RunConfig, args: argparse.Namespace) -> int:
    t = cfg.tls
    seed = cfg.seed
    ensemble = sample_ensemble(t.density_per_ghz, (t.freq_min_ghz, t.freq_max_ghz),
                               t.dipole_scale_mhz, t.gamma2_scale_mhz, seed, t.strain_scale_ghz)
    swap = SwapSpectrumConfig(
        Axis("strain", t.strain_min, t.strain_max, t.strain_count),
        Axis("f01_ghz", t.freq_min_ghz, t.freq_max_ghz, t.freq_count),
        t.t_swap_us, t.base_t1_s, t.f_ref_ghz,
    )
    fmap = simulate_strain_spectrum(cfg.device, ensemble, swap)
    detectable = sum(is_detectable(d, swap, t.min_contrast) for d in ensemble)
    fmap.metadata.update(_metadata(cfg, args, seed=seed, n_detectable=detectable))
    out = _out_dir(cfg)
    files = [_write_json(ensemble.to_json_dict(), out / "tls_ensemble.json")]
    files += _write_map(fmap, cfg, "tls_spectrum",
                        lambda: heatmap_svg(fmap, f"swap spectroscopy, seed {seed}", vmin=0.0, vmax=1.0))
    summary = {"n_defects": len(ensemble), "n_detectable": detectable, "files": [str(p) for p in files]}
    print(json.dumps(summary, sort_keys=True) if args.json else
          f"{len(ensemble)} defects ({detectable} detectable); wrote " + ", ".join(summary["files"]))
    return EXIT_OK


# parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (default: $FLUXQ_CONFIG)")
    common.add_argument("--device", help="device preset name; replaces the config's [device]")
    common.add_argument("--out", help="output directory")
    common.add_argument("--json", action="store_true", help="print machine-readable JSON on stdout")
    common.add_argument("--svg", action="store_true", help="also write an SVG plot")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--timestamp", action="store_true", help="record a timestamp in file metadata")
    common.add_argument("-q", "--quiet", action="store_true", help="no progress output")

    p = argparse.ArgumentParser(prog="fluxq", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fluxq {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("freq", parents=[common], help="qubit frequency and levels at one bias")
    s.add_argument("--phi-t", type=float, default=0.0)
    s.add_argument("--phi-b", type=float, default=0.0)
    s.set_defaults(func=cmd_freq)

    s = sub.add_parser("sweep", parents=[common], help="f01 map over (phi_t, phi_b)")
    s.add_argument("--phi-t", default="-0.5:0.5:101", help="start:stop:count")
    s.add_argument("--phi-b", default="0:2:101", help="start:stop:count")
    s.add_argument("--log", action="store_true", help="log colour scale in the SVG")
    s.add_argument("--keep-checkpoints", action="store_true")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("potential", parents=[common], help="potential and wavefunctions at one bias")
    s.add_argument("--phi-t", type=float, default=0.0)
    s.add_argument("--phi-b", type=float, default=1.0)
    s.add_argument("--points", type=int, default=401)
    s.add_argument("--states", type=int, default=2)
    s.set_defaults(func=cmd_potential)

    s = sub.add_parser("probe-map", parents=[common], help="fixed-probe |S21| over bias currents")
    s.add_argument("--i-t", default="-0.75:0.75:45", help="start:stop:count (mA)")
    s.add_argument("--i-b", default="0.2:1.8:45", help="start:stop:count (mA)")
    s.set_defaults(func=cmd_probe_map)

    s = sub.add_parser("calibrate", parents=[common], help="fit the crosstalk matrix to a probe map")
    s.add_argument("map_file", help="probe map (.csv or .json)")
    s.add_argument("--max-objective", type=float, default=0.05)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("t1", parents=[common], help="T1 limits versus qubit frequency")
    s.add_argument("--f01", default="3:7:41", help="start:stop:count (GHz)")
    s.add_argument("--numeric", action="store_true", help="numeric charge matrix element")
    s.set_defaults(func=cmd_t1)

    s = sub.add_parser("tls", parents=[common], help="synthetic strain swap-spectroscopy map")
    s.set_defaults(func=cmd_tls)
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config, args.device)
    out = cfg.output
    formats = list(out.formats)
    if args.svg and "svg" not in formats:
        formats.append("svg")
    out = OutputSettings(
        dir=args.out if args.out is not None else out.dir,
        formats=tuple(formats),
        verbosity=0 if args.quiet else out.verbosity,
    )
    cfg = replace(cfg, output=out)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return args.func(cfg, args)
    except (UsageError, ConfigError) as exc:
        print(f"fluxq {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, SweepError, CalibrationError, NonDispersiveError, ValueError) as exc:
        print(f"fluxq {args.command}: failed: {exc}", file=sys.stderr)
        diag = getattr(exc, "diagnostics", None)
        if diag:
            print(json.dumps(diag, sort_keys=True), file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
