"""Command-line experiment runner.

    pathqunit run --config CFG [--seed N] [--out DIR] [--mode raw|corrected] [--dim N]
    pathqunit analyze COUNTS.csv [--config CFG] [--mode ...] [--seed N] [--out DIR]
    pathqunit reck MATRIX [--out MESH]
    pathqunit epr --dim N [--out DIR]
    pathqunit phaselock --config CFG [--seed N] [--out DIR]

Exit codes: 0 ok, 2 invalid config or input file, 3 numerical failure.
Flags only override the matching config fields.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis.fringe import AnalysisError
from .analysis.report import AnalysisOptions, analyze_records, public_report
from .config import RunConfig, parse_config, resolved_dict
from .counting import CountingError, CsvSchemaError, read_records_csv, write_records_csv
from .experiments import (
    epr_tables,
    simulate_chsh,
    simulate_fringe,
    simulate_phaselock,
    simulate_tomography,
)
from .multiport import MeshError, format_mesh, load_unitary, mesh_to_unitary, reck_decompose
from .phaselock import LockError, unlocked_rms_prediction
from .sourcesim import ConfigError, effective_density, epr_phases, is_perfectly_correlated
from .statecore import StateError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

ASSUMPTIONS = (
    "accidental coincidences are split uniformly over all detector pairs",
    "configured rates are detected rates; arm loss is applied only when rates.apply_losses is true",
    "counts are independent Poisson draws; per-setting seeds derive from (seed, stage, index)",
    "fringe, CHSH and tomography analyzers use the dephased state with relative phase 0",
    "output_dir and figures are excluded from the config hash",
)


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _load_raw(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return data


def _apply_overrides(raw: dict, args) -> dict:
    raw = json.loads(json.dumps(raw))
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        raw["output_dir"] = args.out
    if getattr(args, "mode", None) is not None:
        raw.setdefault("analysis", {})["mode"] = args.mode
    if getattr(args, "dim", None) is not None:
        raw.setdefault("epr", {})["dim"] = args.dim
    if getattr(args, "no_figures", False):
        raw["figures"] = False
    return raw


class _Writer:
    """Collects artifacts in one directory and remembers their hashes."""

    def __init__(self, out: Path, figures: bool):
        self.out = out
        self.figures = figures
        self.files: dict[str, str] = {}
        self.figure_files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def text(self, name: str, content: str) -> None:
        (self.out / name).write_text(content)
        self.files[name] = hashlib.sha256(content.encode()).hexdigest()

    def figure(self, name: str, fn, *args, **kw) -> None:
        if not self.figures:
            return
        from . import plotting

        getattr(plotting, fn)(*args, path=self.out / name, **kw)
        self.figure_files.append(name)


def _analysis_options(cfg: RunConfig) -> AnalysisOptions:
    tomo = cfg.tomography
    return AnalysisOptions(
        mode=cfg.analysis.mode,
        target_theta=tomo.target_theta,
        likelihood=tomo.likelihood,
        mc_samples=tomo.mc_samples,
        seed=cfg.seed,
    )


def _write_analysis(writer: _Writer, records, options: AnalysisOptions) -> dict:
    report = analyze_records(records, options)
    extras = report["_extras"]
    public = _jsonable(public_report(report))
    writer.text("report.json", _dumps(public))
    if "fringe_csv" in extras:
        writer.text("fringe.csv", extras["fringe_csv"])
        writer.figure("fringe.png", "plot_fringe", *extras["fringe_fit"])
    if public.get("S") is not None and public.get("E"):
        from .analysis.chsh import CHSH_PHASES, chsh_setting_pairs

        writer.figure("chsh.png", "plot_chsh", public["E"], chsh_setting_pairs(CHSH_PHASES), public["S"])
    if "tomography" in extras:
        from .plotting import density_tensor

        rho = density_tensor(extras["tomography"].rho.entries)
        writer.figure("density.png", "plot_density", rho,
                      title=f"F = {public['F']:.4f}, T = {public['T']:.4f} ({options.mode})")
    return public


def _epr_outputs(writer: _Writer, n: int) -> dict:
    tables = epr_tables(n)
    lines = ["k,i,j,probability"]
    for k, table in enumerate(tables):
        for (i, j), p in np.ndenumerate(table):
            lines.append(f"{k},{i},{j},{float(p)!r}")
    writer.text("epr.csv", "\n".join(lines) + "\n")
    patterns = [tuple(map(tuple, np.argwhere(t > 0.5 / n))) for t in tables]
    summary = {
        "dim": n,
        "set_phases": [list(epr_phases(n, k)) for k in range(n)],
        "perfect": [bool(is_perfectly_correlated(t, n)) for t in tables],
        "patterns_distinct": len(set(patterns)) == n,
    }
    writer.figure("epr.png", "plot_epr", tables)
    return summary


def _phaselock_outputs(writer: _Writer, cfg: RunConfig) -> dict:
    pl = cfg.phaselock
    run = simulate_phaselock(
        cfg.lock, cfg.drift, cfg.seed, pl.duration_s, pl.setpoint_rad,
        pl.characterization_s, pl.initial_error_rad,
    )
    trace = run.trace
    writer.text("phaselock.csv", trace.to_csv())
    writer.figure("phaselock.png", "plot_lock", trace, range_rad=cfg.lock.actuator_range_rad)
    truth = cfg.lock.calibration_offset_rad % (2 * math.pi)
    off_err = (run.offset_estimate - truth + math.pi) % (2 * math.pi) - math.pi
    return {
        "offset_estimate_rad": run.offset_estimate,
        "offset_error_rad": off_err,
        "rms_error_rad": trace.rms(),
        "final_error_rad": float(trace.true_error[-1]),
        "unlocked_rms_prediction_rad": unlocked_rms_prediction(cfg.drift, pl.duration_s),
        "wraps": int(trace.wrapped.sum()),
    }


def _manifest(cfg: RunConfig, writer: _Writer, command: str) -> None:
    manifest = {
        "tool": "pathqunit",
        "version": __version__,
        "command": command,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "config": resolved_dict(cfg),
        "assumptions": list(ASSUMPTIONS),
        "files": dict(sorted(writer.files.items())),
        "figures": sorted(writer.figure_files),
    }
    manifest["config"].pop("output_dir")
    manifest["config"].pop("figures")
    writer.text("manifest.json", _dumps(_jsonable(manifest)))


def run_experiment(cfg: RunConfig, command: str = "run") -> dict:
    """Execute ``cfg`` end to end and write every artifact; returns the report."""
    writer = _Writer(Path(cfg.output_dir), cfg.figures)
    exp = cfg.experiment
    rates = cfg.effective_rates()
    records = []
    if exp in ("fringe", "full"):
        records += simulate_fringe(cfg.source, rates, cfg.fringe.points,
                                   cfg.fringe.integration_time_s, cfg.seed)
    if exp in ("chsh", "full"):
        records += simulate_chsh(cfg.source, rates, cfg.chsh.integration_time_s, cfg.seed, cfg.chsh.mode)
    if exp in ("tomography", "full"):
        effective_density(cfg.source)  # fail early on an invalid source
        records += simulate_tomography(cfg.source, rates, cfg.tomography.integration_time_s, cfg.seed)

    if records:
        writer.text("counts.csv", write_records_csv(records))
        report = _write_analysis(writer, records, _analysis_options(cfg))
    elif exp == "epr":
        report = _jsonable({"epr": _epr_outputs(writer, cfg.epr_dim)})
        writer.text("report.json", _dumps(report))
    else:
        report = _jsonable({"phaselock": _phaselock_outputs(writer, cfg)})
        writer.text("report.json", _dumps(report))
    _manifest(cfg, writer, command)
    return report


def _cmd_run(args) -> dict:
    cfg = parse_config(_apply_overrides(_load_raw(args.config), args))
    return run_experiment(cfg)


def _cmd_phaselock(args) -> dict:
    raw = _apply_overrides(_load_raw(args.config), args)
    raw["experiment"] = "phaselock"
    raw.setdefault("seed", 0)
    return run_experiment(parse_config(raw), command="phaselock")


def _cmd_epr(args) -> dict:
    raw = _apply_overrides(_load_raw(args.config), args)
    raw["experiment"] = "epr"
    raw.setdefault("seed", 0)
    report = run_experiment(parse_config(raw), command="epr")
    if not (all(report["epr"]["perfect"]) and report["epr"]["patterns_distinct"]):
        raise _Failure(EXIT_NUMERIC, "EPR tables are not perfectly correlated")
    return report


def _cmd_analyze(args) -> dict:
    raw = _load_raw(args.config)
    raw.setdefault("experiment", "full")
    raw.setdefault("seed", 0)
    cfg = parse_config(_apply_overrides(raw, args))
    try:
        records = read_records_csv(args.counts)
    except OSError as exc:
        raise _Failure(EXIT_CONFIG, f"cannot read {args.counts}: {exc.strerror}") from exc
    if not args.out:
        report = _jsonable(public_report(analyze_records(records, _analysis_options(cfg))))
        sys.stdout.write(_dumps(report))
        return report
    writer = _Writer(Path(args.out), cfg.figures)
    report = _write_analysis(writer, records, _analysis_options(cfg))
    _manifest(cfg, writer, "analyze")
    return report


def _cmd_reck(args) -> dict:
    try:
        u = load_unitary(args.matrix)
    except OSError as exc:
        raise _Failure(EXIT_CONFIG, f"cannot read {args.matrix}: {exc.strerror}") from exc
    except (StateError, ValueError) as exc:
        raise _Failure(EXIT_CONFIG, f"{args.matrix}: {exc}") from exc
    mesh = reck_decompose(u)
    err = float(np.abs(mesh_to_unitary(mesh) - u).max())
    text = format_mesh(mesh)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    summary = {"dim": mesh.dim, "cells": len(mesh.cells), "max_error": err}
    sys.stderr.write(f"{mesh.dim}x{mesh.dim} mesh, {len(mesh.cells)} cells, max error {err:.3g}\n")
    return summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pathqunit", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("--config", required=config_required, help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--no-figures", action="store_true", help="skip the PNG figures")

    sp = sub.add_parser("run", help="simulate and analyze the configured experiment")
    common(sp, config_required=True)
    sp.add_argument("--mode", choices=("raw", "corrected"), help="analysis mode")
    sp.add_argument("--dim", type=int, help="EPR dimension")
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("analyze", help="analyze a count CSV without simulating")
    sp.add_argument("counts", help="count-record CSV")
    common(sp)
    sp.add_argument("--mode", choices=("raw", "corrected"), help="analysis mode")
    sp.set_defaults(func=_cmd_analyze)

    sp = sub.add_parser("reck", help="decompose a unitary matrix file into a mesh file")
    sp.add_argument("matrix", help="matrix file (dim=<d> header, one row per line)")
    sp.add_argument("--out", help="mesh file to write (default: stdout)")
    sp.set_defaults(func=_cmd_reck)

    sp = sub.add_parser("epr", help="EPR correlation tables of the N-path source")
    common(sp)
    sp.add_argument("--dim", type=int, default=4, help="number of paths N (default 4)")
    sp.set_defaults(func=_cmd_epr)

    sp = sub.add_parser("phaselock", help="characterize and run the phase lock")
    common(sp)
    sp.set_defaults(func=_cmd_phaselock)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CsvSchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (AnalysisError, CountingError, LockError, MeshError, StateError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
