"""Turn a list of count records into the JSON analysis report.

The experiment family of each record is read from its setting label:

    fringe@<phase>      2x2 table at analyzer phase sum <phase>
    chsh@<a>,<b>        2x2 table at analyzer phases (a, b)
    chsh16@<a>,<b>      cycled CHSH run; only cell (0, 0) is used
    tomo@<AB>           basis pair AB with A, B in {Z, X, Y}
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..counting import CountRecord, car, subtract_accidentals
from ..statecore import format_matrix, target_state
from .chsh import (
    CHSH_PHASES,
    ChshRecord,
    chsh_from_cycled,
    chsh_S,
    chsh_setting_pairs,
    correlation_E,
)
from .fringe import AnalysisError, FringeFit, FringeScan, fringe_extrema
from .tomography import (
    TomographyRecord,
    mle_tomography,
    monte_carlo_uncertainty,
    with_uncertainty,
)

MC_STAGE = 4


@dataclass(frozen=True)
class AnalysisOptions:
    mode: str = "raw"
    target_theta: float = 0.0
    likelihood: str = "gaussian"
    mc_samples: int = 50
    seed: int = 0


def _family(label: str) -> str:
    return label.split("@", 1)[0] if "@" in label else ""


def _phases(label: str) -> list[float]:
    try:
        return [float(x) for x in label.split("@", 1)[1].split(",")]
    except (IndexError, ValueError):
        raise AnalysisError(f"cannot read phases from setting label {label!r}") from None


def fringe_scans(records: Sequence[CountRecord]) -> tuple[FringeScan, FringeScan]:
    """Raw and accidental-corrected scans of the correlated-outcome sum."""
    phases, raw, corr = [], [], []
    t = records[0].integration_time_s
    for rec in records:
        phases.append(_phases(rec.setting_label)[0])
        raw.append(float(np.trace(rec.outcome_counts)))
        corr.append(float(np.trace(subtract_accidentals(rec))))
    phases, raw = np.array(phases), np.array(raw)
    return FringeScan(phases, raw, t, variances=raw), FringeScan(phases, np.array(corr), t, variances=raw)


def fringe_table(raw: FringeScan, corr: FringeScan, fit_raw: FringeFit, fit_corr: FringeFit) -> str:
    """Plot-ready CSV: phase, counts, fit, corrected counts, corrected fit."""
    lines = ["phase,counts,fit,counts_corrected,fit_corrected"]
    fr, fc = fit_raw.curve(raw.phases), fit_corr.curve(corr.phases)
    for row in zip(raw.phases, raw.cc_counts, fr, corr.cc_counts, fc):
        lines.append(",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def _chsh_record(records: Sequence[CountRecord]) -> ChshRecord:
    if len(records) != 4:
        raise AnalysisError(f"CHSH analysis needs 4 settings, found {len(records)}")
    by_phase = {tuple(_phases(r.setting_label)): r for r in records}
    ordered = []
    for pair in chsh_setting_pairs(CHSH_PHASES):
        match = [r for ph, r in by_phase.items() if np.allclose(ph, pair, atol=1e-9)]
        ordered.append(match[0] if match else None)
    if any(r is None for r in ordered):
        # Non-default phase sets are taken in file order.
        ordered = list(records)
    settings = tuple(tuple(_phases(r.setting_label)) for r in ordered)
    return ChshRecord(settings, tuple(ordered))


def _clean(x: float | None):
    if x is None or not math.isfinite(x):
        return None
    return float(x)


def analyze_records(records: Sequence[CountRecord], options: AnalysisOptions = AnalysisOptions()) -> dict:
    """Run every analysis the records support and collect the report."""
    if options.mode not in ("raw", "corrected"):
        raise AnalysisError(f"unknown mode {options.mode!r}")
    corrected = options.mode == "corrected"
    groups: dict[str, list[CountRecord]] = {}
    for rec in records:
        groups.setdefault(_family(rec.setting_label), []).append(rec)
    unknown = set(groups) - {"fringe", "chsh", "chsh16", "tomo"}
    if unknown:
        raise AnalysisError(f"unrecognized setting labels: {sorted(unknown)}")

    report: dict = {
        "mode": options.mode,
        "V": None,
        "sigma_V": None,
        "V_c": None,
        "sigma_V_c": None,
        "S": None,
        "sigma_S": None,
        "E": None,
        "rho": None,
        "F": None,
        "T": None,
        "F_err": None,
        "T_err": None,
        "loglikelihood": None,
        "CAR": None,
        "flags": [],
    }
    flags = report["flags"]
    extras: dict = {}

    if "fringe" in groups:
        raw, corr = fringe_scans(groups["fringe"])
        fit_raw, fit_corr = fringe_extrema(raw), fringe_extrema(corr)
        report.update(
            V=fit_raw.visibility,
            sigma_V=_clean(fit_raw.sigma_visibility),
            V_c=fit_corr.visibility,
            sigma_V_c=_clean(fit_corr.sigma_visibility),
        )
        if fit_raw.floored or fit_corr.floored:
            flags.append("visibility_floored")
        if fit_raw.degenerate or fit_corr.degenerate:
            flags.append("fringe_degenerate")
        extras["fringe_csv"] = fringe_table(raw, corr, fit_raw, fit_corr)
        extras["fringe_fit"] = (raw, corr, fit_raw, fit_corr)

    chsh_records = None
    if "chsh" in groups:
        chsh_records = _chsh_record(groups["chsh"])
    elif "chsh16" in groups:
        chsh_records = chsh_from_cycled(groups["chsh16"])
    if chsh_records is not None:
        s, sigma = chsh_S(chsh_records, corrected=corrected)
        report["S"], report["sigma_S"] = s, sigma
        es = []
        for rec in chsh_records.records:
            counts = subtract_accidentals(rec) if corrected else rec.outcome_counts
            es.append(correlation_E(counts, rec.outcome_counts)[0])
        report["E"] = es

    if "tomo" in groups:
        tomo = TomographyRecord.from_records(groups["tomo"])
        target = target_state(options.target_theta)
        result = mle_tomography(tomo, subtract=corrected, target=target, likelihood=options.likelihood)
        if options.mc_samples >= 2:
            f_err, t_err = monte_carlo_uncertainty(
                tomo, options.mc_samples, seed=_mc_seed(options.seed), subtract=corrected, target=target
            )
            result = with_uncertainty(result, f_err, t_err)
        report.update(
            rho=format_matrix(result.rho.entries),
            F=result.fidelity,
            T=result.tangle,
            F_err=_clean(result.fidelity_err),
            T_err=_clean(result.tangle_err),
            loglikelihood=result.loglikelihood,
        )
        if result.negative_counts:
            flags.append("negative_corrected_counts")
        extras["tomography"] = result

    if sum(float(r.accidental_estimate.sum()) for r in records) > 0:
        report["CAR"] = car(list(records))
    report["_extras"] = extras
    return report


def _mc_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFF, MC_STAGE]).generate_state(1)[0])


def public_report(report: dict) -> dict:
    """Report without in-memory helper objects (what goes into report.json)."""
    return {k: v for k, v in report.items() if not k.startswith("_")}
