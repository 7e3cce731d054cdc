"""Simulated measurement runs: source -> analyzers -> Poisson counts.

Seeds: every stage draws from ``derive_seed(root, stage, index)`` with the
stage numbers below, so each setting's counts depend only on the root seed
and the setting's position, never on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis.chsh import (
    CHSH_PHASES,
    chsh_label,
    chsh_setting_pairs,
    cycled_label,
    cycled_phase_pairs,
)
from .analysis.tomography import BASIS_PAIRS, basis_unitary, tomo_label
from .counting import CountRecord, RatesConfig, accidental_split, derive_seed, expected_rates, sample_counts
from .multiport import AnalyzerSetting, analyzer_unitary
from .phaselock import DriftModel, LockConfig, LockTrace, characterize, run_lock
from .sourcesim import SourceConfig, coincidence_probs, effective_density, epr_correlation_table
from .statecore import DensityMatrix

STAGE_FRINGE = 1
STAGE_CHSH = 2
STAGE_TOMOGRAPHY = 3
STAGE_MONTE_CARLO = 4
STAGE_PHASELOCK = 5


def balanced_analyzer(phase: float) -> np.ndarray:
    return analyzer_unitary(AnalyzerSetting(0.5, phase))


def _record(
    rho: DensityMatrix,
    u_a: np.ndarray,
    u_b: np.ndarray,
    rates: RatesConfig,
    t: float,
    seed: np.random.SeedSequence,
    label: str,
) -> CountRecord:
    probs = coincidence_probs(rho, u_a, u_b)
    r = expected_rates(probs, rates)
    acc = accidental_split(rates.total_accidental_rate_hz, probs.shape[0])
    return sample_counts(r, t, seed, acc, label)


def fringe_phases(points: int) -> np.ndarray:
    return 2 * math.pi * np.arange(points) / points


def simulate_fringe(
    source: SourceConfig, rates: RatesConfig, points: int, t: float, seed: int
) -> list[CountRecord]:
    """Scan analyzer A's phase over [0, 2 pi) with analyzer B at phase 0."""
    rho = effective_density(source)
    u_b = balanced_analyzer(0.0)
    out = []
    for idx, phase in enumerate(fringe_phases(points)):
        out.append(
            _record(rho, balanced_analyzer(float(phase)), u_b, rates, t,
                    derive_seed(seed, STAGE_FRINGE, idx), f"fringe@{float(phase)!r}")
        )
    return out


def simulate_chsh(
    source: SourceConfig, rates: RatesConfig, t: float, seed: int, mode: str = "outputs"
) -> list[CountRecord]:
    """Four phase pairs read out on all outputs, or sixteen single-pair runs (``cycled``)."""
    rho = effective_density(source)
    if mode == "outputs":
        pairs, label = chsh_setting_pairs(CHSH_PHASES), chsh_label
    elif mode == "cycled":
        pairs, label = cycled_phase_pairs(CHSH_PHASES), cycled_label
    else:
        raise ValueError(f"unknown CHSH mode {mode!r}")
    return [
        _record(rho, balanced_analyzer(a), balanced_analyzer(b), rates, t,
                derive_seed(seed, STAGE_CHSH, idx), label(a, b))
        for idx, (a, b) in enumerate(pairs)
    ]


def simulate_tomography(source: SourceConfig, rates: RatesConfig, t: float, seed: int) -> list[CountRecord]:
    rho = effective_density(source)
    return [
        _record(rho, basis_unitary(pair[0]), basis_unitary(pair[1]), rates, t,
                derive_seed(seed, STAGE_TOMOGRAPHY, idx), tomo_label(pair))
        for idx, pair in enumerate(BASIS_PAIRS)
    ]


def chsh_probability_tables(source: SourceConfig) -> list[np.ndarray]:
    """Infinite-statistics outcome tables for the four CHSH settings."""
    rho = effective_density(source)
    return [
        coincidence_probs(rho, balanced_analyzer(a), balanced_analyzer(b))
        for a, b in chsh_setting_pairs(CHSH_PHASES)
    ]


def epr_tables(n: int) -> list[np.ndarray]:
    return [epr_correlation_table(n, k) for k in range(n)]


@dataclass(frozen=True, eq=False)
class PhaselockRun:
    offset_estimate: float
    trace: LockTrace


def stage_seed(seed: int, *path: int) -> int:
    """32-bit integer seed derived from the root seed and a stage path."""
    return int(derive_seed(seed, *path).generate_state(1)[0])


def simulate_phaselock(
    lock: LockConfig,
    drift: DriftModel,
    seed: int,
    duration_s: float,
    setpoint_rad: float,
    characterization_s: float = 60.0,
    initial_error_rad: float = 0.0,
) -> PhaselockRun:
    offset = characterize(lock, characterization_s, stage_seed(seed, STAGE_PHASELOCK, 0))
    drift = DriftModel(
        drift.random_walk_sigma_rad_per_sqrt_s,
        drift.linear_drift_rad_per_s,
        stage_seed(seed, STAGE_PHASELOCK, 1, drift.seed),
    )
    trace = run_lock(
        lock, drift, duration_s, setpoint_rad, offset, initial_error_rad,
        seed=stage_seed(seed, STAGE_PHASELOCK, 2),
    )
    return PhaselockRun(offset, trace)
