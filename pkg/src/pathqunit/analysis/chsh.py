"""CHSH correlation sums from analyzer coincidence tables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..counting import CountRecord, subtract_accidentals
from .fringe import AnalysisError

# Analyzer phases (a, a', b, b'); with E = p cos(phi_A + phi_B) the sum below
# gives S = 2 sqrt(2) p for the dephased correlated state.
CHSH_PHASES = (0.0, math.pi / 2, math.pi / 4, -math.pi / 4)
CHSH_SIGNS = (1, 1, -1, 1)


def chsh_setting_pairs(phases: Sequence[float] = CHSH_PHASES) -> list[tuple[float, float]]:
    """Setting pairs in summation order: (a,b), (a,b'), (a',b), (a',b')."""
    a, a2, b, b2 = phases
    return [(a, b), (a, b2), (a2, b), (a2, b2)]


def chsh_label(phi_a: float, phi_b: float) -> str:
    return f"chsh@{phi_a!r},{phi_b!r}"


@dataclass(frozen=True)
class ChshRecord:
    """Four setting pairs, each with a 2x2 outcome table, in summation order."""

    settings: tuple[tuple[float, float], ...]
    records: tuple[CountRecord, ...]

    def __post_init__(self):
        if len(self.settings) != 4 or len(self.records) != 4:
            raise AnalysisError("a CHSH record needs exactly four setting pairs")
        for rec in self.records:
            if rec.outcome_counts.shape != (2, 2):
                raise AnalysisError(f"{rec.setting_label}: CHSH tables are 2x2")


def correlation_E(counts, variances=None) -> tuple[float, float]:
    """E = (N00 - N01 - N10 + N11) / N and its Poisson standard error.

    ``variances`` defaults to the counts themselves; pass the raw counts when
    ``counts`` are accidental-corrected.
    """
    n = np.asarray(counts, dtype=float).reshape(2, 2)
    total = n.sum()
    if total <= 0:
        raise AnalysisError("correlation undefined for zero total counts")
    signs = np.array([[1.0, -1.0], [-1.0, 1.0]])
    e = float((signs * n).sum() / total)
    var = np.maximum(np.asarray(n if variances is None else variances, dtype=float).reshape(2, 2), 0.0)
    dedn = (signs - e) / total
    return e, math.sqrt(float((dedn**2 * var).sum()))


def chsh_S(record: ChshRecord, corrected: bool = False) -> tuple[float, float]:
    """S = E(a,b) + E(a,b') - E(a',b) + E(a',b') with errors added in quadrature."""
    s, var = 0.0, 0.0
    for sign, rec in zip(CHSH_SIGNS, record.records):
        counts = subtract_accidentals(rec) if corrected else rec.outcome_counts
        e, sig = correlation_E(counts, rec.outcome_counts)
        s += sign * e
        var += sig**2
    return s, math.sqrt(var)


def chsh_from_probabilities(tables: Sequence[np.ndarray]) -> float:
    """Infinite-statistics S from four 2x2 probability tables in summation order."""
    return float(sum(sign * correlation_E(t)[0] for sign, t in zip(CHSH_SIGNS, tables)))


def cycled_label(phi_a: float, phi_b: float) -> str:
    return f"chsh16@{phi_a!r},{phi_b!r}"


def chsh_from_cycled(records: Sequence[CountRecord], phases: Sequence[float] = CHSH_PHASES) -> ChshRecord:
    """Assemble a :class:`ChshRecord` from sixteen single-detector-pair runs.

    In this mode only detector pair (0, 0) is read out; outcome (m, n) of the
    setting (x, y) is the (0, 0) count at phases (x + m pi, y + n pi).
    Records must come in order setting-major, then (m, n) row-major.
    """
    if len(records) != 16:
        raise AnalysisError(f"cycled CHSH needs 16 records, got {len(records)}")
    settings = chsh_setting_pairs(phases)
    tables = []
    for k, setting in enumerate(settings):
        block = records[4 * k : 4 * k + 4]
        counts = np.array([r.outcome_counts[0, 0] for r in block]).reshape(2, 2)
        acc = np.array([r.accidental_estimate[0, 0] for r in block]).reshape(2, 2)
        t = block[0].integration_time_s
        tables.append(CountRecord(chsh_label(*setting), counts, t, acc))
    return ChshRecord(tuple(settings), tuple(tables))


def cycled_phase_pairs(phases: Sequence[float] = CHSH_PHASES) -> list[tuple[float, float]]:
    """The sixteen phase pairs of the cycled mode, in :func:`chsh_from_cycled` order."""
    out = []
    for x, y in chsh_setting_pairs(phases):
        for m in (0, 1):
            for n in (0, 1):
                out.append((x + m * math.pi, y + n * math.pi))
    return out
