"""Coincidence counting: expected rates, Poisson sampling, accidentals and CAR.

Random numbers come from numpy's PCG64 bit generator seeded through
``SeedSequence``; for a fixed numpy version a given ``(rates, T, seed)`` always
produces the same record.  Accidental coincidences are spread uniformly over
the N*N detector pairs (:func:`accidental_split` is the single place that
encodes this).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

CSV_COLUMNS = ("setting", "i", "j", "counts", "acc_estimate", "T")


class CountingError(ValueError):
    pass


@dataclass(frozen=True)
class RatesConfig:
    true_cc_rate_hz: float = 150.0
    accidental_rate_hz: float = 1.47
    coincidence_window_ns: float = 2.5
    singles_rate_hz: Optional[tuple[float, float]] = None
    detector_efficiency: float = 1.0
    arm_transmission: float = 1.0

    def __post_init__(self):
        for name in ("true_cc_rate_hz", "accidental_rate_hz", "detector_efficiency", "arm_transmission"):
            if getattr(self, name) < 0:
                raise CountingError(f"{name} must be >= 0")
        if not self.coincidence_window_ns > 0:
            raise CountingError("coincidence_window_ns must be > 0")
        if self.singles_rate_hz is not None:
            singles = tuple(float(x) for x in self.singles_rate_hz)
            if len(singles) != 2 or min(singles) < 0:
                raise CountingError("singles_rate_hz needs two non-negative rates")
            object.__setattr__(self, "singles_rate_hz", singles)

    @property
    def detected_cc_rate_hz(self) -> float:
        """True coincidence rate after both arms' transmission and detector efficiency."""
        scale = (self.detector_efficiency * self.arm_transmission) ** 2
        return self.true_cc_rate_hz * scale

    @property
    def total_accidental_rate_hz(self) -> float:
        if self.singles_rate_hz is not None:
            s_a, s_b = self.singles_rate_hz
            return s_a * s_b * self.coincidence_window_ns * 1e-9
        return self.accidental_rate_hz


@dataclass(frozen=True, eq=False)
class CountRecord:
    setting_label: str
    outcome_counts: np.ndarray
    integration_time_s: float
    accidental_estimate: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.outcome_counts)
        if counts.dtype.kind not in "iu":
            if not np.all(counts == np.round(counts)):
                raise CountingError(f"{self.setting_label}: counts must be integers")
            counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise CountingError(f"{self.setting_label}: counts must be >= 0")
        acc = np.asarray(self.accidental_estimate, dtype=float)
        if acc.shape != counts.shape:
            raise CountingError(f"{self.setting_label}: accidental estimate shape mismatch")
        if not self.integration_time_s > 0:
            raise CountingError(f"{self.setting_label}: integration time must be > 0")
        object.__setattr__(self, "outcome_counts", counts.astype(np.int64))
        object.__setattr__(self, "accidental_estimate", acc)

    def __eq__(self, other):
        if not isinstance(other, CountRecord):
            return NotImplemented
        return (
            self.setting_label == other.setting_label
            and self.integration_time_s == other.integration_time_s
            and np.array_equal(self.outcome_counts, other.outcome_counts)
            and np.array_equal(self.accidental_estimate, other.accidental_estimate)
        )


def accidental_split(total_rate_hz: float, n: int) -> np.ndarray:
    """Per-detector-pair accidental rate (uniform split)."""
    return np.full((n, n), total_rate_hz / (n * n))


def expected_rates(probs: np.ndarray, rates: RatesConfig) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0):
        raise CountingError("probabilities must be >= 0")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise CountingError(f"probabilities sum to {probs.sum():.12g}, expected 1")
    n = probs.shape[0]
    return rates.detected_cc_rate_hz * probs + accidental_split(rates.total_accidental_rate_hz, n)


def derive_seed(seed: int, *path: int) -> np.random.SeedSequence:
    """Child seed for a stage/index path below the root seed."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(p) for p in path]])


def sample_counts(
    rates: np.ndarray,
    integration_time_s: float,
    seed: int | np.random.SeedSequence,
    accidental_rate_hz: float | np.ndarray = 0.0,
    label: str = "",
) -> CountRecord:
    """Draw Poisson(rate * T) counts for every outcome cell.

    ``accidental_rate_hz`` is the per-cell accidental rate (scalar or N x N)
    recorded as the accidental estimate ``rate * T``.
    """
    if not integration_time_s > 0:
        raise CountingError("integration time must be > 0")
    rates = np.asarray(rates, dtype=float)
    rng = np.random.Generator(np.random.PCG64(seed))
    counts = rng.poisson(rates * integration_time_s)
    acc = np.broadcast_to(np.asarray(accidental_rate_hz, dtype=float), rates.shape)
    return CountRecord(label, counts, float(integration_time_s), acc * integration_time_s)


def expected_record(
    rates: np.ndarray,
    integration_time_s: float,
    accidental_rate_hz: float | np.ndarray = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free mean counts and accidental estimate (real-valued, not a CountRecord)."""
    rates = np.asarray(rates, dtype=float)
    acc = np.broadcast_to(np.asarray(accidental_rate_hz, dtype=float), rates.shape)
    return rates * integration_time_s, acc * integration_time_s


def subtract_accidentals(record: CountRecord) -> np.ndarray:
    """Counts minus accidental estimate; negative cells are kept."""
    return record.outcome_counts - record.accidental_estimate


def car(record: CountRecord | Sequence[CountRecord]) -> float:
    """Coincidence-to-accidental ratio (total - accidental) / accidental."""
    records = [record] if isinstance(record, CountRecord) else list(record)
    total = sum(float(r.outcome_counts.sum()) for r in records)
    acc = sum(float(r.accidental_estimate.sum()) for r in records)
    if acc <= 0:
        raise CountingError("CAR undefined (zero accidental estimate)")
    return (total - acc) / acc


def write_records_csv(records: Iterable[CountRecord], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        n_i, n_j = rec.outcome_counts.shape
        for i in range(n_i):
            for j in range(n_j):
                writer.writerow(
                    [
                        rec.setting_label,
                        i,
                        j,
                        int(rec.outcome_counts[i, j]),
                        repr(float(rec.accidental_estimate[i, j])),
                        repr(float(rec.integration_time_s)),
                    ]
                )
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


class CsvSchemaError(CountingError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def read_records_csv(path: str | Path) -> list[CountRecord]:
    return parse_records_csv(Path(path).read_text())


def parse_records_csv(text: str) -> list[CountRecord]:
    """Parse count-CSV text; settings keep their first-appearance order."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise CsvSchemaError(1, f"header must be {','.join(CSV_COLUMNS)}")
    cells: dict[str, dict] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise CsvSchemaError(lineno, f"expected {len(CSV_COLUMNS)} columns, got {len(row)}")
        label = row[0]
        try:
            i, j, counts = int(row[1]), int(row[2]), int(row[3])
            acc, t = float(row[4]), float(row[5])
        except ValueError as exc:
            raise CsvSchemaError(lineno, str(exc)) from None
        if i < 0 or j < 0:
            raise CsvSchemaError(lineno, "negative outcome index")
        if counts < 0:
            raise CsvSchemaError(lineno, "negative count")
        if not (np.isfinite(acc) and np.isfinite(t)) or t <= 0:
            raise CsvSchemaError(lineno, "acc_estimate must be finite and T positive")
        entry = cells.setdefault(label, {"T": t, "cells": {}, "line": lineno})
        if entry["T"] != t:
            raise CsvSchemaError(lineno, f"inconsistent T for setting {label!r}")
        if (i, j) in entry["cells"]:
            raise CsvSchemaError(lineno, f"duplicate cell ({i}, {j}) for setting {label!r}")
        entry["cells"][(i, j)] = (counts, acc)
    records = []
    for label, entry in cells.items():
        n_i = 1 + max(i for i, _ in entry["cells"])
        n_j = 1 + max(j for _, j in entry["cells"])
        if len(entry["cells"]) != n_i * n_j:
            raise CsvSchemaError(entry["line"], f"setting {label!r} has missing outcome cells")
        counts = np.zeros((n_i, n_j), dtype=np.int64)
        acc = np.zeros((n_i, n_j))
        for (i, j), (c, a) in entry["cells"].items():
            counts[i, j] = c
            acc[i, j] = a
        records.append(CountRecord(label, counts, entry["T"], acc))
    return records
