"""Visibility, CHSH and tomography analysis of coincidence-count records."""

from .chsh import ChshRecord, chsh_S, correlation_E
from .fringe import AnalysisError, FringeFit, FringeScan, fringe_extrema, visibility
from .report import AnalysisOptions, analyze_records, public_report
from .tomography import (
    TomographyRecord,
    TomographyResult,
    mle_tomography,
    monte_carlo_uncertainty,
)

__all__ = [
    "AnalysisError",
    "AnalysisOptions",
    "ChshRecord",
    "FringeFit",
    "FringeScan",
    "TomographyRecord",
    "TomographyResult",
    "analyze_records",
    "chsh_S",
    "correlation_E",
    "fringe_extrema",
    "mle_tomography",
    "monte_carlo_uncertainty",
    "public_report",
    "visibility",
]
