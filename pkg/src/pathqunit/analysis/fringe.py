"""Two-photon interference fringes and their visibility."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
import numpy as np


class AnalysisError(ValueError):
    pass


class FlooredMinimumWarning(UserWarning):
    """A negative (accidental-corrected) minimum was floored at zero."""


@dataclass(frozen=True, eq=False)
class FringeScan:
    phases: np.ndarray
    cc_counts: np.ndarray
    integration_time_s: float
    variances: np.ndarray | None = None

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float)
        counts = np.asarray(self.cc_counts, dtype=float)
        if phases.shape != counts.shape or phases.ndim != 1:
            raise AnalysisError("phases and counts must be 1-D and of equal length")
        if phases.size < 2:
            raise AnalysisError("a fringe scan needs at least two points")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "cc_counts", counts)
        if self.variances is not None:
            object.__setattr__(self, "variances", np.asarray(self.variances, dtype=float))


@dataclass(frozen=True)
class FringeFit:
    """Least-squares fit ``offset + amplitude * cos(phase + phase0)``."""

    cc_max: float
    cc_min: float
    phi_max: float
    phi_min: float
    offset: float
    amplitude: float
    phase0: float
    visibility: float
    sigma_visibility: float
    degenerate: bool
    floored: bool

    def curve(self, phases) -> np.ndarray:
        return self.offset + self.amplitude * np.cos(np.asarray(phases) + self.phase0)


def visibility(cc_max: float, cc_min: float) -> float:
    """(max - min) / (max + min), with a negative minimum floored at zero."""
    if cc_min < 0:
        warnings.warn(f"minimum {cc_min:.4g} floored at 0", FlooredMinimumWarning, stacklevel=2)
        cc_min = 0.0
    if cc_max < cc_min:
        raise AnalysisError(f"cc_max ({cc_max}) below cc_min ({cc_min})")
    if cc_max + cc_min == 0:
        raise AnalysisError("visibility undefined for zero counts")
    return (cc_max - cc_min) / (cc_max + cc_min)


def fringe_extrema(scan: FringeScan) -> FringeFit:
    """Fit a sinusoid to the scan and return its extremes A +/- |B|.

    The fit is linear in (A, c, s) for ``A + c cos(phi) + s sin(phi)``.  With
    ``scan.variances`` (raw counts of Poisson data) it is reweighted once by
    the fitted curve; otherwise it is unweighted and the parameter errors come
    from the residual scatter.
    """
    x = np.column_stack([np.ones_like(scan.phases), np.cos(scan.phases), np.sin(scan.phases)])
    y = scan.cc_counts
    if scan.variances is not None:
        # Poisson weights from the smoothed model: the first fit's curve plus
        # whatever the variances carry beyond the fitted counts (subtracted
        # background for corrected scans).
        coef, _ = _wls(x, y, np.ones_like(y))
        background = scan.variances - y
        var = np.maximum(x @ coef + background, 1.0)
        coef, cov = _wls(x, y, 1.0 / var)
    elif y.size > 3:
        coef, cov = _wls(x, y, np.ones_like(y))
        resid = y - x @ coef
        cov = cov * float(resid @ resid) / (y.size - 3)
    else:
        coef, cov = _wls(x, y, 1.0 / np.maximum(np.abs(y), 1.0))

    a, c, s = coef
    b = math.hypot(c, s)
    phase0 = math.atan2(-s, c)
    phi_max = (-phase0) % (2 * math.pi)
    phi_min = (phi_max + math.pi) % (2 * math.pi)
    cc_max, cc_min = a + b, a - b

    if b > 0:
        grad_b = np.array([0.0, c / b, s / b])
        sigma_b = math.sqrt(max(float(grad_b @ cov @ grad_b), 0.0))
    else:
        sigma_b = math.inf
    # The relative floor catches exactly flat scans, whose residual scatter is zero too.
    degenerate = not b > max(2 * sigma_b, 1e-9 * abs(a))

    floored = cc_min < 0
    if degenerate or cc_max <= 0:
        vis = 0.0
        sigma_v = sigma_b / abs(a) if a else math.inf
        degenerate = True
    elif floored:
        vis, sigma_v = 1.0, 0.0
    else:
        vis = b / a
        grad_v = np.array([-b / a**2, c / (b * a), s / (b * a)])
        sigma_v = math.sqrt(max(float(grad_v @ cov @ grad_v), 0.0))
    return FringeFit(
        cc_max=cc_max,
        cc_min=cc_min,
        phi_max=phi_max,
        phi_min=phi_min,
        offset=a,
        amplitude=b,
        phase0=phase0,
        visibility=vis,
        sigma_visibility=sigma_v,
        degenerate=degenerate,
        floored=floored,
    )


def _wls(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    normal = x.T @ (x * w[:, None])
    coef = np.linalg.lstsq(normal, x.T @ (w * y), rcond=None)[0]
    try:
        cov = np.linalg.inv(normal)
    except np.linalg.LinAlgError:
        cov = np.full((3, 3), np.inf)
    return coef, cov


def two_point_visibility(cc_at_0: float, cc_at_pi: float) -> tuple[float, float]:
    """Visibility from the two settings 0 and pi, with Poisson error."""
    hi, lo = max(cc_at_0, cc_at_pi), min(cc_at_0, cc_at_pi)
    v = visibility(hi, max(lo, 0.0))
    total = hi + max(lo, 0.0)
    sigma = 2 * math.sqrt(hi * max(lo, 0.0) ** 2 + max(lo, 0.0) * hi**2) / total**2 if total else math.inf
    return v, sigma

