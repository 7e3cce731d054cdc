"""Active phase stabilization of the two-photon interferometer.

The photons see the phase ``drift(t) + actuator(t)``.  The controller cannot
observe it directly; it reads the pump light transmitted through the same
fibres, whose intensity is

    I = (1 + cos(k * phase + offset)) / 2,     k ~ 2,

with an offset that drifts slowly between runs and is measured by a sweep
(:func:`characterize`) before each lock.  During the lock the intensity is
inverted on the half-fringe that contains the setpoint, which gives a phase
estimate with the correct error sign over +/- pi/k around the setpoint.

Phase drift is a Wiener process plus a linear ramp.  The PID is positional
with conditional integration at the actuator limits; when the command leaves
the actuator range, the integrator is shifted by 2 pi and a wrap event is
logged.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .counting import derive_seed

TWO_PI = 2 * math.pi
DIVERGENCE_RAD = 10.0
EXTREMUM_MARGIN_RAD = 0.1  # minimum pump-phase distance of the setpoint from a fringe extremum


class LockError(RuntimeError):
    pass


class LockDiverged(LockError):
    def __init__(self, message: str, t: float, error: float):
        super().__init__(message)
        self.t = t
        self.error = error


@dataclass(frozen=True)
class DriftModel:
    random_walk_sigma_rad_per_sqrt_s: float = 0.05
    linear_drift_rad_per_s: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.random_walk_sigma_rad_per_sqrt_s < 0:
            raise LockError("random-walk sigma must be >= 0")


@dataclass(frozen=True)
class LockConfig:
    kp: float = 0.3
    ki: float = 20.0
    kd: float = 0.0
    sample_interval_s: float = 0.01
    actuator_range_rad: float = 4 * math.pi
    pump_phase_factor: float = 2.0
    calibration_offset_rad: float = 0.7
    detector_noise: float = 0.002
    sweep_rate_rad_per_s: float = 4 * math.pi / 60

    def __post_init__(self):
        if not self.sample_interval_s > 0:
            raise LockError("sample interval must be > 0")
        if not self.actuator_range_rad > TWO_PI:
            raise LockError("actuator range must exceed 2 pi")
        if self.pump_phase_factor <= 0:
            raise LockError("pump phase factor must be > 0")
        if self.detector_noise < 0:
            raise LockError("detector noise must be >= 0")


@dataclass(frozen=True, eq=False)
class LockTrace:
    t: np.ndarray
    true_error: np.ndarray
    actuator: np.ndarray
    wrapped: np.ndarray

    @property
    def wrap_indices(self) -> np.ndarray:
        return np.flatnonzero(self.wrapped)

    def rms(self, start_s: float = 0.0) -> float:
        sel = self.t >= start_s
        return float(np.sqrt(np.mean(self.true_error[sel] ** 2)))

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "true_error", "actuator", "wrapped"])
        for row in zip(self.t, self.true_error, self.actuator, self.wrapped):
            w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), int(row[3])])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def pump_signal(signal_phase, cfg: LockConfig):
    """Normalized pump intensity after the interferometer."""
    arg = cfg.pump_phase_factor * np.asarray(signal_phase) + cfg.calibration_offset_rad
    return (1 + np.cos(arg)) / 2


def _wrap_pi(x):
    return (np.asarray(x) + math.pi) % TWO_PI - math.pi


def characterize(cfg: LockConfig, duration_s: float = 60.0, seed: int = 0) -> float:
    """Estimate the pump/photon phase offset from an actuator sweep.

    The actuator ramps from 0 at ``sweep_rate_rad_per_s`` (capped at the
    actuator range) while the photon phase reference is held at zero; the
    recorded pump intensity is fitted with 1 + cos + sin terms.
    """
    n = max(int(round(duration_s / cfg.sample_interval_s)), 3)
    span = min(cfg.actuator_range_rad, cfg.sweep_rate_rad_per_s * duration_s)
    if cfg.pump_phase_factor * span < TWO_PI:
        raise LockError(
            f"sweep of {span:.3g} rad covers less than one pump fringe "
            f"({TWO_PI / cfg.pump_phase_factor:.3g} rad)"
        )
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 1)))
    act = np.linspace(0.0, span, n)
    intensity = pump_signal(act, cfg) + cfg.detector_noise * rng.standard_normal(n)
    arg = cfg.pump_phase_factor * act
    x = np.column_stack([np.ones(n), np.cos(arg), np.sin(arg)])
    coef, *_ = np.linalg.lstsq(x, intensity, rcond=None)
    _, c, s = coef
    # Amplitude standard error from the residual scatter (about sigma sqrt(2/n)).
    se = float(np.std(intensity - x @ coef)) * math.sqrt(2.0 / n)
    if math.hypot(c, s) < max(0.05, 5 * se):
        raise LockError("pump fringe fit failed: insufficient modulation")
    # I = 1/2 + 1/2 cos(arg + off) = 1/2 + (cos off / 2) cos arg - (sin off / 2) sin arg
    return float(math.atan2(-s, c) % TWO_PI)


def drift_series(drift: DriftModel, n: int, dt: float) -> np.ndarray:
    """Drift sampled at t = 0, dt, ..., (n-1) dt, starting at zero."""
    rng = np.random.Generator(np.random.PCG64(derive_seed(drift.seed, 2)))
    steps = drift.random_walk_sigma_rad_per_sqrt_s * math.sqrt(dt) * rng.standard_normal(n - 1)
    walk = np.concatenate([[0.0], np.cumsum(steps)])
    return walk + drift.linear_drift_rad_per_s * dt * np.arange(n)


def run_lock(
    cfg: LockConfig,
    drift: DriftModel,
    duration_s: float,
    setpoint_rad: float = 0.0,
    offset_estimate: float | None = None,
    initial_error_rad: float = 0.0,
    seed: int = 0,
) -> LockTrace:
    """Simulate the closed loop for ``duration_s``.

    ``offset_estimate`` is the result of :func:`characterize`; it is required
    so that locking without characterization is impossible.  ``true_error``
    is reported without the 2 pi jumps introduced by wraps, so that it stays
    continuous.  Raises :class:`LockDiverged` when |error| exceeds 10 rad
    while any gain is non-zero.
    """
    if offset_estimate is None:
        raise LockError("run characterize() first and pass its offset estimate")
    dt = cfg.sample_interval_s
    n = int(round(duration_s / dt)) + 1
    k = cfg.pump_phase_factor
    lo, hi = -cfg.actuator_range_rad / 2, cfg.actuator_range_rad / 2
    controlled = any(g != 0 for g in (cfg.kp, cfg.ki, cfg.kd))

    drift_phase = drift_series(drift, n, dt)
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 3)))
    noise = cfg.detector_noise * rng.standard_normal(n)

    # Pump phase of the setpoint, mapped into [0, 2pi); the branch sign picks
    # which half-fringe the arccos inversion reports.
    target = (k * setpoint_rad + offset_estimate) % TWO_PI
    branch = 1.0 if target <= math.pi else -1.0
    margin = min(target, abs(target - math.pi), TWO_PI - target)
    if controlled and margin < EXTREMUM_MARGIN_RAD:
        raise LockError(
            f"setpoint {setpoint_rad:.4g} rad sits {margin:.3g} rad (pump phase) from a fringe "
            "extremum, where the intensity carries no error sign; shift it by a few tens of mrad"
        )

    t = np.arange(n) * dt
    err_out = np.empty(n)
    act_out = np.empty(n)
    wrapped = np.zeros(n, dtype=bool)

    integ = 0.0
    act = 0.0
    unwound = 0.0  # 2 pi multiples removed by wraps
    prev_est = None
    for i in range(n):
        true_err = initial_error_rad + drift_phase[i] + act + unwound
        phase = setpoint_rad + true_err - unwound
        err_out[i] = true_err
        act_out[i] = act
        if controlled and abs(true_err) > DIVERGENCE_RAD:
            raise LockDiverged(
                f"phase error {true_err:.3g} rad exceeds {DIVERGENCE_RAD} rad at t={t[i]:.3f} s; "
                f"gains kp={cfg.kp}, ki={cfg.ki}, kd={cfg.kd} are unstable for dt={dt}",
                t=float(t[i]),
                error=float(true_err),
            )
        if not controlled:
            continue

        intensity = min(1.0, max(0.0, float(pump_signal(phase, cfg)) + noise[i]))
        measured = branch * math.acos(2 * intensity - 1)
        est_err = float(_wrap_pi(measured - (target if branch > 0 else target - TWO_PI))) / k
        deriv = 0.0 if prev_est is None else (est_err - prev_est) / dt
        prev_est = est_err

        new_integ = integ - cfg.ki * est_err * dt
        command = new_integ - cfg.kp * est_err - cfg.kd * deriv
        if command > hi or command < lo:
            shift = -TWO_PI if command > hi else TWO_PI
            new_integ += shift
            command += shift
            unwound -= shift
            wrapped[i] = True
        if lo <= command <= hi:
            integ = new_integ
        else:
            command = min(hi, max(lo, command))
        act = command

    return LockTrace(t=t, true_error=err_out, actuator=act_out, wrapped=wrapped)


def unlocked_rms_prediction(drift: DriftModel, t: float) -> float:
    """RMS of a free random walk after ``t`` seconds: sigma sqrt(t)."""
    return drift.random_walk_sigma_rad_per_sqrt_s * math.sqrt(t)


def wrap_offsets(
    trace: LockTrace, window_s: float = 10.0, block_s: float = 0.5
) -> list[tuple[int, float, float, float]]:
    """(sample index, pre-wrap mean, post-wrap mean, standard error of their difference) per wrap.

    Only wraps with a full window on both sides are reported.  The error is
    estimated from means of ``block_s`` blocks, which are close to independent
    once a block is longer than the loop's correlation time.
    """
    dt = float(trace.t[1] - trace.t[0])
    w = int(round(window_s / dt))
    b = max(int(round(block_s / dt)), 1)
    out = []
    for idx in trace.wrap_indices:
        if idx < w or idx + w > trace.t.size:
            continue
        pre = trace.true_error[idx - w : idx]
        post = trace.true_error[idx : idx + w]
        blocks = [seg[: seg.size // b * b].reshape(-1, b).mean(axis=1) for seg in (pre, post)]
        se = math.sqrt(sum(np.var(x, ddof=1) / x.size for x in blocks))
        out.append((int(idx), float(pre.mean()), float(post.mean()), se))
    return out
