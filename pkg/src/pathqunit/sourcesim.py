"""Source model: ideal pair state, distinguishability, and coincidence probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .multiport import fourier_matrix
from .statecore import (
    DensityMatrix,
    QuNitPair,
    StateError,
    dephase,
    make_pair_state,
    to_tensor_order,
)

SPEED_OF_LIGHT = 299_792_458.0
CENTER_WAVELENGTH_M = 1550e-9


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class SpectralModel:
    """Filter bandwidth (intensity FWHM, GHz), centre offset (nm) and path mismatch (um)."""

    filter_bandwidth_ghz: float = 100.0
    center_offset_nm: float = 0.0
    delay_mismatch_um: float = 0.0
    filter_shape: str = "gaussian"

    def __post_init__(self):
        if not self.filter_bandwidth_ghz > 0:
            raise ConfigError("filter_bandwidth_ghz", "must be > 0")
        if not (math.isfinite(self.center_offset_nm) and math.isfinite(self.delay_mismatch_um)):
            raise ConfigError("center_offset_nm", "offsets must be finite")
        if self.filter_shape not in _OVERLAPS:
            raise ConfigError("filter_shape", f"unknown shape {self.filter_shape!r}")

    @property
    def detuning_hz(self) -> float:
        return SPEED_OF_LIGHT * self.center_offset_nm * 1e-9 / CENTER_WAVELENGTH_M**2

    @property
    def delay_s(self) -> float:
        return self.delay_mismatch_um * 1e-6 / SPEED_OF_LIGHT


@dataclass(frozen=True)
class SourceConfig:
    dim: int = 2
    pump_split: tuple[complex, ...] = ()
    set_phases: tuple[float, ...] = ()
    distinguishability: float | SpectralModel = 0.956
    arm_loss_db: float = 1.9
    pair_rate_hz: float = 150.0

    def __post_init__(self):
        if self.dim < 2:
            raise ConfigError("dim", "must be >= 2")
        split = tuple(complex(x) for x in self.pump_split) or (1.0 + 0j,) * self.dim
        phases = tuple(float(x) for x in self.set_phases) or (0.0,) * (self.dim - 1)
        object.__setattr__(self, "pump_split", split)
        object.__setattr__(self, "set_phases", phases)
        if len(split) != self.dim:
            raise ConfigError("pump_split", f"needs {self.dim} entries, got {len(split)}")
        if len(phases) != self.dim - 1:
            raise ConfigError("set_phases", f"needs {self.dim - 1} entries, got {len(phases)}")
        if not any(abs(x) > 0 for x in split):
            raise ConfigError("pump_split", "all-zero pump split")
        if isinstance(self.distinguishability, (int, float)):
            if not 0.0 <= self.distinguishability <= 1.0:
                raise ConfigError("distinguishability", "must lie in [0, 1]")
        if self.arm_loss_db < 0:
            raise ConfigError("arm_loss_db", "must be >= 0")
        if self.pair_rate_hz < 0:
            raise ConfigError("pair_rate_hz", "must be >= 0")

    @property
    def coherence(self) -> float:
        """Dephasing factor p of the path coherences."""
        if isinstance(self.distinguishability, SpectralModel):
            return overlap_visibility(self.distinguishability)
        return float(self.distinguishability)

    @property
    def arm_transmission(self) -> float:
        return 10 ** (-self.arm_loss_db / 10)


def ideal_state(config: SourceConfig) -> QuNitPair:
    phases = np.concatenate([[0.0], np.asarray(config.set_phases, dtype=float)])
    amps = np.asarray(config.pump_split, dtype=complex) * np.exp(-1j * phases)
    try:
        return make_pair_state(amps)
    except StateError as exc:
        raise ConfigError("pump_split", str(exc)) from exc


def _gaussian_overlap(model: SpectralModel) -> float:
    # Intensity FWHM -> standard deviation of the intensity spectrum |f|^2.
    sigma = model.filter_bandwidth_ghz * 1e9 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    detune = model.detuning_hz
    tau = model.delay_s
    return math.exp(-(detune**2) / (8 * sigma**2) - 2 * math.pi**2 * sigma**2 * tau**2)


_OVERLAPS = {"gaussian": _gaussian_overlap}


def overlap_visibility(model: SpectralModel) -> float:
    """|<f_A| f_B>| of two unit-norm amplitude spectra, one detuned and delayed.

    Closed form for Gaussian filters of intensity std sigma, detuning d and delay tau:
    exp(-d^2 / (8 sigma^2)) * exp(-2 pi^2 sigma^2 tau^2).
    """
    return _OVERLAPS[model.filter_shape](model)


def effective_density(config: SourceConfig) -> DensityMatrix:
    return dephase(ideal_state(config), config.coherence)


def coincidence_probs(rho: DensityMatrix, u_a: np.ndarray, u_b: np.ndarray) -> np.ndarray:
    """Joint detection probabilities P[i, j] after local unitaries on each photon."""
    u_a = np.asarray(u_a, dtype=complex)
    u_b = np.asarray(u_b, dtype=complex)
    n = u_a.shape[0]
    if u_a.shape != (n, n) or u_b.shape != (n, n):
        raise StateError(f"analyzers must both be square of equal size, got {u_a.shape}, {u_b.shape}")
    if rho.dim != n * n:
        raise StateError(f"density matrix dim {rho.dim} does not match {n}x{n} analyzers")
    r = to_tensor_order(rho.entries, n)
    u = np.kron(u_a, u_b)
    probs = np.real(np.einsum("ka,ab,kb->k", u, r, u.conj())).reshape(n, n)
    return np.clip(probs, 0.0, 1.0)


def epr_phases(n: int, k: int) -> tuple[float, ...]:
    """Set phases phi_j = 2 pi j k / N, j = 1..N-1."""
    return tuple(2 * math.pi * j * k / n for j in range(1, n))


def epr_correlation_table(n: int, k: int) -> np.ndarray:
    """Coincidence table of the balanced state with input phase relation ``k``
    measured by Fourier multiports on both sides.

    Detectors (a, b) fire together only when a + b = k (mod N).
    """
    if n < 2:
        raise ConfigError("dim", "must be >= 2")
    if not 0 <= k < n:
        raise ConfigError("input_phase_setting", f"k={k} outside [0, {n})")
    state = ideal_state(SourceConfig(dim=n, set_phases=epr_phases(n, k), distinguishability=1.0))
    rho = dephase(state, 1.0)
    f = fourier_matrix(n)
    return coincidence_probs(rho, f, f)


def is_perfectly_correlated(table: np.ndarray, n: Optional[int] = None) -> bool:
    """Exactly N entries equal 1/N (1e-10) and every other entry below 1e-12."""
    table = np.asarray(table)
    n = n or table.shape[0]
    hits = np.abs(table - 1.0 / n) < 1e-10
    rest = table[~hits]
    return int(hits.sum()) == n and bool(np.all(rest < 1e-12))


def config_from_dict(data: dict) -> SourceConfig:
    """Build a :class:`SourceConfig` from its JSON section.

    ``pump_split`` entries are real numbers or ``[re, im]`` pairs.
    ``distinguishability`` is a number p or an object with SpectralModel fields.
    """
    data = dict(data)
    known = {"dim", "pump_split", "set_phases", "distinguishability", "arm_loss_db", "pair_rate_hz"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"source.{sorted(extra)[0]}", "unknown field")
    kwargs: dict = {}
    if "dim" in data:
        kwargs["dim"] = _as_int(data["dim"], "source.dim")
    if "pump_split" in data:
        kwargs["pump_split"] = tuple(_as_complex(x, "source.pump_split") for x in data["pump_split"])
    if "set_phases" in data:
        kwargs["set_phases"] = tuple(_as_float(x, "source.set_phases") for x in data["set_phases"])
    if "distinguishability" in data:
        d = data["distinguishability"]
        if isinstance(d, dict):
            try:
                kwargs["distinguishability"] = SpectralModel(**d)
            except TypeError as exc:
                raise ConfigError("source.distinguishability", str(exc)) from exc
        else:
            kwargs["distinguishability"] = _as_float(d, "source.distinguishability")
    for name in ("arm_loss_db", "pair_rate_hz"):
        if name in data:
            kwargs[name] = _as_float(data[name], f"source.{name}")
    try:
        return SourceConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"source.{exc.field}", str(exc).split(": ", 1)[-1]) from exc


def config_to_dict(config: SourceConfig) -> dict:
    d = config.distinguishability
    return {
        "dim": config.dim,
        "pump_split": [[z.real, z.imag] for z in config.pump_split],
        "set_phases": list(config.set_phases),
        "distinguishability": d.__dict__.copy() if isinstance(d, SpectralModel) else d,
        "arm_loss_db": config.arm_loss_db,
        "pair_rate_hz": config.pair_rate_hz,
    }


def _as_int(x, name: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(name, f"expected an integer, got {x!r}")
    return x


def _as_float(x, name: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(name, f"expected a number, got {x!r}")
    return float(x)


def _as_complex(x, name: str) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ConfigError(name, "complex entries are [re, im] pairs")
        return complex(_as_float(x[0], name), _as_float(x[1], name))
    return complex(_as_float(x, name))
