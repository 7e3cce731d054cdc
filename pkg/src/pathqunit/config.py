"""Run configuration: one JSON document with a section per stage.

Every field has a default, so ``{"experiment": "full", "seed": 1}`` is a
complete config.  Sections and fields (units in the names):

``experiment``  one of fringe, chsh, tomography, epr, phaselock, full
``seed``        root seed (required; nothing is seeded from the clock)
``output_dir``  where artifacts are written (default ``out``)
``figures``     render PNG figures next to the CSV/JSON output (default true)
``source``      dim, pump_split, set_phases, distinguishability (p or a
                spectral model), arm_loss_db, pair_rate_hz
``rates``       true_cc_rate_hz, accidental_rate_hz, coincidence_window_ns,
                singles_rate_hz, detector_efficiency, apply_losses
``fringe``      points, integration_time_s
``chsh``        integration_time_s, mode (outputs | cycled)
``tomography``  integration_time_s, mc_samples, likelihood, target_theta
``analysis``    mode (raw | corrected)
``epr``         dim
``lock`` / ``drift`` / ``phaselock``  LockConfig, DriftModel and run fields
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .counting import CountingError, RatesConfig
from .phaselock import DriftModel, LockConfig, LockError
from .sourcesim import ConfigError, SourceConfig, config_from_dict, config_to_dict

EXPERIMENTS = ("fringe", "chsh", "tomography", "epr", "phaselock", "full")
ANALYSIS_MODES = ("raw", "corrected")
# Fields that choose where and how artifacts are written, not what they contain.
UNHASHED_FIELDS = ("output_dir", "figures")


@dataclass(frozen=True)
class FringeSettings:
    points: int = 200
    integration_time_s: float = 10.0


@dataclass(frozen=True)
class ChshSettings:
    integration_time_s: float = 10.0
    mode: str = "outputs"


@dataclass(frozen=True)
class TomographySettings:
    integration_time_s: float = 10.0
    mc_samples: int = 50
    likelihood: str = "gaussian"
    target_theta: float = 0.0


@dataclass(frozen=True)
class AnalysisSettings:
    mode: str = "raw"


@dataclass(frozen=True)
class PhaselockSettings:
    duration_s: float = 60.0
    setpoint_rad: float = 0.3
    characterization_s: float = 60.0
    initial_error_rad: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    seed: int
    output_dir: str = "out"
    figures: bool = True
    source: SourceConfig = field(default_factory=SourceConfig)
    rates: RatesConfig = field(default_factory=RatesConfig)
    apply_losses: bool = False
    fringe: FringeSettings = field(default_factory=FringeSettings)
    chsh: ChshSettings = field(default_factory=ChshSettings)
    tomography: TomographySettings = field(default_factory=TomographySettings)
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    epr_dim: int = 4
    lock: LockConfig = field(default_factory=LockConfig)
    drift: DriftModel = field(default_factory=DriftModel)
    phaselock: PhaselockSettings = field(default_factory=PhaselockSettings)
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def effective_rates(self) -> RatesConfig:
        """Rates with source arm loss applied when ``apply_losses`` is set."""
        if not self.apply_losses:
            return self.rates
        r = self.rates
        return RatesConfig(
            true_cc_rate_hz=r.true_cc_rate_hz,
            accidental_rate_hz=r.accidental_rate_hz,
            coincidence_window_ns=r.coincidence_window_ns,
            singles_rate_hz=r.singles_rate_hz,
            detector_efficiency=r.detector_efficiency,
            arm_transmission=self.source.arm_transmission,
        )

    def config_hash(self) -> str:
        """sha256 of the config as given, minus the output location fields."""
        raw = {k: v for k, v in self.raw.items() if k not in UNHASHED_FIELDS}
        canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _section(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(name, "expected an object")
    return value


def _build(cls, data: dict, prefix: str):
    names = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        target = key
        if target not in names:
            raise ConfigError(f"{prefix}.{key}", "unknown field")
        default = names[target].default
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{prefix}.{key}", f"expected true/false, got {value!r}")
        elif isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{prefix}.{key}", f"expected an integer, got {value!r}")
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{prefix}.{key}", f"expected a number, got {value!r}")
            value = float(value)
        kwargs[target] = value
    try:
        return cls(**kwargs)
    except (ConfigError, CountingError, LockError, ValueError, TypeError) as exc:
        raise ConfigError(prefix, str(exc)) from exc


def parse_config(data: Any) -> RunConfig:
    """Validate a decoded JSON config; raises :class:`ConfigError` naming the field."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known = {
        "experiment", "seed", "output_dir", "figures", "source", "rates", "fringe", "chsh",
        "tomography", "analysis", "epr", "lock", "drift", "phaselock",
    }
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown field")
    if "experiment" not in data:
        raise ConfigError("experiment", f"missing field (one of {', '.join(EXPERIMENTS)})")
    if data["experiment"] not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    if "seed" not in data:
        raise ConfigError("seed", "missing field")
    seed = data["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", f"expected a non-negative integer, got {seed!r}")
    figures = data.get("figures", True)
    if not isinstance(figures, bool):
        raise ConfigError("figures", "expected true/false")

    source = config_from_dict(_section(data, "source"))
    rates_data = dict(_section(data, "rates"))
    apply_losses = rates_data.pop("apply_losses", False)
    if not isinstance(apply_losses, bool):
        raise ConfigError("rates.apply_losses", "expected true/false")
    if "singles_rate_hz" in rates_data and rates_data["singles_rate_hz"] is not None:
        singles = rates_data["singles_rate_hz"]
        if not isinstance(singles, list) or len(singles) != 2:
            raise ConfigError("rates.singles_rate_hz", "expected [rate_A, rate_B]")
        rates_data["singles_rate_hz"] = tuple(float(x) for x in singles)
    rates = _build(RatesConfig, rates_data, "rates")

    fringe = _build(FringeSettings, _section(data, "fringe"), "fringe")
    if fringe.points < 4:
        raise ConfigError("fringe.points", "need at least 4 phase points")
    if not fringe.integration_time_s > 0:
        raise ConfigError("fringe.integration_time_s", "must be > 0")
    chsh = _build(ChshSettings, _section(data, "chsh"), "chsh")
    if chsh.mode not in ("outputs", "cycled"):
        raise ConfigError("chsh.mode", "must be 'outputs' or 'cycled'")
    tomo = _build(TomographySettings, _section(data, "tomography"), "tomography")
    if tomo.likelihood not in ("gaussian", "poisson"):
        raise ConfigError("tomography.likelihood", "must be 'gaussian' or 'poisson'")
    if tomo.mc_samples != 0 and tomo.mc_samples < 2:
        raise ConfigError("tomography.mc_samples", "must be 0 (off) or >= 2")
    analysis = _build(AnalysisSettings, _section(data, "analysis"), "analysis")
    if analysis.mode not in ANALYSIS_MODES:
        raise ConfigError("analysis.mode", "must be 'raw' or 'corrected'")
    epr = _section(data, "epr")
    epr_dim = epr.get("dim", 4)
    if isinstance(epr_dim, bool) or not isinstance(epr_dim, int) or epr_dim < 2:
        raise ConfigError("epr.dim", "expected an integer >= 2")
    lock = _build(LockConfig, _section(data, "lock"), "lock")
    drift = _build(DriftModel, _section(data, "drift"), "drift")
    phaselock = _build(PhaselockSettings, _section(data, "phaselock"), "phaselock")

    if data["experiment"] in ("fringe", "chsh", "tomography", "full") and source.dim != 2:
        raise ConfigError("source.dim", "fringe, CHSH and tomography runs need dim = 2")

    return RunConfig(
        experiment=data["experiment"],
        seed=seed,
        output_dir=str(data.get("output_dir", "out")),
        figures=figures,
        source=source,
        rates=rates,
        apply_losses=apply_losses,
        fringe=fringe,
        chsh=chsh,
        tomography=tomo,
        analysis=analysis,
        epr_dim=epr_dim,
        lock=lock,
        drift=drift,
        phaselock=phaselock,
        raw=data,
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return parse_config(data)


def resolved_dict(cfg: RunConfig) -> dict:
    """Fully expanded config (defaults filled in), suitable for archiving."""
    rates = asdict(cfg.rates)
    rates.pop("arm_transmission")
    rates["apply_losses"] = cfg.apply_losses
    if rates["singles_rate_hz"] is not None:
        rates["singles_rate_hz"] = list(rates["singles_rate_hz"])
    return {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
        "figures": cfg.figures,
        "source": config_to_dict(cfg.source),
        "rates": rates,
        "fringe": asdict(cfg.fringe),
        "chsh": asdict(cfg.chsh),
        "tomography": asdict(cfg.tomography),
        "analysis": asdict(cfg.analysis),
        "epr": {"dim": cfg.epr_dim},
        "lock": asdict(cfg.lock),
        "drift": asdict(cfg.drift),
        "phaselock": asdict(cfg.phaselock),
    }

