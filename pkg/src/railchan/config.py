"""Run configuration: built-in defaults, then a YAML scene file, then CLI flags."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import yaml

from . import FREQUENCY_HZ
from .antenna import DEFAULT_TERMINALS, TerminalConfig
from .attenuation import MAX_LINK_KM, WEATHERS
from .raytracer import TraceConfig
from .scene import ScenarioConfig, SceneError, scenario_from_mapping

_SCENE_KEYS = {"scenario", "materials", "objects"}
_TOP_KEYS = _SCENE_KEYS | {"terminals", "trace", "weather", "frequency_hz"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    terminals: dict = field(default_factory=lambda: dict(DEFAULT_TERMINALS))
    trace: TraceConfig = field(default_factory=TraceConfig)
    frequency: float = FREQUENCY_HZ
    #: Terrestrial excess attenuation is evaluated at this link length.
    max_link_km: float = MAX_LINK_KM
    #: weather -> {component: dB} replacing satellite attenuation defaults.
    satellite_overrides: dict = field(default_factory=dict)


def _terminals(data) -> dict:
    out = dict(DEFAULT_TERMINALS)
    for name, entry in (data or {}).items():
        if name not in out:
            raise ConfigError(f"unknown terminal {name!r}")
        fields = set(TerminalConfig.__dataclass_fields__)
        unknown = set(entry) - fields
        if unknown:
            raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
        out[name] = replace(out[name], **entry)
    return out


def _trace(data) -> TraceConfig:
    data = dict(data or {})
    unknown = set(data) - set(TraceConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"trace: unknown keys {sorted(unknown)}")
    return TraceConfig(**data)


def config_from_mapping(data) -> RunConfig:
    data = data or {}
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    try:
        scenario = scenario_from_mapping({k: data[k] for k in _SCENE_KEYS if k in data})
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"invalid scene section: {exc}") from exc
    weather = dict(data.get("weather") or {})
    sat = weather.pop("satellite", None) or {}
    if set(sat) - set(WEATHERS):
        raise ConfigError(f"weather.satellite keys must be among {WEATHERS}")
    max_km = float(weather.pop("max_link_km", MAX_LINK_KM))
    if weather:
        raise ConfigError(f"weather: unknown keys {sorted(weather)}")
    return RunConfig(scenario=scenario, terminals=_terminals(data.get("terminals")),
                     trace=_trace(data.get("trace")),
                     frequency=float(data.get("frequency_hz", FREQUENCY_HZ)),
                     max_link_km=max_km,
                     satellite_overrides={k: dict(v or {}) for k, v in sat.items()})


def load_config(path=None, cutoff_db: Optional[float] = None, tile_m2: Optional[float] = None,
                samples: Optional[int] = None) -> RunConfig:
    """Defaults, overlaid with the YAML file at ``path``, then the explicit flags."""
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping at the top level")
    try:
        cfg = config_from_mapping(data)
    except (SceneError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    trace = cfg.trace
    if cutoff_db is not None:
        trace = replace(trace, cutoff_db=cutoff_db)
    if tile_m2 is not None:
        trace = replace(trace, tile_m2=tile_m2)
    scenario = cfg.scenario
    if samples is not None:
        if samples < 2:
            raise ConfigError("need at least two samples")
        scenario = replace(scenario, sample_count=samples)
    return replace(cfg, trace=trace, scenario=scenario)
