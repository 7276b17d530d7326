"""Excess tropospheric attenuation for terrestrial and satellite links.

Defaults are typical component values at 22.6 GHz. Terrestrial losses
scale linearly with link length; satellite components are fixed per
weather and can be overridden individually.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .raytracer import MpcSet

RAINY = "rainy"
SUNNY = "sunny"
WEATHERS = (RAINY, SUNNY)
TERRESTRIAL = "terrestrial"
SATELLITE = "satellite"

#: Longest terrestrial link the calibration covers, km.
MAX_LINK_KM = 0.6
#: Terrestrial gas and rain loss at MAX_LINK_KM, dB.
TERRESTRIAL_GAS_DB = 0.12
TERRESTRIAL_RAIN_DB = 8.1074

SATELLITE_GAS_DB = 0.7071
SATELLITE_RAIN_DB = 30.0162
SATELLITE_CLOUD_DB = 2.1677
SATELLITE_SCINT_DB = 0.7638


class AttenuationError(ValueError):
    pass


def _check_weather(weather: str):
    if weather not in WEATHERS:
        raise AttenuationError(f"unknown weather {weather!r}")


@dataclass(frozen=True)
class AttenuationBudget:
    """Attenuation components in dB: gases, rain, clouds, scintillation."""

    a_gas: float
    a_rain: float
    a_cloud: float
    a_scint: float
    link_class: str = SATELLITE
    weather: str = RAINY

    def __post_init__(self):
        _check_weather(self.weather)
        if self.link_class not in (TERRESTRIAL, SATELLITE):
            raise AttenuationError(f"unknown link class {self.link_class!r}")
        for name in ("a_gas", "a_rain", "a_cloud", "a_scint"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise AttenuationError(f"{name} must be finite and non-negative")
        if self.weather == SUNNY and self.a_rain != 0:
            raise AttenuationError("a sunny budget cannot carry rain attenuation")


def terrestrial_excess(weather: str, link_length: float, max_length: float = MAX_LINK_KM) -> float:
    """Gas (and rain, if rainy) loss in dB over ``link_length`` km."""
    _check_weather(weather)
    if not link_length > 0:
        raise AttenuationError("link length must be positive")
    if link_length > max_length + 1e-12:
        raise AttenuationError(f"link length {link_length} km exceeds {max_length} km")
    scale = link_length / MAX_LINK_KM
    loss = TERRESTRIAL_GAS_DB * scale
    if weather == RAINY:
        loss += TERRESTRIAL_RAIN_DB * scale
    return loss


def satellite_components(weather: str, overrides=None) -> AttenuationBudget:
    """Slant-path components for ``weather``.

    ``overrides`` maps any of ``a_gas``, ``a_rain``, ``a_cloud``,
    ``a_scint`` to a replacement value in dB.
    """
    _check_weather(weather)
    b = AttenuationBudget(SATELLITE_GAS_DB, SATELLITE_RAIN_DB if weather == RAINY else 0.0,
                          SATELLITE_CLOUD_DB, SATELLITE_SCINT_DB, SATELLITE, weather)
    if overrides:
        unknown = set(overrides) - {"a_gas", "a_rain", "a_cloud", "a_scint"}
        if unknown:
            raise AttenuationError(f"unknown attenuation components: {sorted(unknown)}")
        b = replace(b, **{k: float(v) for k, v in overrides.items()})
    return b


def combine_total(b: AttenuationBudget) -> float:
    """Total slant-path attenuation: ``A_G + sqrt((A_R + A_C)^2 + A_S^2)``.

    Rain and cloud losses are strongly correlated and add; scintillation is
    combined with them in quadrature.
    """
    return b.a_gas + math.hypot(b.a_rain + b.a_cloud, b.a_scint)


def apply_excess(mpc_set: MpcSet, excess: float) -> MpcSet:
    """Copy of ``mpc_set`` with every MPC power lowered by ``excess`` dB."""
    if not (math.isfinite(excess) and excess >= 0):
        raise AttenuationError("excess must be finite and non-negative")
    if excess == 0:
        return mpc_set
    amp = 10.0 ** (-excess / 20.0)
    mpcs = tuple(replace(m, power=m.power - excess,
                         field=None if m.field is None else m.field * amp)
                 for m in mpc_set.mpcs)
    return replace(mpc_set, mpcs=mpcs)
