"""Parametric directional antenna patterns and pointing.

The pattern is a Gaussian main lobe in dB, ``G(t) = Gmax - 12 (t / bw)^2``,
floored at a sidelobe level; ``t`` is the angle off boresight. It is
rotationally symmetric, so the off-axis angle is its only argument.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

FIXED = "fixed-orientation"
TRACK = "track-target"


class AntennaError(ValueError):
    pass


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0:
        raise AntennaError("zero or non-finite direction")
    return v / n


@dataclass(frozen=True)
class AntennaPattern:
    max_gain: float
    beamwidth_3db: float
    sidelobe_floor: Optional[float] = None
    boresight: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        floor = self.max_gain - 30.0 if self.sidelobe_floor is None else self.sidelobe_floor
        if not self.max_gain > floor:
            raise AntennaError("max_gain must exceed the sidelobe floor")
        if not 0 < self.beamwidth_3db <= 360:
            raise AntennaError("beamwidth must lie in (0, 360] degrees")
        object.__setattr__(self, "sidelobe_floor", float(floor))
        object.__setattr__(self, "boresight", tuple(_unit(self.boresight)))


def off_axis_deg(pattern: AntennaPattern, direction) -> np.ndarray:
    """Angle between ``direction`` (one vector or an (N, 3) array) and boresight."""
    d = np.asarray(direction, dtype=float)
    norms = np.linalg.norm(d, axis=-1)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise AntennaError("zero or non-finite direction")
    c = (d @ np.asarray(pattern.boresight)) / norms
    return np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))


def gain(pattern: AntennaPattern, direction) -> np.ndarray | float:
    """Gain in dBi toward ``direction``; vectorised over leading axes."""
    t = off_axis_deg(pattern, direction)
    g = np.maximum(pattern.max_gain - 12.0 * (t / pattern.beamwidth_3db) ** 2,
                   pattern.sidelobe_floor)
    return float(g) if np.ndim(g) == 0 else g


@dataclass(frozen=True)
class Mount:
    """An antenna at ``position`` with a pointing rule."""

    position: tuple
    pattern: AntennaPattern
    pointing_mode: str = TRACK

    def __post_init__(self):
        if self.pointing_mode not in (FIXED, TRACK):
            raise AntennaError(f"unknown pointing mode {self.pointing_mode!r}")
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))


def orient(mount: Mount, target) -> AntennaPattern:
    """Pattern of ``mount`` for this snapshot.

    Track-target mounts point their boresight at ``target``; fixed mounts
    keep the boresight they were built with.

    Raises:
        AntennaError: If ``target`` coincides with the mount position.
    """
    d = np.asarray(target, float) - np.asarray(mount.position)
    if np.linalg.norm(d) == 0:
        raise AntennaError("target coincides with the antenna position")
    if mount.pointing_mode == FIXED:
        return mount.pattern
    return replace(mount.pattern, boresight=tuple(_unit(d)))


def aim(pattern: AntennaPattern, source, target) -> AntennaPattern:
    """Copy of ``pattern`` with boresight from ``source`` toward ``target``."""
    d = np.asarray(target, float) - np.asarray(source, float)
    if np.linalg.norm(d) == 0:
        raise AntennaError("target coincides with the antenna position")
    return replace(pattern, boresight=tuple(_unit(d)))


@dataclass(frozen=True)
class TerminalConfig:
    """Per-terminal radio parameters (powers in dBm, gains in dBi)."""

    max_gain: float
    beamwidth: float
    pointing_mode: str
    power_dbm: Optional[float] = None
    sidelobe_floor: Optional[float] = None
    height: Optional[float] = None

    def pattern(self, boresight=(1.0, 0.0, 0.0)) -> AntennaPattern:
        return AntennaPattern(self.max_gain, self.beamwidth, self.sidelobe_floor, boresight)


# Terminal defaults: BS/SA are transmitters, TrUE/SaUE receivers.
DEFAULT_TERMINALS = {
    "BS": TerminalConfig(16.0, 20.0, TRACK, power_dbm=20.0, height=26.0),
    "TrUE": TerminalConfig(22.0, 20.0, FIXED, height=4.7),
    "SA": TerminalConfig(53.0, 1.0, TRACK, power_dbm=40.6),
    "SaUE": TerminalConfig(32.0, 3.0, TRACK, height=5.2),
}
