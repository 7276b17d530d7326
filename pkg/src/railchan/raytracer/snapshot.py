"""One ray-tracing snapshot: all mechanisms for one Tx/Rx placement."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .. import FREQUENCY_HZ
from ..scene import Placement
from .mechanisms import (
    Mpc,
    Receiver,
    Transmitter,
    los_blocked,
    trace_diffraction,
    trace_direct,
    trace_reflections,
    trace_scattering,
    trace_transmission,
)


@dataclass(frozen=True)
class TraceConfig:
    """Which mechanisms to trace and how far below the strongest MPC to keep."""

    max_order: int = 2
    cutoff_db: float = 60.0
    tile_m2: float = 1.0
    direct: bool = True
    reflection: bool = True
    diffraction: bool = True
    scattering: bool = True
    transmission: bool = True

    def __post_init__(self):
        if self.max_order not in (1, 2):
            raise ValueError("max_order must be 1 or 2")
        if not (self.cutoff_db > 0 and self.tile_m2 > 0):
            raise ValueError("cutoff and tile size must be positive")


@dataclass(frozen=True)
class MpcSet:
    """MPCs of one snapshot, strongest first."""

    snapshot_index: int
    mpcs: tuple
    los_blocked: bool

    def __len__(self):
        return len(self.mpcs)

    def __iter__(self):
        return iter(self.mpcs)


def _order_key(m: Mpc):
    return (-m.power, m.delay, m.signature)


def snapshot(scene, tx: Transmitter, rx: Receiver, f: float = FREQUENCY_HZ,
             config: Optional[TraceConfig] = None, index: int = 0) -> MpcSet:
    """Trace every enabled mechanism and keep MPCs within the cutoff.

    ``scene`` is a :class:`~railchan.scene.Scene` (no train) or a
    :class:`~railchan.scene.Placement`. Transmission is only traced when
    the direct path is blocked, so it never duplicates line of sight.
    """
    cfg = config or TraceConfig()
    place = scene if isinstance(scene, Placement) else Placement(scene)
    found = []
    blocked = los_blocked(place, tx, rx)
    if cfg.direct and not blocked:
        d = trace_direct(place, tx, rx, f)
        if d is not None:
            found.append(d)
    if cfg.reflection:
        found.extend(trace_reflections(place, tx, rx, f, cfg.max_order))
    if cfg.diffraction:
        found.extend(trace_diffraction(place, tx, rx, f))
    if cfg.transmission and blocked:
        found.extend(trace_transmission(place, tx, rx, f))
    if cfg.scattering:
        thr = max((m.power for m in found), default=-math.inf) - cfg.cutoff_db
        found.extend(trace_scattering(place, tx, rx, f, cfg.tile_m2,
                                      None if math.isinf(thr) else thr, cfg.cutoff_db))
    if found:
        top = max(m.power for m in found)
        found = [m for m in found if m.power >= top - cfg.cutoff_db]
    found.sort(key=_order_key)
    return MpcSet(index, tuple(found), blocked)
