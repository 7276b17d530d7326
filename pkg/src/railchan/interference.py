"""Co-channel signal-to-interference ratio between two links."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)


class InterferenceError(ValueError):
    pass


def _absent(p) -> bool:
    return p is None or (isinstance(p, float) and math.isnan(p)) or p == -math.inf


def sir(p_signal, p_interference) -> float:
    """Signal minus interference power, dB.

    A missing (None, NaN or -inf) interference power gives +inf and a
    missing signal gives -inf; the signal check wins when both are missing.
    """
    if _absent(p_signal):
        return -math.inf
    if _absent(p_interference):
        return math.inf
    return float(p_signal) - float(p_interference)


@dataclass(frozen=True)
class SirSeries:
    """Per-snapshot SIR of a (signal case, interference case) pair."""

    case_pair: tuple
    values: np.ndarray
    weather: Optional[str] = None

    def __len__(self):
        return len(self.values)


def sir_series(signal_run, interference_run, case_pair=("signal", "interference"),
               weather: Optional[str] = None,
               interference_weather: Optional[str] = None) -> SirSeries:
    """Element-wise SIR of two equally long per-snapshot total-power runs (dBm)."""
    if len(signal_run) != len(interference_run):
        raise InterferenceError(f"run lengths differ: {len(signal_run)} vs {len(interference_run)}")
    if interference_weather is not None and interference_weather != weather:
        raise InterferenceError("signal and interference runs must share the weather")
    values = np.array([sir(s, i) for s, i in zip(signal_run, interference_run)], dtype=float)
    values.setflags(write=False)
    return SirSeries(tuple(case_pair), values, weather)


def coverage_probability(s: SirSeries, threshold: float) -> float:
    """Fraction of snapshots with SIR strictly above ``threshold`` dB.

    Infinite sentinels are left out of both numerator and denominator.
    """
    v = np.asarray(s.values, dtype=float)
    if v.size == 0:
        raise InterferenceError("empty SIR series")
    keep = np.isfinite(v)
    dropped = int((~keep).sum())
    if dropped:
        log.info("coverage %s: excluded %d non-finite SIR value(s)", s.case_pair, dropped)
    v = v[keep]
    if v.size == 0:
        raise InterferenceError("no finite SIR values")
    return float(np.count_nonzero(v > threshold)) / v.size


def weather_delta(s_rainy: SirSeries, s_sunny: SirSeries) -> np.ndarray:
    """Per-snapshot ``rainy - sunny`` SIR difference, dB."""
    if s_rainy.case_pair != s_sunny.case_pair:
        raise InterferenceError("weather delta needs the same case pair")
    if len(s_rainy) != len(s_sunny):
        raise InterferenceError("series lengths differ")
    return np.asarray(s_rainy.values, float) - np.asarray(s_sunny.values, float)
