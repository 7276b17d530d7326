"""Per-snapshot channel parameters, normal fits and empirical CDFs.

All sums run over linear power (mW). Angular spreads use the power-weighted
mean angle and wrap deviations into [-pi, pi) around it, without the
circular-shift minimisation unless asked for.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)

ASA, ASD, ESA, ESD = "ASA", "ASD", "ESA", "ESD"
_ANGLE_FIELD = {ASA: "aoa_az", ASD: "aod_az", ESA: "eoa_el", ESD: "eod_el"}


class StatsError(ValueError):
    pass


def _mpcs(mpcs):
    return tuple(getattr(mpcs, "mpcs", mpcs))


def _linear(mpcs) -> np.ndarray:
    return 10.0 ** (np.array([m.power for m in mpcs], dtype=float) / 10.0)


def _dbm(p_mw: float) -> float:
    return 10.0 * math.log10(p_mw) if p_mw > 0 else -math.inf


def received_power(mpcs):
    """``(p_los, p_nlos, p_total)`` in dBm.

    ``p_los`` is the direct component and ``p_nlos`` everything else; either
    is None when absent. ``p_total`` of an empty set is ``-inf``.
    """
    mpcs = _mpcs(mpcs)
    los = [m for m in mpcs if m.is_direct]
    rest = [m for m in mpcs if not m.is_direct]
    p_los = los[0].power if los else None
    p_nlos = _dbm(float(_linear(rest).sum())) if rest else None
    p_total = _dbm(float(_linear(mpcs).sum())) if mpcs else -math.inf
    return p_los, p_nlos, p_total


def pdp(mpcs):
    """Power delay profile as ``[(delay_s, power_dbm), ...]`` sorted by delay.

    Components with identical delays share one bin.
    """
    bins = {}
    for m in _mpcs(mpcs):
        bins[m.delay] = bins.get(m.delay, 0.0) + 10.0 ** (m.power / 10.0)
    return [(d, _dbm(p)) for d, p in sorted(bins.items())]


def rms_delay_spread(mpcs) -> float:
    """Power-weighted standard deviation of the delays, seconds.

    Delays are taken relative to the earliest component first, which keeps
    the result accurate for long absolute delays (satellite links).
    """
    mpcs = _mpcs(mpcs)
    if not mpcs:
        raise StatsError("delay spread of an empty set")
    p = _linear(mpcs)
    tau = np.array([m.delay for m in mpcs])
    tau = tau - tau.min()
    w = p / p.sum()
    mean = float(w @ tau)
    return math.sqrt(max(float(w @ (tau - mean) ** 2), 0.0))


def rician_k(mpcs) -> float:
    """Strongest component over the sum of all others, dB (+inf if alone)."""
    mpcs = _mpcs(mpcs)
    if not mpcs:
        raise StatsError("K-factor of an empty set")
    p = _linear(mpcs)
    k = int(np.argmax(p))
    # Sum the others directly; p.sum() - p[k] loses precision when k dominates.
    rest = float(np.delete(p, k).sum())
    if rest <= 0:
        return math.inf
    return 10.0 * math.log10(p[k] / rest)


def _wrap(x):
    return np.mod(x + math.pi, 2 * math.pi) - math.pi


def _spread(theta, w):
    mu = float(w @ theta)
    dev = _wrap(theta - mu)
    return math.sqrt(float(w @ dev ** 2))


def angular_spread(mpcs, kind: str, minimize: bool = False) -> float:
    """Angular spread in degrees for ``kind`` in ASA, ASD, ESA, ESD.

    The mean is the power-weighted mean of the raw angles; deviations are
    wrapped into [-pi, pi) around it. With ``minimize=True`` the angles are
    first rotated so the wrap cut falls in each gap between neighbouring
    paths in turn, and the smallest spread is returned.
    """
    try:
        attr = _ANGLE_FIELD[kind]
    except KeyError:
        raise StatsError(f"unknown angle kind {kind!r}") from None
    mpcs = _mpcs(mpcs)
    if not mpcs:
        raise StatsError("angular spread of an empty set")
    p = _linear(mpcs)
    w = p / p.sum()
    theta = np.radians([getattr(m, attr) for m in mpcs])
    if not minimize:
        return math.degrees(_spread(theta, w))
    a = np.sort(np.mod(theta, 2 * math.pi))
    gaps = np.append(a[1:], a[0] + 2 * math.pi)
    cuts = 0.5 * (a + gaps)
    best = min(_spread(_wrap(theta + math.pi - c), w) for c in cuts)
    return math.degrees(best)


@dataclass(frozen=True)
class SnapshotStats:
    """Channel parameters of one snapshot; NaN where undefined (no MPCs)."""

    p_los: Optional[float]
    p_nlos: Optional[float]
    p_total: float
    ds: float
    kf: float
    asa: float
    asd: float
    esa: float
    esd: float


def snapshot_stats(mpcs, minimize: bool = False) -> SnapshotStats:
    mpcs = _mpcs(mpcs)
    p_los, p_nlos, p_total = received_power(mpcs)
    if not mpcs:
        nan = math.nan
        return SnapshotStats(p_los, p_nlos, p_total, nan, nan, nan, nan, nan, nan)
    return SnapshotStats(p_los, p_nlos, p_total, rms_delay_spread(mpcs), rician_k(mpcs),
                         *(angular_spread(mpcs, k, minimize) for k in (ASA, ASD, ESA, ESD)))


@dataclass(frozen=True)
class NormalFit:
    mu: float
    sigma: float


def fit_normal(samples) -> NormalFit:
    """Moment fit: sample mean and population standard deviation."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise StatsError("need at least two samples")
    if not np.all(np.isfinite(x)):
        raise StatsError("samples must be finite")
    return NormalFit(float(x.mean()), float(x.std()))


def finite(samples, label: str = "samples") -> np.ndarray:
    """Drop non-finite values (sentinels), logging how many were removed."""
    x = np.asarray(samples, dtype=float)
    keep = np.isfinite(x)
    dropped = int((~keep).sum())
    if dropped:
        log.info("%s: excluded %d non-finite value(s)", label, dropped)
    return x[keep]


def empirical_cdf(samples):
    """Right-continuous empirical CDF as ``(values, probabilities)``.

    ``values`` are the sorted distinct samples and ``probabilities[i]`` is
    the fraction of samples ``<= values[i]``; the last entry is 1.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise StatsError("CDF of an empty sample")
    values, counts = np.unique(x, return_counts=True)
    return values, np.cumsum(counts) / x.size


def cdf_at(samples, value: float) -> float:
    """Empirical ``P(X <= value)``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise StatsError("CDF of an empty sample")
    return float(np.count_nonzero(x <= value)) / x.size
