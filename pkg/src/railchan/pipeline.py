"""Case execution: trace the four links along the trajectory, apply weather
excess per case, and write trace, statistics and interference artifacts."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import attenuation as att
from . import chanstats, interference
from .antenna import FIXED
from .config import RunConfig
from .raytracer import Mpc, MpcSet, Receiver, Transmitter, snapshot
from .scene import build_hsr_scenario, sample_trajectory

log = logging.getLogger(__name__)

TRANSMITTERS = ("BS", "SA")
RECEIVERS = ("TrUE", "SaUE")
WEATHER_SUFFIX = {"rainy": "R", "sunny": "S"}
LINKS = tuple(f"{t}2{r}" for t in TRANSMITTERS for r in RECEIVERS)
#: system -> (signal link, interfering link)
SYSTEMS = {"terrestrial": ("BS2TrUE", "SA2TrUE"), "satellite": ("SA2SaUE", "BS2SaUE")}
COVERAGE_THRESHOLDS = (0.0, 40.0)
FIT_PARAMETERS = ("ds_ns", "kf_db", "asa_deg", "asd_deg", "esa_deg", "esd_deg")
WORKERS_ENV = "RAILCHAN_WORKERS"

MPC_HEADER = ("snapshot_index", "track_distance_m", "power_dbm", "delay_s", "aod_az_deg",
              "aod_el_deg", "aoa_az_deg", "aoa_el_deg", "chain")
STATS_HEADER = ("snapshot_index", "track_distance_m", "p_los_dbm", "p_nlos_dbm", "p_total_dbm",
                "ds_ns", "kf_db", "asa_deg", "asd_deg", "esa_deg", "esd_deg")
SIR_HEADER = ("weather", "snapshot_index", "track_distance_m", "p_signal_dbm",
              "p_interference_dbm", "sir_db")


class CaseError(ValueError):
    pass


@dataclass(frozen=True)
class CaseSpec:
    tx: str
    rx: str
    weather: str

    def __post_init__(self):
        if self.tx not in TRANSMITTERS or self.rx not in RECEIVERS:
            raise CaseError(f"unknown link {self.tx}2{self.rx}")
        if self.weather not in WEATHER_SUFFIX:
            raise CaseError(f"unknown weather {self.weather!r}")

    @property
    def link(self) -> str:
        return f"{self.tx}2{self.rx}"

    @property
    def terminology(self) -> str:
        return f"{self.link}-{WEATHER_SUFFIX[self.weather]}"

    @classmethod
    def parse(cls, text: str) -> "CaseSpec":
        link, sep, suffix = text.partition("-")
        tx, sep2, rx = link.partition("2")
        weather = {v: k for k, v in WEATHER_SUFFIX.items()}.get(suffix)
        if not (sep and sep2 and weather):
            raise CaseError(f"invalid case id {text!r}; expected e.g. BS2TrUE-R")
        return cls(tx, rx, weather)


ALL_CASES = tuple(CaseSpec(t, r, w) for t in TRANSMITTERS for r in RECEIVERS
                  for w in WEATHER_SUFFIX)


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise CaseError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(n, 1)


# --- tracing --------------------------------------------------------------------------

def case_excess(case: CaseSpec, cfg: RunConfig) -> float:
    """Excess attenuation (dB) applied to every MPC of ``case``."""
    if case.tx == "BS":
        return att.terrestrial_excess(case.weather, cfg.max_link_km, cfg.max_link_km)
    b = att.satellite_components(case.weather, cfg.satellite_overrides.get(case.weather))
    return att.combine_total(b)


class _Link:
    """Terminal placement for one link along the trajectory.

    The BS serves the train, so it points at the TrUE antenna whichever
    receiver the link measures; TrUE points at the BS and SaUE at the
    satellite. Fixed-orientation antennas keep their pointing from the
    trajectory start.
    """

    def __init__(self, scene, cfg: RunConfig, link: str):
        tx_name, rx_name = link.split("2")
        self.scene = scene
        self.tx_cfg = cfg.terminals[tx_name]
        self.rx_cfg = cfg.terminals[rx_name]
        ends = scene.endpoints
        self.u = ends.satellite_direction
        self.bs = np.asarray(ends.bs, float)
        self.tx_name, self.rx_name = tx_name, rx_name
        self.true_up = np.array([0.0, 0.0, ends.true_height])
        self.rx_up = np.array([0.0, 0.0, ends.true_height if rx_name == "TrUE" else ends.saue_height])
        start = np.asarray(scene.trajectory.start, float)
        self.rx_fixed = self._rx_boresight(start)
        self.tx_fixed = self._tx_boresight(start)

    def _rx_boresight(self, sample):
        return self.bs - (sample + self.rx_up) if self.rx_name == "TrUE" else self.u

    def _tx_boresight(self, sample):
        return (sample + self.true_up) - self.bs if self.tx_name == "BS" else -self.u

    def endpoints(self, sample):
        sample = np.asarray(sample, float)
        r = sample + self.rx_up
        rb = self.rx_fixed if self.rx_cfg.pointing_mode == FIXED else self._rx_boresight(sample)
        tb = self.tx_fixed if self.tx_cfg.pointing_mode == FIXED else self._tx_boresight(sample)
        pattern = self.tx_cfg.pattern(tuple(tb))
        power = self.tx_cfg.power_dbm
        if self.tx_name == "BS":
            tx = Transmitter(pattern, power, position=tuple(self.bs))
        else:
            tx = Transmitter(pattern, power, direction=tuple(self.u),
                             distance=self.scene.endpoints.satellite_distance,
                             reference=tuple(self.scene.trajectory.start))
        return tx, Receiver(tuple(r), self.rx_cfg.pattern(tuple(rb)))


_JOB = None


def _trace_range(bounds):
    scene, cfg, link, samples = _JOB
    lk = _Link(scene, cfg, link)
    out = []
    for i in range(*bounds):
        tx, rx = lk.endpoints(samples[i])
        place = scene.vehicle_at(samples[i])
        out.append(snapshot(place, tx, rx, cfg.frequency, cfg.trace, index=i))
    return out


def trace_link(scene, cfg: RunConfig, link: str, workers: int = 1) -> list:
    """Unattenuated MpcSets for every trajectory sample, in snapshot order.

    Snapshots are independent, so the result does not depend on ``workers``.
    """
    global _JOB
    if link not in LINKS:
        raise CaseError(f"unknown link {link!r}")
    samples = sample_trajectory(scene.trajectory)
    n = len(samples)
    _JOB = (scene, cfg, link, samples)
    try:
        if workers <= 1 or n < 2:
            return _trace_range((0, n))
        step = max(1, math.ceil(n / (workers * 4)))
        chunks = [(a, min(a + step, n)) for a in range(0, n, step)]
        # The first chunk runs here so forked workers inherit compiled
        # kernels and cached tiles instead of rebuilding them.
        first = _trace_range(chunks[0])
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(workers, mp_context=ctx) as ex:
            parts = list(ex.map(_trace_range, chunks[1:]))
        return first + [s for part in parts for s in part]
    finally:
        _JOB = None


# --- artifacts ------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_mpcs(path: Path, sets, distances):
    """MPC trace. Snapshots without MPCs keep a row with empty fields."""
    def rows():
        for s, d in zip(sets, distances):
            if not s.mpcs:
                yield (s.snapshot_index, d, None, None, None, None, None, None, "")
            for m in s.mpcs:
                yield (s.snapshot_index, d, m.power, m.delay, m.aod_az, m.eod_el, m.aoa_az,
                       m.eoa_el, m.signature)
    _write_csv(path, MPC_HEADER, rows())


def read_mpcs(path: Path):
    """Inverse of :func:`write_mpcs`: ``(sets, distances)``."""
    sets, dist = {}, {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        if header != MPC_HEADER:
            raise CaseError(f"{path}: unexpected header")
        for row in r:
            i = int(row[0])
            dist[i] = float(row[1])
            bucket = sets.setdefault(i, [])
            if row[2] == "":
                continue
            p, tau, aod, eod, aoa, eoa = map(float, row[2:8])
            bucket.append(Mpc(p, tau, aoa, aod, eoa, eod, tuple(row[8].split(";"))))
    order = sorted(sets)
    if order != list(range(len(order))):
        raise CaseError(f"{path}: snapshot indices are not contiguous")
    # Blocked-LOS state is not stored; it only matters for tracing.
    out = [MpcSet(i, tuple(sets[i]), not any(m.is_direct for m in sets[i])) for i in order]
    return out, [dist[i] for i in order]


def _stats_rows(sets, distances):
    rows = []
    for s, d in zip(sets, distances):
        st = chanstats.snapshot_stats(s)
        rows.append((s.snapshot_index, d, st.p_los, st.p_nlos, st.p_total, st.ds * 1e9, st.kf,
                     st.asa, st.asd, st.esa, st.esd))
    return rows


def _summaries(case_id: str, rows, out: Path):
    """Stats, fits and delay-spread CDF files for one case; returns fit rows."""
    _write_csv(out / f"{case_id}_stats.csv", STATS_HEADER, rows)
    col = {name: i for i, name in enumerate(STATS_HEADER)}
    fits = []
    for p in FIT_PARAMETERS:
        x = chanstats.finite([r[col[p]] for r in rows], f"{case_id} {p}")
        if x.size >= 2:
            f = chanstats.fit_normal(x)
            fits.append((case_id, p, f.mu, f.sigma))
        else:
            fits.append((case_id, p, math.nan, math.nan))
    _write_csv(out / f"{case_id}_fits.csv", ("case", "parameter", "mu", "sigma"), fits)
    ds = chanstats.finite([r[col["ds_ns"]] for r in rows], f"{case_id} ds_ns")
    cdf = zip(*chanstats.empirical_cdf(ds)) if ds.size else ()
    _write_csv(out / f"{case_id}_cdf.csv", ("ds_ns", "probability"), cdf)
    return fits


def _interference_reports(totals, distances, out: Path):
    """SIR series, coverage and weather-delta files from per-case total powers."""
    coverage, deltas = [], []
    for system, (sig, intf) in SYSTEMS.items():
        sir_rows, series = [], {}
        for weather, suffix in WEATHER_SUFFIX.items():
            ps, pi = totals[f"{sig}-{suffix}"], totals[f"{intf}-{suffix}"]
            s = interference.sir_series(ps, pi, (sig, intf), weather, weather)
            series[weather] = s
            for i, d in enumerate(distances):
                sir_rows.append((weather, i, d, ps[i], pi[i], s.values[i]))
            for th in COVERAGE_THRESHOLDS:
                coverage.append((system, weather, th, interference.coverage_probability(s, th)))
        _write_csv(out / f"sir_{system}.csv", SIR_HEADER, sir_rows)
        delta = interference.weather_delta(series["rainy"], series["sunny"])
        deltas.extend((system, i, d, v) for i, (d, v) in enumerate(zip(distances, delta)))
    _write_csv(out / "coverage.csv", ("system", "weather", "threshold_db", "coverage"), coverage)
    _write_csv(out / "weather_delta.csv",
               ("system", "snapshot_index", "track_distance_m", "delta_db"), deltas)


def _manifest(out: Path, cfg: RunConfig, cases):
    files = sorted(p.name for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    data = {
        "cases": [c for c in cases],
        "frequency_hz": cfg.frequency,
        "samples": cfg.scenario.sample_count,
        "cutoff_db": cfg.trace.cutoff_db,
        "tile_m2": cfg.trace.tile_m2,
        "max_order": cfg.trace.max_order,
        "files": {f: hashlib.sha256((out / f).read_bytes()).hexdigest() for f in files},
    }
    (out / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _prepare(out_dir) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _distances(scene):
    start = np.asarray(scene.trajectory.start, float)
    return [float(np.linalg.norm(p - start)) for p in sample_trajectory(scene.trajectory)]


def run_case(case, cfg: RunConfig, out_dir, workers: int = 1, scene=None) -> dict:
    """Trace one case and write its trace, stats, fits and CDF files.

    Returns ``{"case": id, "sets": [MpcSet...], "distances": [...]}`` with
    the attenuated sets.
    """
    if isinstance(case, str):
        case = CaseSpec.parse(case)
    out = _prepare(out_dir)
    scene = scene or build_hsr_scenario(cfg.scenario)
    raw = trace_link(scene, cfg, case.link, workers)
    return _emit_case(case, cfg, raw, _distances(scene), out, manifest=True)


def _emit_case(case, cfg, raw, distances, out, manifest=False):
    excess = case_excess(case, cfg)
    sets = [att.apply_excess(s, excess) for s in raw]
    cid = case.terminology
    write_mpcs(out / f"{cid}_mpc.csv", sets, distances)
    rows = _stats_rows(sets, distances)
    fits = _summaries(cid, rows, out)
    if manifest:
        _manifest(out, cfg, [cid])
    return {"case": cid, "sets": sets, "distances": distances, "rows": rows, "fits": fits}


def run_all(cfg: RunConfig, out_dir, workers: int = 1, scene=None) -> dict:
    """All eight cases plus SIR, coverage, weather-delta and fit summaries.

    Each link is traced once; the two weather cases differ only in the
    excess attenuation applied afterwards.
    """
    out = _prepare(out_dir)
    scene = scene or build_hsr_scenario(cfg.scenario)
    distances = _distances(scene)
    results = {}
    for link in LINKS:
        log.info("tracing %s (%d snapshots)", link, len(distances))
        raw = trace_link(scene, cfg, link, workers)
        for weather in WEATHER_SUFFIX:
            case = CaseSpec(*link.split("2"), weather)
            results[case.terminology] = _emit_case(case, cfg, raw, distances, out)
    _finish_all(results, distances, out)
    _manifest(out, cfg, list(results))
    return results


def _finish_all(results, distances, out):
    totals = {cid: [r[4] for r in res["rows"]] for cid, res in results.items()}
    _interference_reports(totals, distances, out)
    fits = [f for cid in sorted(results) for f in results[cid]["fits"]]
    _write_csv(out / "summary_fits.csv", ("case", "parameter", "mu", "sigma"), fits)


def report(in_dir) -> dict:
    """Regenerate statistics and summaries from the MPC traces in ``in_dir``."""
    out = Path(in_dir)
    traces = sorted(out.glob("*_mpc.csv"))
    if not traces:
        raise CaseError(f"no MPC traces in {out}")
    results, distances = {}, None
    for path in traces:
        cid = path.name[: -len("_mpc.csv")]
        CaseSpec.parse(cid)
        sets, dist = read_mpcs(path)
        rows = _stats_rows(sets, dist)
        results[cid] = {"case": cid, "sets": sets, "distances": dist, "rows": rows,
                        "fits": _summaries(cid, rows, out)}
        distances = dist
    if len(results) == len(ALL_CASES):
        _finish_all(results, distances, out)
    else:
        log.info("only %d of %d cases present; skipping SIR reports", len(results),
                 len(ALL_CASES))
    return results
