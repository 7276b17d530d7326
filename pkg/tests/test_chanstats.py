import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railchan.attenuation import apply_excess
from railchan.chanstats import (
    ASA,
    ASD,
    ESA,
    ESD,
    StatsError,
    angular_spread,
    cdf_at,
    empirical_cdf,
    finite,
    fit_normal,
    pdp,
    received_power,
    rician_k,
    rms_delay_spread,
    snapshot_stats,
)
from railchan.raytracer import Mpc, MpcSet

KINDS = (ASA, ASD, ESA, ESD)
ATTR = {ASA: "aoa_az", ASD: "aod_az", ESA: "eoa_el", ESD: "eod_el"}


def mpc(power, delay=0.0, az=0.0, el=0.0, chain=None, azd=None, eld=None):
    return Mpc(power, delay, az, az if azd is None else azd, el, el if eld is None else eld,
               chain or (f"refl:{random.random()}",))


def random_set(rng, n=None):
    n = n or rng.randint(1, 50)
    out = []
    for i in range(n):
        out.append(Mpc(rng.uniform(-130, -40), rng.uniform(0, 2e-6),
                       rng.uniform(-180, 180), rng.uniform(-180, 180),
                       rng.uniform(-90, 90), rng.uniform(-90, 90),
                       ("direct",) if i == 0 and rng.random() < 0.5 else (f"refl:{i}",)))
    return out


# --- direct-summation oracles, written straight from the definitions ----------------

def oracle_power(ms):
    mw = [10 ** (m.power / 10) for m in ms]
    total = 10 * math.log10(math.fsum(mw))
    los = [m.power for m in ms if m.chain == ("direct",)]
    rest = [10 ** (m.power / 10) for m in ms if m.chain != ("direct",)]
    return (los[0] if los else None), (10 * math.log10(math.fsum(rest)) if rest else None), total


def oracle_ds(ms):
    p = [10 ** (m.power / 10) for m in ms]
    t0 = min(m.delay for m in ms)
    tau = [m.delay - t0 for m in ms]  # excess delay
    sp = math.fsum(p)
    m1 = math.fsum(t * w for t, w in zip(tau, p)) / sp
    m2 = math.fsum(t * t * w for t, w in zip(tau, p)) / sp
    return math.sqrt(max(m2 - m1 * m1, 0.0))


def oracle_kf(ms):
    p = sorted((10 ** (m.power / 10) for m in ms), reverse=True)
    if len(p) == 1:
        return math.inf
    return 10 * math.log10(p[0] / math.fsum(p[1:]))


def oracle_as(ms, kind):
    p = [10 ** (m.power / 10) for m in ms]
    th = [math.radians(getattr(m, ATTR[kind])) for m in ms]
    sp = math.fsum(p)
    mu = math.fsum(t * w for t, w in zip(th, p)) / sp
    dev = [math.fmod(math.fmod(t - mu + math.pi, 2 * math.pi) + 2 * math.pi, 2 * math.pi) - math.pi
           for t in th]
    return math.degrees(math.sqrt(math.fsum(d * d * w for d, w in zip(dev, p)) / sp))


def close(a, b, rel=1e-9, abs_=0.0):
    if a is None or b is None:
        return a is b
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_)


def oracle_mismatches(sets):
    bad = []
    for ms in sets:
        got = received_power(ms)
        want = oracle_power(ms)
        checks = [close(g, w) for g, w in zip(got, want)]
        checks.append(close(rms_delay_spread(ms), oracle_ds(ms), abs_=1e-21))
        checks.append(close(rician_k(ms), oracle_kf(ms)))
        checks.extend(close(angular_spread(ms, k), oracle_as(ms, k), abs_=1e-9) for k in KINDS)
        if not all(checks):
            bad.append(ms)
    return bad


def test_statistics_match_direct_summation_oracle():
    rng = random.Random(20261016)
    sets = [random_set(rng) for _ in range(1000)]
    assert oracle_mismatches(sets) == []


# --- worked examples ---------------------------------------------------------------

def test_received_power_examples():
    assert received_power([mpc(-60, chain=("direct",))]) == (-60, None, -60)
    _, _, total = received_power([mpc(-63.0103), mpc(-63.0103)])
    assert total == pytest.approx(-60.0, abs=1e-4)
    assert received_power([]) == (None, None, -math.inf)


def test_received_power_linear_decomposition():
    rng = random.Random(3)
    for _ in range(100):
        ms = random_set(rng)
        los, nlos, total = received_power(ms)
        parts = sum(10 ** (p / 10) for p in (los, nlos) if p is not None)
        assert parts == pytest.approx(10 ** (total / 10), rel=1e-9)


def test_pdp_merges_equal_delays_and_conserves_power():
    assert pdp([mpc(-50, 1e-7)]) == [(1e-7, -50)]
    (bin_,) = pdp([mpc(-53.0103, 1e-7), mpc(-53.0103, 1e-7)])
    assert bin_[1] == pytest.approx(-50.0, abs=1e-4)
    rng = random.Random(5)
    ms = random_set(rng, 30) + [mpc(-70, 5e-7), mpc(-71, 5e-7)]
    prof = pdp(ms)
    assert [d for d, _ in prof] == sorted(d for d, _ in prof)
    assert math.fsum(10 ** (p / 10) for _, p in prof) == pytest.approx(
        10 ** (received_power(ms)[2] / 10), rel=1e-12)


def test_delay_spread_examples():
    assert rms_delay_spread([mpc(-50, 3e-7)]) == 0.0
    assert rms_delay_spread([mpc(0, 0), mpc(0, 100e-9)]) == pytest.approx(50e-9, rel=1e-12)
    ms = [mpc(10 * math.log10(p), t * 1e-9) for p, t in ((0.5, 0), (0.3, 50), (0.2, 200))]
    assert rms_delay_spread(ms) * 1e9 == pytest.approx(75.66, abs=0.005)
    assert rms_delay_spread(ms) == pytest.approx(oracle_ds(ms), rel=1e-12)
    with pytest.raises(StatsError):
        rms_delay_spread([])


def test_delay_spread_long_absolute_delays():
    # A satellite path is ~0.125 s long; the spread is still exact.
    base = 37_469_300.0 / 299_792_458.0
    ms = [mpc(0, base), mpc(0, base + 100e-9)]
    assert rms_delay_spread(ms) == pytest.approx(50e-9, rel=1e-6)


def test_k_factor_examples():
    assert rician_k([mpc(10), mpc(0)]) == pytest.approx(10.0)
    assert rician_k([mpc(0), mpc(-3.0103), mpc(-3.0103)]) == pytest.approx(0.0, abs=1e-4)
    assert rician_k([mpc(-40)]) == math.inf
    # Strongest by power, even when the direct path is weaker.
    assert rician_k([mpc(-50, chain=("direct",)), mpc(-40)]) == pytest.approx(10.0)
    with pytest.raises(StatsError):
        rician_k([])


def test_angular_spread_examples():
    assert angular_spread([mpc(-50, az=33)], ASA) == 0.0
    assert angular_spread([mpc(0, az=10), mpc(0, az=-10)], ASA) == pytest.approx(10.0)
    assert angular_spread([mpc(0, az=179), mpc(0, az=-179)], ASA) == pytest.approx(179.0)
    assert angular_spread([mpc(0, az=179), mpc(0, az=-179)], ASA, minimize=True) == pytest.approx(1.0)
    with pytest.raises(StatsError):
        angular_spread([], ASA)
    with pytest.raises(StatsError):
        angular_spread([mpc(0)], "XSA")


def test_each_kind_reads_its_own_angle():
    ms = [Mpc(0, 0, 10, 20, 30, 40, ("a",)), Mpc(0, 0, -10, -20, -30, -40, ("b",))]
    assert [angular_spread(ms, k) for k in KINDS] == pytest.approx([10, 20, 30, 40])


# --- invariances ---------------------------------------------------------------------

power_lists = st.lists(st.tuples(st.floats(-120, -30), st.floats(0, 1e-6), st.floats(-80, 80),
                                 st.floats(-60, 60)), min_size=1, max_size=40)


def build(rows):
    return [Mpc(p, t, a, -a / 2, e, -e / 3, (f"refl:{i}",)) for i, (p, t, a, e) in enumerate(rows)]


def all_stats(ms):
    return [rms_delay_spread(ms), rician_k(ms)] + [angular_spread(ms, k) for k in KINDS]


def assert_same(a, b, rel=1e-9, abs_=1e-12):
    for x, y in zip(a, b):
        if math.isinf(x) or math.isinf(y):
            assert x == y
        else:
            assert abs(x - y) <= max(rel * max(abs(x), abs(y)), abs_)


@settings(max_examples=200, deadline=None)
@given(power_lists, st.floats(-40, 40))
def test_uniform_power_scaling_invariance(rows, shift_db):
    ms = build(rows)
    shifted = [Mpc(m.power + shift_db, m.delay, m.aoa_az, m.aod_az, m.eoa_el, m.eod_el, m.chain)
               for m in ms]
    assert_same(all_stats(ms), all_stats(shifted), abs_=1e-18)


@settings(max_examples=200, deadline=None)
@given(power_lists, st.floats(0, 0.2))
def test_delay_translation_invariance(rows, dt):
    ms = build(rows)
    moved = [Mpc(m.power, m.delay + dt, m.aoa_az, m.aod_az, m.eoa_el, m.eod_el, m.chain) for m in ms]
    a, b = rms_delay_spread(ms), rms_delay_spread(moved)
    # Absolute delays up to 0.2 s carry ~3e-17 s of float spacing.
    assert abs(a - b) <= max(1e-9 * a, 1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-90, -30), st.floats(-60, 60)), min_size=1, max_size=30),
       st.floats(-180, 180))
def test_rotation_invariance_for_narrow_support(rows, phi):
    ms = [mpc(p, az=a) for p, a in rows]
    rotated = [mpc(m.power, az=m.aoa_az + phi) for m in ms]
    assert angular_spread(rotated, ASA) == pytest.approx(angular_spread(ms, ASA), rel=1e-9, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(power_lists, st.floats(0, 60))
def test_excess_commutes_with_statistics(rows, excess):
    s = MpcSet(0, tuple(build(rows)), False)
    t = apply_excess(s, excess)
    assert_same(all_stats(s), all_stats(t), abs_=1e-18)
    if excess > 0:
        assert received_power(t)[2] == pytest.approx(received_power(s)[2] - excess, abs=1e-9)


@given(st.lists(st.tuples(st.floats(-90, -30), st.integers(0, 500), st.integers(-179, 180)),
                min_size=1, max_size=20))
def test_zero_spread_iff_shared_value(rows):
    # Delays on a 1 ns grid and angles on a 1 degree grid keep differences
    # well away from underflow.
    ms = [mpc(p, t * 1e-9, az=a) for p, t, a in rows]
    assert (rms_delay_spread(ms) == 0) == (len({m.delay for m in ms}) == 1)
    assert (angular_spread(ms, ASA) == 0) == (len({m.aoa_az for m in ms}) == 1)


def test_snapshot_stats_empty_and_consistent():
    s = snapshot_stats([])
    assert s.p_total == -math.inf and math.isnan(s.ds)
    ms = [mpc(-60, 0, 5, chain=("direct",)), mpc(-70, 1e-8, -5)]
    s = snapshot_stats(ms)
    assert 10 ** (s.p_los / 10) + 10 ** (s.p_nlos / 10) == pytest.approx(10 ** (s.p_total / 10), rel=1e-9)
    assert s.ds >= 0 and s.asa >= 0


# --- fits and CDFs ------------------------------------------------------------------

def test_fit_normal_examples():
    assert fit_normal([3, 3, 3]).sigma == 0
    f = fit_normal([0, 2])
    assert (f.mu, f.sigma) == (1, 1)
    with pytest.raises(StatsError):
        fit_normal([1.0])
    with pytest.raises(StatsError):
        fit_normal([1.0, math.inf])


def test_fit_normal_recovers_generator():
    n = 20000
    x = np.random.default_rng(7).normal(12.5, 3.0, n)
    f = fit_normal(x)
    assert abs(f.mu - 12.5) < 3 * 3.0 / math.sqrt(n)
    assert abs(f.sigma - 3.0) < 3 * 3.0 / math.sqrt(2 * n)


def test_empirical_cdf_examples():
    v, p = empirical_cdf([5])
    assert list(v) == [5] and list(p) == [1.0]
    assert cdf_at([1, 2, 3, 4], 2) == 0.5
    v, p = empirical_cdf([4, 1, 2, 2])
    assert list(v) == [1, 2, 4] and list(p) == [0.25, 0.75, 1.0]
    with pytest.raises(StatsError):
        empirical_cdf([])


def test_finite_drops_sentinels(caplog):
    with caplog.at_level("INFO"):
        x = finite([1.0, math.inf, math.nan, 2.0], "kf")
    assert list(x) == [1.0, 2.0]
    assert "excluded 2" in caplog.text
