import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from railchan.interference import (
    InterferenceError,
    SirSeries,
    coverage_probability,
    sir,
    sir_series,
    weather_delta,
)

dbm = st.floats(-200, 50)


def test_sir_examples():
    assert sir(-60, -90) == 30
    assert sir(-70, -70) == 0
    assert sir(-90, -60) == -sir(-60, -90)
    assert sir(-60, None) == math.inf
    assert sir(-60, -math.inf) == math.inf
    assert sir(None, -60) == -math.inf
    assert sir(math.nan, None) == -math.inf


@given(dbm, dbm)
def test_sir_antisymmetric(a, b):
    assert sir(a, b) == -sir(b, a)


@given(dbm, dbm, st.floats(-100, 100))
def test_sir_shift_invariant(a, b, c):
    assert sir(a + c, b + c) == pytest.approx(sir(a, b), abs=1e-9)


def test_series_examples():
    run = [-60.0, -70.0, -80.0]
    assert list(sir_series(run, run).values) == [0, 0, 0]
    assert list(sir_series(run, [p - 10 for p in run]).values) == [10, 10, 10]
    with pytest.raises(InterferenceError):
        sir_series(run, run[:2])
    with pytest.raises(InterferenceError):
        sir_series(run, run, weather="rainy", interference_weather="sunny")


def series(values, pair=("a", "b")):
    return SirSeries(pair, np.asarray(values, float))


def test_coverage_examples():
    assert coverage_probability(series([10, 50, 70]), 40) == pytest.approx(2 / 3)
    assert coverage_probability(series([10, 50, 70]), 9) == 1.0
    assert coverage_probability(series([10, 50, 70]), 70) == 0.0
    assert coverage_probability(series([10, math.inf, 70]), 40) == 0.5
    with pytest.raises(InterferenceError):
        coverage_probability(series([]), 0)
    with pytest.raises(InterferenceError):
        coverage_probability(series([math.inf]), 0)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50), st.floats(-150, 150),
       st.floats(0, 50))
def test_coverage_monotone(values, t, dt):
    s = series(values)
    assert coverage_probability(s, t + dt) <= coverage_probability(s, t)
    assert coverage_probability(s, -math.inf) == 1.0
    assert coverage_probability(s, max(values)) == 0.0


def test_weather_delta():
    r = series([30.0, 40.0])
    s = series([10.0, 20.0])
    assert list(weather_delta(r, s)) == [20.0, 20.0]
    assert list(weather_delta(s, s)) == [0.0, 0.0]
    with pytest.raises(InterferenceError):
        weather_delta(r, series([1.0, 2.0], ("x", "y")))
    with pytest.raises(InterferenceError):
        weather_delta(r, series([1.0]))
