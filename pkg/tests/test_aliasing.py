import timeit

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from gridosc.aliasing import (
    AliasObservation as Obs,
    alias_of,
    feasible_intervals,
    resolve_candidates,
    resolve_true_frequency,
)
from gridosc.errors import ParameterError


@pytest.mark.parametrize("f, fs, want", [(22, 30, 8), (5, 30, 5), (38, 60, 22), (15, 30, 15), (0, 30, 0), (30, 30, 0)])
def test_alias_examples(f, fs, want):
    assert alias_of(f, fs) == want


def test_alias_38_at_60_by_direct_dft():
    n = 600
    x = np.cos(2 * np.pi * 38.0 * np.arange(n) / 60.0)
    f = np.fft.rfftfreq(n, 1 / 60.0)
    assert f[np.argmax(np.abs(np.fft.rfft(x)))] == pytest.approx(alias_of(38, 60))


def test_alias_rejects_bad_input():
    with pytest.raises(ParameterError):
        alias_of(-1.0, 30)
    with pytest.raises(ParameterError):
        alias_of(1.0, 0)


def test_resolve_examples():
    assert resolve_true_frequency([Obs(8, 30), Obs(22, 60)], 50) == [22.0, 38.0]
    assert resolve_true_frequency([Obs(8, 30), Obs(22, 60), Obs(22, 960)], 50) == [22.0]
    assert resolve_true_frequency([Obs(8, 30)], 10) == [8.0]
    with pytest.raises(ParameterError):
        resolve_true_frequency([], 50)


def test_candidates_carry_residuals():
    (c,) = resolve_candidates([Obs(8.02, 30), Obs(21.97, 60)], 30)
    assert len(c.residuals_hz) == 2
    assert c.worst_residual <= 0.1
    assert c.interval_hz[0] <= c.freq_hz <= c.interval_hz[1]


def test_overlapping_tolerances_are_found():
    # neither unalias point satisfies the other observation, but the windows overlap
    assert resolve_true_frequency([Obs(22.0, 100, 0.1), Obs(22.15, 100, 0.1)], 50) == [pytest.approx(22.075)]


def test_observation_parse_and_validation():
    assert Obs.parse("8:30") == Obs(8.0, 30.0, 0.1)
    assert Obs.parse("22:960:0.05") == Obs(22.0, 960.0, 0.05)
    for bad in ("8", "a:30", "20:30", "8:30:0"):
        with pytest.raises(ParameterError):
            Obs.parse(bad)


def test_acceptance_speed_is_submillisecond():
    obs = [Obs(8, 30), Obs(22, 60), Obs(22, 960)]
    best = min(timeit.repeat(lambda: resolve_true_frequency(obs, 50), number=20, repeat=5)) / 20
    assert best < 1e-3


freq = st.floats(0, 500, allow_nan=False)
rate = st.sampled_from([25.0, 30.0, 50.0, 60.0, 120.0, 960.0]) | st.floats(1, 1000)


@settings(max_examples=200, deadline=None)
@given(freq, rate, st.integers(0, 20))
def test_alias_periodic_and_bounded(f, fs, k):
    a = alias_of(f, fs)
    assert 0 <= a <= fs / 2
    assert alias_of(f + k * fs, fs) == pytest.approx(a, abs=1e-9 * (1 + f + k * fs))
    if f <= fs / 2:
        assert a == pytest.approx(f, abs=1e-12 * (1 + f))


obs_st = st.builds(
    lambda f, fs, tol: Obs(alias_of(f, fs), fs, tol),
    st.floats(0, 80), st.sampled_from([20.0, 25.0, 30.0, 50.0, 60.0, 960.0]), st.floats(0.01, 0.5),
)


@settings(max_examples=150, deadline=None)
@given(st.lists(obs_st, min_size=1, max_size=4), st.floats(5, 120))
def test_candidates_round_trip(obs, f_max):
    for f in resolve_true_frequency(obs, f_max):
        assert 0 <= f <= f_max
        for o in obs:
            assert abs(alias_of(f, o.fs_hz) - o.f_obs_hz) <= o.tolerance_hz + 1e-9


def _measure(intervals):
    return sum(hi - lo for lo, hi in intervals)


def _inside(f, intervals):
    return any(lo - 1e-9 <= f <= hi + 1e-9 for lo, hi in intervals)


@settings(max_examples=150, deadline=None)
@given(st.lists(obs_st, min_size=1, max_size=3), obs_st, st.floats(5, 120))
def test_adding_observation_refines(obs, extra, f_max):
    before = feasible_intervals(obs, f_max)
    after = feasible_intervals(obs + [extra], f_max)
    assert _measure(after) <= _measure(before) + 1e-9
    for f in resolve_true_frequency(obs + [extra], f_max):
        assert _inside(f, before)
    for lo, hi in after:
        assert _inside(lo, before) and _inside(hi, before)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 100), st.lists(st.sampled_from([30.0, 60.0, 960.0, 44.0]), min_size=1, max_size=3, unique=True))
def test_true_frequency_is_always_recovered(f_true, rates):
    obs = [Obs(alias_of(f_true, fs), fs) for fs in rates]
    cands = resolve_candidates(obs, 100)
    assert any(c.interval_hz[0] - 1e-9 <= f_true <= c.interval_hz[1] + 1e-9 for c in cands)
