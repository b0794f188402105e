import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gridosc.energy import (
    SURVEY_BAND_HZ,
    ModeEnergyConfig,
    Scenario,
    classify_scenario,
    correlate_energy_power,
    energy_report,
    heatmap_grid,
    mode_energy_percent,
    window_means,
)
from gridosc.errors import ParameterError
from gridosc.ingest import ChannelKind
from gridosc.spectral import PsdEstimate, welch_psd
from gridosc.synth import gen_ambient, gen_network

from conftest import make_channel
from scenarios import shape_scenario

F = np.arange(0, 901) / 60.0  # 0..15 Hz on a one-minute grid
CFG = ModeEnergyConfig(5.0, 11.0, (7.5, 8.5))


def _psd(density, freqs=F):
    return PsdEstimate(freqs, density, "welch", float(freqs[1] - freqs[0]), "x", 20)


def _trapz(y, x):
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2))


def test_survey_band_default():
    assert SURVEY_BAND_HZ == (5.0, 11.0)
    assert ModeEnergyConfig().f1_hz == 5.0 and ModeEnergyConfig().f2_hz == 11.0


def test_flat_psd_is_zero():
    assert mode_energy_percent(_psd(np.full(F.size, 3.0)), CFG) == 0.0


def test_triangle_on_flat_baseline_is_100():
    tri = np.clip(1 - np.abs(F - 8.0) / 0.3, 0, None)
    assert mode_energy_percent(_psd(2.0 + 5.0 * tri), CFG) == pytest.approx(100.0, abs=0.5)


def test_sloped_baseline_against_trapezoid_oracle():
    band = (F >= 5) & (F <= 11)
    base = 1.0 + (F - 5.0) / 6.0
    area = 0.4
    peak = area / (0.1 * np.sqrt(2 * np.pi)) * np.exp(-0.5 * ((F - 8.0) / 0.1) ** 2)
    dens = base + peak
    fb = F[band]
    oracle = 100 * _trapz(peak[band], fb) / _trapz(dens[band] - dens[band].min(), fb)
    assert mode_energy_percent(_psd(dens), CFG) == pytest.approx(oracle, rel=0.01)


def test_constant_trend_option():
    tri = np.clip(1 - np.abs(F - 8.0) / 0.3, 0, None)
    cfg = ModeEnergyConfig(5.0, 11.0, (7.5, 8.5), "constant")
    assert mode_energy_percent(_psd(2.0 + tri), cfg) == pytest.approx(100.0, abs=0.5)


def test_config_validation():
    with pytest.raises(ParameterError):
        ModeEnergyConfig(5.0, 11.0, (4.0, 8.0))
    with pytest.raises(ParameterError):
        ModeEnergyConfig(trend_model="cubic")
    with pytest.raises(ParameterError):
        mode_energy_percent(_psd(np.ones(F.size)), ModeEnergyConfig(5.0, 20.0, (7.5, 8.5)))
    narrow = ModeEnergyConfig(7.45, 8.55, (7.5, 8.5))
    with pytest.raises(ParameterError):
        mode_energy_percent(_psd(np.ones(F.size)), narrow)
    assert ModeEnergyConfig.around(7.89).mode_band_hz == pytest.approx((7.39, 8.39))


def _sine_psd(amp, seed=0):
    t = np.arange(36000) / 30.0
    x = gen_ambient(1200, 30.0, 1.0, 1.0, seed=seed).values + amp * np.cos(2 * np.pi * 7.89 * t)
    return welch_psd(make_channel(x), 60.0, 0.0, "rectangular", "linear")


def test_scale_invariance():
    psd = _sine_psd(0.05)
    e = mode_energy_percent(psd, CFG)
    for c in (1e-6, 0.3, 7.0, 1e5):
        assert mode_energy_percent(psd.scaled(c), CFG) == pytest.approx(e, abs=1e-10)


def test_monotone_in_amplitude():
    amps = np.linspace(0.0, 1.0, 10)
    es = [mode_energy_percent(_sine_psd(a, seed=3), CFG) for a in amps]
    assert all(b >= a for a, b in zip(es, es[1:]))
    assert es[-1] > 90


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=3, max_size=30), st.integers(0, 2**31))
def test_clamped_for_adversarial_densities(knots, seed):
    xs = np.linspace(0, 15, len(knots))
    dens = np.interp(F, xs, knots)
    e = mode_energy_percent(_psd(dens), CFG)
    assert 0.0 <= e <= 100.0 and np.isfinite(e)


@pytest.mark.parametrize("v, i, want", [(60, 5, Scenario.S1), (60, 55, Scenario.S2), (5, 5, Scenario.NONE), (5, 60, Scenario.NONE), (20, 20, Scenario.S2)])
def test_classify(v, i, want):
    assert classify_scenario(v, i, 20) is want


# -- causality -------------------------------------------------------------

def _gated(n=100, seed=0):
    rng = np.random.default_rng(seed)
    on = np.zeros(n, bool)
    on[20:70] = True
    p = np.where(on, 20 * (1 + 0.01 * rng.standard_normal(n)), 0.0)
    q = np.where(on, p * np.tan(np.arccos(0.95)), 0.05 * rng.standard_normal(n))
    pf = np.where(on, 0.95, 0.0)
    e = np.where(on, 1.0, 0.02) * (1 + 0.2 * rng.standard_normal(n)) ** 2
    return e, p, q, pf


def test_gated_energy_tracks_power():
    e, p, q, pf = _gated()
    rep = correlate_energy_power(e, p, q, pf)
    assert rep.pearson_r["P"] > 0.8 and rep.mean_ratio >= 10
    assert rep.n_on == 50 and rep.n_off == 50
    assert rep.pearson_r["P"] == pytest.approx(stats.pearsonr(e, p)[0], abs=1e-12)
    lines = rep.scatter_csv("|Q|").splitlines()
    assert lines[0] == "abs_q,energy" and len(lines) == 101


def test_shuffled_energy_is_uncorrelated():
    e, p, q, pf = _gated()
    rng = np.random.default_rng(1)
    rs = [correlate_energy_power(rng.permutation(e), p, q, pf).pearson_r["P"] for _ in range(200)]
    assert np.mean(np.abs(rs) < 0.2) >= 0.9


def test_zero_power_is_flagged():
    e, _, q, pf = _gated()
    rep = correlate_energy_power(e, np.zeros(100), q, pf)
    assert np.isnan(rep.pearson_r["P"]) and "P" in rep.undefined
    assert rep.to_dict()["pearson_r"]["P"] is None


def test_causality_needs_ten_windows():
    with pytest.raises(ParameterError):
        correlate_energy_power(np.ones(5), np.ones(5), np.ones(5), np.ones(5))
    with pytest.raises(ParameterError):
        correlate_energy_power(np.ones(12), np.ones(11), np.ones(12), np.ones(12))


def test_window_means():
    ch = make_channel(np.arange(600.0), rate=1.0, t0=100.0)
    got = window_means(ch, np.array([130.0, 190.0]), 60.0)
    np.testing.assert_allclose(got, [np.mean(np.arange(0, 60)), np.mean(np.arange(60, 120))])


# -- heatmap ---------------------------------------------------------------

def test_single_point_fills_grid():
    g = heatmap_grid([(3.0, 4.0, 42.0)], (8, 6, (0.0, 10.0, 0.0, 10.0)))
    assert g.values.shape == (6, 8)
    np.testing.assert_allclose(g.values, 42.0, atol=1e-12)


def test_two_points_symmetric_centre():
    g = heatmap_grid([(-0.8, 0.0, 0.0), (0.8, 0.0, 100.0)], (11, 11, (-1.0, 1.0, -1.0, 1.0)))
    assert g.values[5, 5] == pytest.approx(50.0, abs=1e-9)


def test_cell_with_sample_reproduces_it():
    pts = [(1.3, 2.2, 17.0), (7.7, 8.1, 63.0), (4.0, 5.5, 5.0)]
    g = heatmap_grid(pts, (10, 10, (0.0, 10.0, 0.0, 10.0)))
    for x, y, v in pts:
        assert g.values[int(y), int(x)] == pytest.approx(v, abs=1e-9)


def test_cluster_holds_the_maximum():
    rng = np.random.default_rng(5)
    hot = [(x, y, 80 + 10 * rng.random()) for x, y in rng.uniform(60, 75, (4, 2))]
    cold = [(x, y, 10 * rng.random()) for x, y in rng.uniform(0, 100, (12, 2)) if not (55 < x < 80 and 55 < y < 80)]
    g = heatmap_grid(hot + cold, (50, 50, (0.0, 100.0, 0.0, 100.0)))
    iy, ix = np.unravel_index(np.nanargmax(g.values), g.values.shape)
    hx = [p[0] for p in hot]
    hy = [p[1] for p in hot]
    half = 1.0  # half a cell
    assert min(hx) - half <= g.x[ix] <= max(hx) + half
    assert min(hy) - half <= g.y[iy] <= max(hy) + half


def test_cutoff_and_errors():
    g = heatmap_grid([(1.0, 1.0, 5.0)], (10, 10, (0.0, 10.0, 0.0, 10.0)), cutoff_km=3.0)
    assert np.isnan(g.values[9, 9]) and g.values[1, 1] == 5.0
    with pytest.raises(ParameterError):
        heatmap_grid([(1.0, 1.0, 5.0)], (0, 10, (0.0, 10.0, 0.0, 10.0)))
    with pytest.raises(ParameterError):
        heatmap_grid([(11.0, 1.0, 5.0)], (5, 5, (0.0, 10.0, 0.0, 10.0)))


pts_st = st.lists(
    st.tuples(st.floats(0, 100), st.floats(0, 100), st.floats(0, 100)), min_size=1, max_size=8
)


@settings(max_examples=60, deadline=None)
@given(pts_st, st.randoms(use_true_random=False), st.floats(-500, 500), st.floats(-500, 500))
def test_heatmap_permutation_and_translation(pts, rnd, tx, ty):
    grid = (7, 5, (0.0, 100.0, 0.0, 100.0))
    base = heatmap_grid(pts, grid)
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    np.testing.assert_allclose(heatmap_grid(shuffled, grid).values, base.values, rtol=1e-12, atol=1e-9)
    moved = [(x + tx, y + ty, v) for x, y, v in pts]
    g2 = heatmap_grid(moved, (7, 5, (tx, 100.0 + tx, ty, 100.0 + ty)))
    np.testing.assert_allclose(g2.values, base.values, rtol=1e-9, atol=1e-7)


# -- report ----------------------------------------------------------------

def test_energy_report_scenarios_and_heatmap():
    sc = shape_scenario(21)
    sc.emit_current = True
    sc.current_mode_idx = [0]
    chs, _ = gen_network(sc)
    psds = {c.id: welch_psd(c, 60.0, 0.0, "rectangular", "linear")
            for c in chs if c.kind in (ChannelKind.VPHM, ChannelKind.IPHM)}
    rep = energy_report(chs, psds, ModeEnergyConfig.around(7.89), grid=(20, 10, (-110.0, 80.0, -30.0, 40.0)))
    by_id = {r.id: r for r in rep.channels}
    assert by_id["SUB00.VPHM.30"].scenario is Scenario.S2
    assert by_id["SUB01.VPHM.30"].scenario is Scenario.S1
    assert all(r.scenario is Scenario.NONE for r in rep.channels if r.kind == "IPHM")
    assert all(0 <= r.e_percent <= 100 for r in rep.channels)
    assert rep.heatmap.values.shape == (10, 20)
    d = rep.to_dict()
    assert d["config"]["mode_band_hz"] == pytest.approx([7.39, 8.39])
    assert rep.to_csv().splitlines()[0] == "id,substation,kind,e_percent,scenario,x,y"
