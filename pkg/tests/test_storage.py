import math

import numpy as np
import pytest

from fwm_filter.errors import GapOutsidePulse, NoOffGap, WindowOutsideGrid
from fwm_filter.presets import preset_config, shape_cases
from fwm_filter.pulses import PulseEnvelope, TimeGrid, forward_transform, square_pulse
from fwm_filter.storage import (
    StorageParams,
    TimingSequence,
    retrieval_energy,
    simulate_storage,
)


@pytest.fixture(scope="module")
def env():
    cfg = preset_config("fig6b")
    setup = cfg.pipeline()
    filt = setup.combined()
    cases = {k: v[0] for k, v in shape_cases(cfg, setup).items()}
    return cfg, filt, cases


def test_square_pulse_retrieves_visibly(env):
    cfg, filt, cases = env
    assert cfg.storage.t_on_us - cfg.storage.t_off_us == pytest.approx(12.0)
    trace = simulate_storage(cases["case1"], cfg.timing(), cfg.storage_params(), filt)
    assert trace.retrieved_energy() > 0.05 * trace.suppressed_energy()
    assert np.max(np.abs(trace.retrieval)) > 0


def test_slow_back_edge_retrieves_little(env):
    cfg, filt, cases = env
    e = {k: simulate_storage(p, cfg.timing(), cfg.storage_params(), filt).retrieved_energy()
         for k, p in cases.items()}
    assert e["case3"] < 0.1 * e["case1"]
    assert e["case1"] > 10 * e["case3"] and e["case2"] > 10 * e["case3"]


def test_retrieval_follows_suppressed_energy(env):
    cfg, filt, cases = env
    traces = [simulate_storage(p, cfg.timing(), cfg.storage_params(), filt) for p in cases.values()]
    traces.sort(key=lambda tr: tr.suppressed_energy())
    retrieved = [tr.retrieved_energy() for tr in traces]
    assert all(b >= a for a, b in zip(retrieved, retrieved[1:]))


def test_disabled_memory(env):
    cfg, filt, cases = env
    on = simulate_storage(cases["case1"], cfg.timing(), cfg.storage_params(), filt)
    off = simulate_storage(cases["case1"], cfg.timing(), StorageParams(eta=0.0), filt)
    assert np.all(off.retrieval == 0)
    np.testing.assert_array_equal(off.leak, on.leak)


def test_leak_equals_reference_outside_gap(env):
    cfg, filt, cases = env
    tr = simulate_storage(cases["case2"], cfg.timing(), cfg.storage_params(), filt)
    gap = tr.grid.index_range(*tr.gap)
    outside = np.ones(tr.grid.n, bool)
    outside[gap] = False
    np.testing.assert_array_equal(tr.leak[outside], tr.reference[outside])
    assert np.all(tr.leak[gap] == 0)


def test_joint_normalization(env):
    cfg, filt, cases = env
    tr = simulate_storage(cases["case1"], cfg.timing(), cfg.storage_params(), filt)
    peak = max(np.max(tr.composite().magnitude), np.max(tr.channel("reference").magnitude))
    assert peak == pytest.approx(1.0)


def test_gap_decay_law():
    # wide grid so that t_on + tau_s fits; fixed write content
    grid = TimeGrid(0.0, 0.01, 16384)
    cfg = preset_config("fig6b").with_values(grid={"n": grid.n})
    filt = cfg.pipeline().combined()
    probe = square_pulse(15.0, 25.0, 100.0, grid)
    params = cfg.storage_params()
    t_off = 24.8

    def energy(gap):
        timing = TimingSequence.gated(t_off, t_off + gap, grid)
        return simulate_storage(probe, timing, params, filt).retrieved_energy()

    e6, e12, e24 = energy(6.0), energy(12.0), energy(24.0)
    assert e24 < e12 < e6
    for gap in (6.0, 12.0):
        ratio = energy(gap + params.tau_s) / energy(gap)
        assert ratio == pytest.approx(math.exp(-2.0), rel=0.01)


def test_storage_errors(env):
    cfg, filt, cases = env
    g = cases["case1"].grid
    no_gap = TimingSequence(((0, g.t_end),), ((0, g.t_end),), ((0, g.t_end),))
    with pytest.raises(NoOffGap):
        simulate_storage(cases["case1"], no_gap, cfg.storage_params(), filt)
    two = TimingSequence(((0, 5), (6, 10), (12, 40)), ((0, 40),), ((0, 40),))
    with pytest.raises(NoOffGap):
        two.off_gap()
    late = TimingSequence.gated(32.0, 36.0, g)
    with pytest.warns(GapOutsidePulse):
        tr = simulate_storage(cases["case1"], late, cfg.storage_params(), filt)
    total = float(np.sum(np.abs(tr.reference) ** 2) * g.dt)
    assert tr.retrieved_energy() < 1e-12 * total


def test_timing_validation():
    with pytest.raises(ValueError):
        TimingSequence(((5, 3),), (), ())
    with pytest.raises(ValueError):
        TimingSequence(((0, 5), (4, 8)), (), ())
    g = TimeGrid()
    with pytest.raises(WindowOutsideGrid):
        TimingSequence(((0, 50),), (), ()).check_inside(g)
    assert TimingSequence.gated(10, 20, g).off_gap() == (10.0, 20.0)


def test_params_validation():
    for bad in ({"eta": 1.5}, {"tau_s": 0}, {"readout_rate": -1}, {"write_window": math.nan}):
        with pytest.raises(ValueError):
            StorageParams(**bad)


# -- retrieval_energy ----------------------------------------------------------

def test_energy_of_zero_trace():
    g = TimeGrid()
    assert retrieval_energy(PulseEnvelope(g, np.zeros(g.n)), (5, 10)) == 0.0


def test_energy_of_unit_trace():
    g = TimeGrid(0.0, 0.01, 4096)
    e = retrieval_energy(PulseEnvelope(g, np.exp(1j * np.linspace(0, 9, g.n))), (10.0, 11.0))
    assert abs(e - 1.0) < 1e-10


def test_energy_matches_parseval():
    rng = np.random.default_rng(0)
    g = TimeGrid()
    x = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    window = (12.0, 19.5)
    windowed = np.zeros(g.n, complex)
    sl = g.index_range(*window)
    windowed[sl] = x[sl]
    spectral = np.sum(np.abs(forward_transform(PulseEnvelope(g, windowed)).amplitude) ** 2) * g.dt
    assert retrieval_energy(PulseEnvelope(g, x), window) == pytest.approx(spectral, rel=1e-8)


def test_energy_window_outside_grid():
    g = TimeGrid()
    with pytest.raises(WindowOutsideGrid):
        retrieval_energy(PulseEnvelope(g, np.ones(g.n)), (-1.0, 3.0))
    with pytest.raises(WindowOutsideGrid):
        retrieval_energy(PulseEnvelope(g, np.ones(g.n)), (30.0, 50.0))
