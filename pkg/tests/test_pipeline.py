import math
from dataclasses import replace

import numpy as np
import pytest

from fwm_filter.errors import (
    BoundaryEnergyError,
    GridMismatch,
    SweepError,
    WindowOutsideGrid,
)
from fwm_filter.pipeline import (
    CONTRAST_CAP,
    PipelineSetup,
    SweepResult,
    SweepRow,
    check_boundary_energy,
    detect_side_peaks,
    generate_signal,
    run_half_gaussian,
    run_square,
    sweep_detuning,
    sweep_edge_steepness,
    sweep_pulse_width,
)
from fwm_filter.pulses import PulseEnvelope, TimeGrid, forward_transform, square_pulse
from fwm_filter.spectra import SpectralResponse

SMALL = TimeGrid(0.0, 0.05, 256)


def random_pulse(rng, grid):
    return PulseEnvelope(grid, rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n))


def random_filter(rng, grid):
    f = grid.frequencies()
    return SpectralResponse(f, rng.normal(size=f.size) + 1j * rng.normal(size=f.size))


# -- generate_signal -----------------------------------------------------------

def test_identity_filter():
    p = square_pulse(3.0, 8.0, 10.0, SMALL)
    out = generate_signal(p, SpectralResponse(SMALL.frequencies(), np.ones(SMALL.n)))
    assert np.max(np.abs(out.amplitude - p.amplitude)) < 1e-10


def test_zero_filter():
    p = square_pulse(3.0, 8.0, 10.0, SMALL)
    out = generate_signal(p, SpectralResponse(SMALL.frequencies(), np.zeros(SMALL.n)))
    assert np.all(out.amplitude == 0)


def test_matches_direct_circular_convolution():
    rng = np.random.default_rng(0)
    n = SMALL.n
    probe = random_pulse(rng, SMALL)
    filt = random_filter(rng, SMALL)
    # impulse response by a direct O(n^2) inverse DFT of the filter in
    # natural bin order, then a direct circular convolution
    k = np.arange(n)
    natural = np.fft.ifftshift(filt.amplitude)
    dft = np.exp(2j * np.pi * np.outer(k, k) / n)
    h = dft @ natural / n
    idx = (k[:, None] - k[None, :]) % n
    expected = (h[idx] * probe.amplitude[None, :]).sum(axis=1)
    out = generate_signal(probe, filt, normalize=False)
    assert np.max(np.abs(out.amplitude - expected)) < 1e-8 * np.max(np.abs(expected))


def test_linearity():
    rng = np.random.default_rng(1)
    p1, p2 = random_pulse(rng, SMALL), random_pulse(rng, SMALL)
    filt = random_filter(rng, SMALL)
    a, b = 1.5 - 0.5j, -0.7
    mix = PulseEnvelope(SMALL, a * p1.amplitude + b * p2.amplitude)
    lhs = generate_signal(mix, filt, normalize=False).amplitude
    rhs = (a * generate_signal(p1, filt, normalize=False).amplitude
           + b * generate_signal(p2, filt, normalize=False).amplitude)
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * np.max(np.abs(lhs))


def test_energy_bound():
    rng = np.random.default_rng(2)
    for _ in range(5):
        p = random_pulse(rng, SMALL)
        filt = random_filter(rng, SMALL)
        out = generate_signal(p, filt, normalize=False)
        bound = np.max(filt.magnitude) ** 2 * p.energy()
        assert out.energy() <= bound * (1 + 1e-10)


def test_grid_mismatch():
    p = square_pulse(3.0, 8.0, 10.0, SMALL)
    other = TimeGrid(0.0, 0.1, 256).frequencies()
    with pytest.raises(GridMismatch):
        generate_signal(p, SpectralResponse(other, np.ones(256)))
    with pytest.raises(GridMismatch):
        generate_signal(p, SpectralResponse(np.linspace(-1, 1, 128), np.ones(128)))


def test_boundary_guard():
    p = square_pulse(0.0, 5.0, 10.0, SMALL)
    with pytest.raises(BoundaryEnergyError):
        check_boundary_energy(p)
    assert check_boundary_energy(square_pulse(4.0, 8.0, 100.0, SMALL)) < 1e-6


# -- side peaks ----------------------------------------------------------------

def test_constant_output_has_unit_contrast():
    g = TimeGrid()
    rep = detect_side_peaks(PulseEnvelope(g, 0.3 * np.ones(g.n)), (15.0, 25.0))
    assert rep.contrast == pytest.approx(1.0)
    assert all(p.height == pytest.approx(0.3) for p in rep.peaks)
    assert rep.plateau_level == pytest.approx(0.3)


def test_synthetic_bumps():
    g = TimeGrid()
    t = g.times
    centers = (15.07, 24.93)
    width = 0.05
    trace = np.full(g.n, 0.1)
    for c in centers:
        trace = np.maximum(trace, 0.9 * np.exp(-((t - c) ** 2) / (2 * width ** 2)))
    rep = detect_side_peaks(PulseEnvelope(g, trace), (15.0, 25.0))
    assert [p.edge for p in rep.peaks] == ["rising", "falling"]
    for p, c in zip(rep.peaks, centers):
        assert p.time == pytest.approx(c, abs=g.dt)
        assert p.height == pytest.approx(0.9, rel=1e-3)
    assert rep.contrast == pytest.approx(9.0, rel=0.02)


def test_zero_plateau_is_capped():
    g = TimeGrid()
    trace = np.zeros(g.n)
    trace[1500] = 1.0
    rep = detect_side_peaks(PulseEnvelope(g, trace), (15.0, 25.0))
    assert rep.contrast == CONTRAST_CAP


def test_window_outside_grid():
    g = TimeGrid()
    with pytest.raises(WindowOutsideGrid):
        detect_side_peaks(PulseEnvelope(g, np.ones(g.n)), (0.2, 25.0))
    with pytest.raises(WindowOutsideGrid):
        detect_side_peaks(PulseEnvelope(g, np.ones(g.n)), (15.0, 25.0), plateau_region=(30, 50))


def test_resonant_square_has_two_side_peaks(setup):
    res = run_square(setup)
    rep = res.report
    assert len(rep.peaks) == 2
    assert abs(rep.peak("rising").time - setup.t_a) <= 0.5
    assert abs(rep.peak("falling").time - setup.t_b) <= 0.5
    assert rep.contrast > 3
    assert np.max(res.output.magnitude) == pytest.approx(1.0)


# -- sweeps --------------------------------------------------------------------

def test_pulse_width_sweep(setup):
    sweep = sweep_pulse_width([6, 1, 3, 2, 5, 4], setup)
    assert list(sweep.column("param")) == [1, 2, 3, 4, 5, 6]
    assert np.all(np.diff(sweep.column("energy_fraction")) < 0)


def test_single_row_equals_standalone(setup):
    row = sweep_pulse_width([3.0], setup).rows[0]
    standalone = SweepRow.from_chain(3.0, run_half_gaussian(setup, 3.0, normalize=False))
    assert row == standalone


def test_threaded_sweep_identical(setup):
    threaded = replace(setup, threads=3)
    threaded._chi3 = setup.chi3()
    a = sweep_pulse_width([1, 2, 3, 4], setup)
    b = sweep_pulse_width([1, 2, 3, 4], threaded)
    assert a.rows == b.rows


def test_sweep_error_keeps_partial_rows(setup):
    bad = replace(setup)
    bad._chi3 = setup.chi3()
    bad.t_cut = 38.0  # wide Gaussians run into the grid end
    with pytest.raises(SweepError) as info:
        sweep_pulse_width([0.2, 0.5, 6.0], bad)
    assert info.value.param == 6.0
    assert [r.param for r in info.value.partial.rows] == [0.2, 0.5]


def test_detuning_sweep(setup):
    sweep = sweep_detuning([20.0, -20.0, 0.0], setup)
    c = dict(zip(sweep.column("param"), sweep.column("contrast")))
    assert c[0.0] > 3
    assert c[-20.0] < 1.2
    assert c[20.0] == pytest.approx(c[-20.0], rel=0.02)
    assert c[0.0] > c[20.0]


def test_edge_steepness_monotone(setup):
    sweep = sweep_edge_steepness([0.1, 1, 10, 100], setup)
    assert np.all(np.diff(sweep.column("contrast")) >= 0)


def test_sweep_result_sorted():
    with pytest.raises(ValueError):
        SweepResult("x", [SweepRow(2, 0, 0, 1, 0), SweepRow(1, 0, 0, 1, 0)])
