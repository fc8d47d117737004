"""Acceptance suite.

Preset results are read back from the CSV and JSON files that the presets
write; nothing here inspects in-memory pipeline objects. Each criterion
reports one PASS/FAIL line (also collected in the terminal summary).
"""
import json
import math
import time

import numpy as np
import pytest

from fwm_filter.atom_model import (
    TWO_PI,
    AtomScheme,
    DensityMatrix,
    DriveFields,
    build_liouvillian,
    evolve_to_steady,
    steady_state,
)
from fwm_filter.io import read_csv, read_numeric_csv
from fwm_filter.pipeline import generate_signal
from fwm_filter.presets import PRESETS, run_preset
from fwm_filter.pulses import PulseEnvelope, TimeGrid, forward_transform, inverse_transform
from fwm_filter.spectra import FilterParams, SpectralResponse, transmission_amplitude

FORMATS = ("csv", "json")


@pytest.fixture(scope="module")
def outputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    timings = {}
    for name in PRESETS:
        t0 = time.perf_counter()
        run_preset(name, root, FORMATS)
        timings[name] = time.perf_counter() - t0
    return root, timings


def manifest(root, name):
    return json.loads((root / name / "manifest.json").read_text())


def fwhm_from_samples(x, y):
    """Half-maximum width by linear interpolation around the global maximum."""
    i = int(np.argmax(y))
    half = y[i] / 2
    left = i
    while left > 0 and y[left] > half:
        left -= 1
    right = i
    while right < len(y) - 1 and y[right] > half:
        right += 1
    if y[left] > half or y[right] > half:
        return math.nan
    xl = x[left] + (half - y[left]) * (x[left + 1] - x[left]) / (y[left + 1] - y[left])
    xr = x[right - 1] + (half - y[right - 1]) * (x[right] - x[right - 1]) / (y[right] - y[right - 1])
    return xr - xl


def test_criterion_1_solver_equivalence(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        gamma = TWO_PI * rng.uniform(1, 10)
        scheme = AtomScheme(gamma, TWO_PI * rng.uniform(0.5, 10), gamma * rng.uniform(1e-3, 1e-2),
                            gamma * rng.uniform(0, 1e-2), rng.uniform(0, 1))
        drives = DriveFields(rng.uniform(0, TWO_PI * 10), rng.uniform(0, TWO_PI * 10),
                             rng.uniform(0, TWO_PI), rng.uniform(0, 1e-2 * gamma),
                             TWO_PI * rng.uniform(-10, 10), TWO_PI * rng.uniform(-10, 10))
        L = build_liouvillian(scheme, drives)
        a = steady_state(L).rho
        b = evolve_to_steady(L, DensityMatrix.pure(1)).rho
        worst = max(worst, float(np.max(np.abs(a - b))))
    elapsed = time.perf_counter() - t0
    criterion(1, worst <= 1e-6 and elapsed < 10,
              f"max |steady - evolved| = {worst:.2e} (<= 1e-6), runtime {elapsed:.2f} s (< 10 s)")


def test_criterion_2_analytic_transmission(criterion):
    params = FilterParams(alpha=1.0, gamma=TWO_PI * 3.0)
    center = abs(complex(transmission_amplitude(0.0, params)))
    wing_mhz = 1e3 * params.gamma / TWO_PI
    wings = np.abs(transmission_amplitude(np.array([-wing_mhz, wing_mhz]), params))
    err_c = abs(center - math.exp(-1.0))
    err_w = float(np.max(np.abs(wings - 1)))
    criterion(2, err_c <= 1e-12 and err_w <= 1e-6,
              f"|t(0)| - 1/e = {err_c:.1e} (<= 1e-12), wings |t| - 1 = {err_w:.1e} (<= 1e-6)")


def test_criterion_3_transform_suite(criterion):
    rng = np.random.default_rng(3)
    g = TimeGrid(0.0, 0.01, 4096)
    x = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    spec = forward_transform(PulseEnvelope(g, x))
    rt = float(np.max(np.abs(inverse_transform(spec).amplitude - x)) / np.max(np.abs(x)))
    pv = abs(float(np.sum(np.abs(spec.amplitude) ** 2) / np.sum(np.abs(x) ** 2)) - 1)

    small = TimeGrid(0.0, 0.05, 256)
    n = small.n
    probe = rng.normal(size=n) + 1j * rng.normal(size=n)
    filt = rng.normal(size=n) + 1j * rng.normal(size=n)
    k = np.arange(n)
    h = np.exp(2j * np.pi * np.outer(k, k) / n) @ np.fft.ifftshift(filt) / n
    oracle = (h[(k[:, None] - k[None, :]) % n] * probe[None, :]).sum(axis=1)
    out = generate_signal(PulseEnvelope(small, probe),
                          SpectralResponse(small.frequencies(), filt), normalize=False)
    conv = float(np.max(np.abs(out.amplitude - oracle)) / np.max(np.abs(oracle)))
    criterion(3, rt <= 1e-10 and pv <= 1e-10 and conv <= 1e-8,
              f"roundtrip {rt:.1e}, Parseval {pv:.1e} (<= 1e-10 at n=4096); "
              f"convolution oracle {conv:.1e} (<= 1e-8 at n=256)")


def test_criterion_4_bandwidth_calibration(outputs, criterion):
    root, _ = outputs
    data = read_numeric_csv(root / "calibrate" / "chi3_calibrated.csv")
    fwhm = fwhm_from_samples(data["delta2_mhz"], data["abs"])
    # absorption dip 1 - exp(-alpha / (1 + x^2)) at alpha = 1: half depth
    # where 1/(1 + x^2) = -ln(1 - (1 - 1/e)/2)
    cfg = manifest(root, "calibrate")["parameters"]
    alpha, width = cfg["filter.alpha"], cfg["filter.gamma_mhz"]
    depth = 1 - math.exp(-alpha)
    u = -math.log(1 - depth / 2) / alpha
    dip = 2 * width * math.sqrt(1 / u - 1)
    criterion(4, 8 <= fwhm <= 12 and fwhm > dip,
              f"FWHM |chi3| = {fwhm:.4f} MHz (10 +/- 20%), absorption dip FWHM = {dip:.4f} MHz")


def test_criterion_5_side_peaks(outputs, criterion):
    root, timings = outputs
    m = manifest(root, "fig5a")
    d = m["derived"]
    out = read_numeric_csv(root / "fig5a" / "output.csv")
    t_a, t_b = m["parameters"]["pulse.t_a_us"], m["parameters"]["pulse.t_b_us"]
    peaks = d["peaks"]
    near = [min(abs(p["time_us"] - e) for e in (t_a, t_b)) for p in peaks]
    edges_hit = sorted(min((t_a, t_b), key=lambda e: abs(p["time_us"] - e)) for p in peaks)
    # heights reported in the manifest must be the CSV samples at those times
    consistent = all(
        abs(out["abs"][int(np.argmin(np.abs(out["t_us"] - p["time_us"])))] - p["height"]) < 1e-12
        for p in peaks)
    ok = (len(peaks) == 2 and edges_hit == [t_a, t_b] and max(near) <= 0.5
          and d["contrast"] > 3 and consistent and timings["fig5a"] < 5)
    criterion(5, ok, f"{len(peaks)} peaks at {[round(p['time_us'], 3) for p in peaks]} us "
                     f"(edges {t_a:g}, {t_b:g}), contrast {d['contrast']:.3f} (> 3), "
                     f"runtime {timings['fig5a']:.2f} s (< 5 s)")


def test_criterion_6_detuning(outputs, criterion):
    root, _ = outputs
    sweep = read_numeric_csv(root / "fig5b" / "sweep_offset.csv")
    c = dict(zip(sweep["param"], sweep["contrast"]))
    criterion(6, c[-20.0] < 1.2 and c[0.0] > 3,
              f"contrast {c[-20.0]:.4f} at -20 MHz (< 1.2), {c[0.0]:.3f} at 0 MHz (> 3)")


def test_criterion_7_edge_steepness(outputs, criterion):
    root, _ = outputs
    ks = read_numeric_csv(root / "fig7" / "sweep_k.csv")
    frac = read_numeric_csv(root / "fig7" / "spectral_fraction.csv")
    k_ok = list(ks["param"]) == [0.1, 1.0, 10.0, 100.0] and bool(np.all(np.diff(ks["contrast"]) >= 0))
    f_ok = list(frac["delta_t_us"]) == [1, 2, 3, 4, 5, 6] and bool(np.all(np.diff(frac["fraction_above_cutoff"]) < 0))
    criterion(7, k_ok and f_ok,
              f"contrast vs k {np.round(ks['contrast'], 4).tolist()} nondecreasing; "
              f"spectral fraction above 1 MHz {np.round(frac['fraction_above_cutoff'], 4).tolist()} "
              f"strictly decreasing")


def _retrieval_energy_from_csv(path):
    """Retrieval energy on the common (unnormalized) amplitude scale."""
    meta = read_csv(path)[0]
    data = read_numeric_csv(path)
    data["abs"] = data["abs"] * meta["joint_scale"]
    t = data["t_us"]
    sel = data["channel"] == "retrieval"
    dt = t[1] - t[0]
    return float(np.sum(data["abs"][sel] ** 2) * dt), data


def test_criterion_8_storage(outputs, criterion):
    root, _ = outputs
    m = manifest(root, "fig6b")
    e = {c: _retrieval_energy_from_csv(root / "fig6b" / f"storage_{c}.csv")[0]
         for c in ("case1", "case2", "case3")}
    ratio_ok = e["case1"] > 10 * e["case3"] and e["case2"] > 10 * e["case3"]

    # decay over one lifetime, from the exported gap-dependence table
    gaps = read_numeric_csv(root / "fig6b" / "gap_dependence.csv")
    tau = m["parameters"]["storage.tau_s_us"]
    slope = np.polyfit(gaps["gap_us"], np.log(gaps["retrieval_energy"]), 1)[0]
    decay = math.exp(slope * tau)
    decay_ok = abs(decay / math.exp(-2) - 1) <= 0.01

    # suppressed back-peak energy: the reference channel inside the off-gap
    _, data = _retrieval_energy_from_csv(root / "fig6b" / "storage_case1.csv")
    ref = data["channel"] == "reference"
    t = data["t_us"][ref]
    t_off, t_on = m["parameters"]["storage.t_off_us"], m["parameters"]["storage.t_on_us"]
    gap = (t >= t_off - 1e-9) & (t < t_on - 1e-9)
    suppressed = float(np.sum(data["abs"][ref][gap] ** 2) * (t[1] - t[0]))
    visible = e["case1"] > 0.05 * suppressed
    criterion(8, ratio_ok and decay_ok and visible,
              f"case1/case3 = {e['case1'] / e['case3']:.3g}, case2/case3 = {e['case2'] / e['case3']:.3g} "
              f"(> 10); decay per tau_s = {decay:.5f} (e^-2 = {math.exp(-2):.5f}, 1%); "
              f"{t_on - t_off:g} us gap retrieves {e['case1'] / suppressed:.3f} of suppressed (> 0.05)")


def test_criterion_9_determinism(outputs, tmp_path, criterion):
    root, _ = outputs
    mismatched = []
    for name in PRESETS:
        run_preset(name, tmp_path, FORMATS, threads=4)
        first = {p.name: p.read_bytes() for p in (root / name).glob("*.csv")}
        second = {p.name: p.read_bytes() for p in (tmp_path / name).glob("*.csv")}
        if not first or first != second:
            mismatched.append(name)
    criterion(9, not mismatched,
              f"{len(PRESETS)} presets, threads 1 vs 4: "
              + ("all CSVs byte-identical" if not mismatched else f"differences in {mismatched}"))
