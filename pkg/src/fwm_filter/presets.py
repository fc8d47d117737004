"""Figure presets: named configurations and the routines that run them.

Each routine turns a :class:`SimulationConfig` into a :class:`Report`
holding spectra, pulses, sweep tables, storage traces, derived numbers and
plot panels. :func:`write_report` serializes a report; on any failure the
files already written are removed again.
"""
from __future__ import annotations

import logging
import math
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import io
from .config import FORMATS, SimulationConfig
from .pipeline import (
    ChainResult,
    SweepResult,
    run_chain,
    run_square,
    sweep_detuning,
    sweep_edge_steepness,
    sweep_pulse_width,
)
from .plotting import Panel, render
from .pulses import (
    Orientation,
    PulseEnvelope,
    forward_transform,
    half_gaussian_pulse,
    high_frequency_fraction,
    square_pulse,
)
from .spectra import (
    SpectralResponse,
    SweepMode,
    absorption_dip,
    bandwidth_fwhm,
    calibrate_coupling,
    chi3_spectrum,
    normalized,
    transmission_spectrum,
)
from .pipeline import half_gaussian_edges
from .storage import StorageTrace, simulate_storage

log = logging.getLogger(__name__)

CONVENTIONS = {
    "units": "frequencies in MHz, times in us, amplitudes in normalized units",
    "fwm_response": "R = [rho_32(omega_p + omega_pr) - rho_32(omega_p - omega_pr)] / (2 omega_pr)",
    "transform": "X = fftshift(fft(x)) / sqrt(n); bins ascend from -1/(2 dt); "
                 "baseband frequency is the signal detuning delta_2",
    "dispersion_phase": "off: t = exp(-alpha / (1 + x^2)); lorentzian: "
                        "t = exp(-alpha / (1 + i x)); x = (delta_2 - center_offset) / gamma",
    "half_gaussian": "delta_t is the Gaussian standard deviation",
}

ASSUMPTIONS = [
    "square probe duration set by pulse.t_a_us and pulse.t_b_us (10 us by default)",
    "storage gate: coupling and pump switched off together; probe left on",
]

# overrides applied on top of the calibrated defaults
PRESETS: dict[str, dict] = {
    "fig2a": {"filter": {"alpha": 1.0}},
    "fig2b": {"filter": {"alpha": 1.0}, "spectrum": {"mode": SweepMode.TWO_PHOTON_LOCKED.value}},
    "fig3": {},
    "fig4": {"filter": {"alpha": 0.01}},
    "fig5a": {},
    "fig5b": {},
    "fig6a": {},
    "fig6b": {},
    "fig7": {},
    "calibrate": {"filter": {"alpha": 1.0}},
}


def preset_config(name: str) -> SimulationConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return SimulationConfig().with_values(run={"figure": name}, **PRESETS[name])


@dataclass
class Report:
    name: str
    cfg: SimulationConfig
    derived: dict = field(default_factory=dict)
    spectra: dict[str, SpectralResponse] = field(default_factory=dict)
    pulses: dict[str, PulseEnvelope] = field(default_factory=dict)
    sweeps: dict[str, SweepResult] = field(default_factory=dict)
    storage: dict[str, StorageTrace] = field(default_factory=dict)
    tables: dict[str, tuple[tuple[str, ...], list]] = field(default_factory=dict)
    panels: dict[str, Panel] = field(default_factory=dict)
    messages: list[str] = field(default_factory=list)


def _tag(v: float) -> str:
    return f"{v:g}".replace("-", "m").replace(".", "p")


def _peaks(res: ChainResult) -> dict:
    r = res.report
    return {
        "peaks": [{"edge": p.edge, "time_us": p.time, "height": p.height} for p in r.peaks],
        "plateau_level": r.plateau_level,
        "contrast": r.contrast,
    }


def _strictly_decreasing(values) -> bool:
    return bool(np.all(np.diff(np.asarray(values, dtype=float)) < 0))


def _nondecreasing(values) -> bool:
    return bool(np.all(np.diff(np.asarray(values, dtype=float)) >= 0))


# ----------------------------------------------------------------------------
# Figure routines
# ----------------------------------------------------------------------------

def _other(mode: SweepMode) -> SweepMode:
    return SweepMode.TWO_PHOTON_LOCKED if mode is SweepMode.FIXED_PROBE else SweepMode.FIXED_PROBE


def spectra_figure(cfg: SimulationConfig, rep: Report, threads: int) -> None:
    scheme, drives = cfg.scheme(), cfg.drive_fields()
    grid = cfg.spectrum_grid()
    mode = SweepMode(cfg.spectrum.mode)
    fp = cfg.filter_params()
    main = chi3_spectrum(scheme, drives, mode, grid, threads=threads)
    other = chi3_spectrum(scheme, drives, _other(mode), grid, threads=threads)
    trans = transmission_spectrum(grid, fp)
    dip = absorption_dip(grid, fp)

    rep.spectra[f"chi3_{mode.value}"] = main
    rep.spectra[f"chi3_{_other(mode).value}"] = other
    rep.spectra["transmission"] = trans
    rep.derived.update({
        "mode": mode.value,
        "fwhm_mhz": bandwidth_fwhm(main),
        f"fwhm_{_other(mode).value}_mhz": bandwidth_fwhm(other),
        "dip_fwhm_mhz": bandwidth_fwhm(dip),
        "transmission_at_center": abs(trans.amplitude[np.argmin(np.abs(grid - fp.center_offset))]),
    })
    panel = Panel("signal detuning (MHz)", "normalized amplitude",
                  title=f"FWM response ({mode.value}) and transmission")
    panel.add(grid, normalized(main).magnitude, f"|chi3| {mode.value}", "tab:red")
    panel.add(grid, normalized(other).magnitude, f"|chi3| {_other(mode).value}", "tab:orange", "--")
    panel.add(grid, trans.magnitude, f"|t|, alpha = {fp.alpha:g}", "tab:blue")
    rep.panels["spectra"] = panel


def chain_figure(cfg: SimulationConfig, rep: Report, threads: int) -> None:
    setup = cfg.pipeline(threads)
    res = run_square(setup)
    probe_spec = forward_transform(res.probe)
    filtered = replace(probe_spec, amplitude=probe_spec.amplitude * res.filter.amplitude)
    rep.pulses["probe"] = res.probe
    rep.spectra["probe_spectrum"] = probe_spec
    rep.spectra["filter"] = res.filter
    rep.spectra["filtered_spectrum"] = filtered
    rep.pulses["output"] = res.output
    rep.derived.update(_peaks(res))
    rep.derived["filter_fwhm_chi3_mhz"] = bandwidth_fwhm(setup.chi3())

    f = probe_spec.freq_grid
    rep.panels["a_probe"] = Panel("time (us)", "|E_probe|", title="input probe").add(
        res.probe.times, res.probe.magnitude, color="tab:blue")
    rep.panels["b_probe_spectrum"] = Panel("detuning (MHz)", "|spectrum|", title="probe spectrum",
                                           xlim=(-2, 2)).add(f, probe_spec.magnitude, color="tab:blue")
    rep.panels["c_filter"] = Panel("detuning (MHz)", "|filter|", title="combined filter").add(
        f, res.filter.magnitude, color="tab:red")
    rep.panels["d_output"] = Panel("time (us)", "|E_signal|", title="generated signal").add(
        res.output.times, res.output.magnitude, color="tab:red")


def _pulse_width_tables(cfg, rep, setup):
    sweep = sweep_pulse_width(cfg.sweep.delta_t_us, setup)
    rep.sweeps["sweep_delta_t"] = sweep
    orientation = setup.orientation
    cutoff = cfg.sweep.cutoff_mhz
    fractions = []
    panel = Panel("time (us)", "|E_signal| (input units)",
                  title=f"half-Gaussian ({orientation.value}) outputs")
    for row in sweep.rows:
        probe = half_gaussian_pulse(setup.t_cut, row.param, orientation, setup.grid)
        fractions.append(high_frequency_fraction(probe, cutoff))
        edges, plateau = half_gaussian_edges(setup.t_cut, row.param, orientation)
        res = run_chain(probe, setup.combined(), edges, plateau, setup.window, normalize=False)
        rep.pulses[f"output_dt_{_tag(row.param)}us"] = res.output
        panel.add(res.output.times, res.output.magnitude, f"dt = {row.param:g} us")
    rep.tables["spectral_fraction"] = (
        ("delta_t_us", "fraction_above_cutoff"),
        [[r.param, fr] for r, fr in zip(sweep.rows, fractions)],
    )
    rep.derived.update({
        "cutoff_mhz": cutoff,
        "delta_t_us": list(sweep.column("param")),
        "energy_fraction": list(sweep.column("energy_fraction")),
        "peak_rising": list(sweep.column("peak_rising")),
        "peak_falling": list(sweep.column("peak_falling")),
        "spectral_fraction_above_cutoff": fractions,
        "spectral_fraction_strictly_decreasing": _strictly_decreasing(fractions),
        "energy_fraction_strictly_decreasing": _strictly_decreasing(sweep.column("energy_fraction")),
    })
    rep.panels["outputs"] = panel
    rep.panels["sweep"] = (
        Panel("delta_t (us)", "value", title="pulse-width sweep")
        .add(sweep.column("param"), sweep.column("energy_fraction") / sweep.column("energy_fraction")[0],
             "energy fraction (rel.)", "tab:red", "o-")
        .add(sweep.column("param"), np.array(fractions) / fractions[0],
             f"spectral fraction > {cutoff:g} MHz (rel.)", "tab:blue", "s-")
    )


def pulse_width_figure(cfg: SimulationConfig, rep: Report, threads: int) -> None:
    _pulse_width_tables(cfg, rep, cfg.pipeline(threads))


def steepness_figure(cfg: SimulationConfig, rep: Report, threads: int) -> None:
    setup = cfg.pipeline(threads)
    _pulse_width_tables(cfg, rep, setup)
    ks = sweep_edge_steepness(cfg.sweep.k_values, setup)
    rep.sweeps["sweep_k"] = ks
    rep.derived.update({
        "k_values": list(ks.column("param")),
        "contrast_vs_k": list(ks.column("contrast")),
        "contrast_nondecreasing_in_k": _nondecreasing(ks.column("contrast")),
    })
    rep.panels["contrast_vs_k"] = Panel("k (1/us^2)", "contrast", title="edge steepness",
                                        logx=True).add(ks.column("param"), ks.column("contrast"),
                                                       color="tab:red", style="o-")


def _storage_summary(trace: StorageTrace) -> dict:
    e_ret = trace.retrieved_energy()
    e_sup = trace.suppressed_energy()
    return {
        "retrieval_energy": e_ret,
        "suppressed_energy": e_sup,
        "retrieval_over_suppressed": e_ret / e_sup if e_sup > 0 else math.inf,
        "spin_wave": trace.spin_wave,
        "gap_us": [trace.gap[0], trace.gap[1]],
    }


def _storage_panel(title: str, trace: StorageTrace) -> Panel:
    t = trace.grid.times
    return (Panel("time (us)", "normalized |E_signal|", title=title)
            .add(t, trace.channel("reference").magnitude, "no storage", "0.6", "--")
            .add(t, trace.composite().magnitude, "with storage", "tab:red"))


def side_peak_figure(cfg: SimulationConfig, rep: Report, threads: int) -> None:
    setup = cfg.pipeline(threads)
    res = run_square(setup)
    rep.pulses["probe"] = res.probe
    rep.pulses["output"] = res.output
    rep.derived.update(_peaks(res))
    trace = simulate_storage(res.probe, cfg.timing(), cfg.storage_params(), res.filter)
    rep.storage["storage"] = trace
    rep.derived["storage"] = _storage_summary(trace)
    rep.panels["output"] = (Panel("time (us)", "normalized amplitude", title="resonant filter")
                            .add(res.probe.times, res.probe.magnitude, "probe", "tab:blue")
                            .add(res.output.times, res.output.magnitude, "signal", "tab:red"))
    rep.panels["storage"] = _storage_panel("storage of the backward side peak", trace)


def detuning_figure(cfg: SimulationConfig, rep: Report, threads: int) -> None:
    setup = cfg.pipeline(threads)
    sweep = sweep_detuning(cfg.sweep.offsets_mhz, setup)
    rep.sweeps["sweep_offset"] = sweep
    panel = Panel("time (us)", "normalized |E_signal|", title="absorption line offset")
    for row in sweep.rows:
        res = run_square(setup, params=replace(setup.filter, center_offset=row.param))
        rep.pulses[f"output_offset_{_tag(row.param)}mhz"] = res.output
        panel.add(res.output.times, res.output.magnitude, f"offset {row.param:g} MHz")
    rep.derived.update({
        "offsets_mhz": list(sweep.column("param")),
        "contrast": list(sweep.column("contrast")),
    })
    rep.panels["outputs"] = panel


def shape_cases(cfg: SimulationConfig, setup) -> dict[str, tuple[PulseEnvelope, tuple, tuple]]:
    """Square, sharp-back and sharp-front half-Gaussian probes in one window."""
    p = cfg.pulse
    g = setup.grid
    dt = p.delta_t_us
    fall_edges, fall_plateau = half_gaussian_edges(p.t_b_us, dt, Orientation.SHARP_FALL)
    rise_edges, rise_plateau = half_gaussian_edges(p.t_a_us, dt, Orientation.SHARP_RISE)
    quarter = 0.25 * (p.t_b_us - p.t_a_us)
    return {
        "case1": (square_pulse(p.t_a_us, p.t_b_us, p.k, g), (p.t_a_us, p.t_b_us),
                  (p.t_a_us + quarter, p.t_b_us - quarter)),
        "case2": (half_gaussian_pulse(p.t_b_us, dt, Orientation.SHARP_FALL, g), fall_edges, fall_plateau),
        "case3": (half_gaussian_pulse(p.t_a_us, dt, Orientation.SHARP_RISE, g), rise_edges, rise_plateau),
    }


def shapes_figure(cfg: SimulationConfig, rep: Report, threads: int) -> None:
    setup = cfg.pipeline(threads)
    filt = setup.combined()
    panel = Panel("time (us)", "|E_signal| (input units)", title="probe shape cases")
    for name, (probe, edges, plateau) in shape_cases(cfg, setup).items():
        res = run_chain(probe, filt, edges, plateau, setup.window, normalize=False)
        rep.pulses[f"probe_{name}"] = probe
        rep.pulses[f"output_{name}"] = res.output
        rep.derived[name] = _peaks(res)
        panel.add(res.output.times, res.output.magnitude, name)
    rep.panels["outputs"] = panel


def storage_figure(cfg: SimulationConfig, rep: Report, threads: int) -> None:
    setup = cfg.pipeline(threads)
    filt = setup.combined()
    params = cfg.storage_params()
    timing = cfg.timing()
    energies = {}
    for name, (probe, _, _) in shape_cases(cfg, setup).items():
        trace = simulate_storage(probe, timing, params, filt)
        rep.storage[f"storage_{name}"] = trace
        rep.derived[name] = _storage_summary(trace)
        energies[name] = trace.retrieved_energy()
        rep.panels[f"storage_{name}"] = _storage_panel(f"storage, {name}", trace)

    e3 = energies["case3"]
    rep.derived["case1_over_case3"] = energies["case1"] / e3 if e3 > 0 else math.inf
    rep.derived["case2_over_case3"] = energies["case2"] / e3 if e3 > 0 else math.inf

    # gap dependence for the square probe
    t_off = cfg.storage.t_off_us
    base_gap = cfg.storage.t_on_us - t_off
    case1 = shape_cases(cfg, setup)["case1"][0]
    rows = []
    for gap in sorted(set(cfg.sweep.gaps_us) | {base_gap}):
        if t_off + gap + params.write_window > setup.grid.t_end:
            log.info("gap %g us does not fit the grid; skipped", gap)
            continue
        tr = simulate_storage(case1, cfg.timing(t_off, t_off + gap), params, filt)
        rows.append([gap, tr.retrieved_energy()])
    rep.tables["gap_dependence"] = (("gap_us", "retrieval_energy"), rows)
    # decay over one lifetime, measured from the log-slope between the
    # shortest gap and the configured one (t_on + tau_s rarely fits the grid)
    g0, e0 = rows[0]
    g1, e1 = next((r for r in rows if r[0] == base_gap), rows[-1])
    if g1 != g0 and e0 > 0 and e1 > 0:
        slope = math.log(e1 / e0) / (g1 - g0)
        rep.derived["decay_ratio_per_tau_s"] = math.exp(slope * params.tau_s)
    else:
        rep.derived["decay_ratio_per_tau_s"] = math.nan
    rep.derived["decay_ratio_expected"] = math.exp(-2.0)
    rep.panels["gap_dependence"] = Panel("storage gap (us)", "retrieval energy",
                                         title="storage time").add(
        [r[0] for r in rows], [r[1] for r in rows], color="tab:red", style="o-")


def calibrate_figure(cfg: SimulationConfig, rep: Report, threads: int) -> None:
    scheme, drives = cfg.scheme(), cfg.drive_fields()
    grid = cfg.spectrum_grid()
    cal = calibrate_coupling(scheme, drives, grid=grid, threads=threads)
    tuned = replace(drives, omega_c=2 * math.pi * cal.omega_c_mhz, delta_c=None, delta_p=None)
    spec = chi3_spectrum(scheme, tuned, SweepMode.FIXED_PROBE, grid, threads=threads)
    dip = absorption_dip(grid, cfg.filter_params())
    rep.spectra["chi3_calibrated"] = spec
    rep.derived.update({
        "omega_c_mhz": cal.omega_c_mhz,
        "omega_p_mhz": cfg.drives.omega_p_mhz,
        "omega_pr_mhz": cfg.drives.omega_pr_mhz,
        "omega_s_mhz": cfg.drives.omega_s_mhz,
        "fwhm_mhz": cal.fwhm_mhz,
        "dip_fwhm_mhz": bandwidth_fwhm(dip),
        "bisection_iterations": cal.iterations,
    })
    rep.messages.append(
        f"calibrated omega_c = 2pi x {cal.omega_c_mhz:.6f} MHz "
        f"(omega_p = 2pi x {cfg.drives.omega_p_mhz:g} MHz, omega_pr = 2pi x "
        f"{cfg.drives.omega_pr_mhz:g} MHz, omega_s = 2pi x {cfg.drives.omega_s_mhz:g} MHz); "
        f"FWHM = {cal.fwhm_mhz:.4f} MHz"
    )
    rep.panels["calibrated"] = (Panel("signal detuning (MHz)", "normalized amplitude",
                                      title="calibrated FWM response")
                                .add(grid, normalized(spec).magnitude, "|chi3|", "tab:red")
                                .add(grid, dip.magnitude, "absorption dip", "tab:blue"))


ROUTINES: dict[str, Callable[[SimulationConfig, Report, int], None]] = {
    "fig2a": spectra_figure,
    "fig2b": spectra_figure,
    "fig3": chain_figure,
    "fig4": pulse_width_figure,
    "fig5a": side_peak_figure,
    "fig5b": detuning_figure,
    "fig6a": shapes_figure,
    "fig6b": storage_figure,
    "fig7": steepness_figure,
    "calibrate": calibrate_figure,
}


def build_report(cfg: SimulationConfig, threads: int = 1) -> Report:
    name = cfg.run.figure
    rep = Report(name, cfg)
    log.info("running %s", name)
    ROUTINES[name](cfg, rep, max(1, int(threads)))
    return rep


# ----------------------------------------------------------------------------
# Output
# ----------------------------------------------------------------------------

def write_report(rep: Report, out_dir, formats=None) -> list[Path]:
    """Write CSVs, a JSON manifest and PNG panels under ``out_dir/<figure>``."""
    formats = tuple(formats or rep.cfg.output.formats)
    target = Path(out_dir) / rep.name
    created_dir = not target.exists()
    written: list[Path] = []
    params = rep.cfg.flat()

    def meta(stem: str, extra: dict | None = None) -> dict:
        m = {"figure": rep.name, "trace": stem}
        m.update(extra or {})
        m.update(params)
        return m

    try:
        target.mkdir(parents=True, exist_ok=True)
        if "csv" in formats:
            for stem, spec in rep.spectra.items():
                written.append(io.write_spectrum(target / f"{stem}.csv", spec, meta(stem)))
            for stem, pulse in rep.pulses.items():
                written.append(io.write_pulse(target / f"{stem}.csv", pulse, meta(stem)))
            for stem, sweep in rep.sweeps.items():
                written.append(io.write_sweep(target / f"{stem}.csv", sweep,
                                              meta(stem, {"param": sweep.name})))
            for stem, trace in rep.storage.items():
                written.append(io.write_storage(target / f"{stem}.csv", trace,
                                                meta(stem, {"joint_scale": trace.scale})))
            for stem, (cols, rows) in rep.tables.items():
                written.append(io.write_csv(target / f"{stem}.csv", cols, rows, meta(stem)))
        if "png" in formats:
            for stem, panel in rep.panels.items():
                written.append(render(target / f"{rep.name}_{stem}.png", [panel]))
        if "json" in formats:
            manifest = {
                "figure": rep.name,
                "parameters": params,
                "derived": rep.derived,
                "conventions": CONVENTIONS,
                "assumptions": ASSUMPTIONS,
                "files": sorted(p.name for p in written) + ["manifest.json"],
            }
            written.append(io.write_json(target / "manifest.json", manifest))
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        if created_dir:
            shutil.rmtree(target, ignore_errors=True)
        raise
    return written


def run_config_object(cfg: SimulationConfig, out_dir, formats=None, threads: int = 1) -> list[Path]:
    rep = build_report(cfg, threads)
    for msg in rep.messages:
        print(msg)
    return write_report(rep, out_dir, formats)


def run_preset(name: str, out_dir, formats=None, threads: int = 1) -> list[Path]:
    return run_config_object(preset_config(name), out_dir, formats, threads)


def run_config(path, out_dir, formats=None, threads: int = 1) -> list[Path]:
    from .config import load_config

    return run_config_object(load_config(path), out_dir, formats, threads)


__all__ = ["FORMATS", "PRESETS", "Report", "build_report", "preset_config", "run_config",
           "run_preset", "write_report"]
