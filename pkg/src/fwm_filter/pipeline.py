"""Pulse filtering chain, side-peak detection and parameter sweeps.

A probe envelope is transformed, multiplied bin by bin with the combined
FWM/absorption filter and transformed back. The absorption notch removes
the slowly varying body of the pulse while the broad FWM band passes the
high-frequency content of steep edges, which shows up as side peaks.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .atom_model import AtomScheme, DriveFields
from .errors import (
    BoundaryEnergyError,
    FWMError,
    GridMismatch,
    SweepError,
    WindowOutsideGrid,
)
from .pulses import (
    Orientation,
    PulseEnvelope,
    TimeGrid,
    forward_transform,
    half_gaussian_pulse,
    inverse_transform,
    square_pulse,
)
from .spectra import (
    FilterParams,
    SpectralResponse,
    SweepMode,
    chi3_spectrum,
    combined_filter,
)

log = logging.getLogger(__name__)

CONTRAST_CAP = 1e12
DEFAULT_WINDOW_US = 0.5
BOUNDARY_GUARD_US = 1.0
BOUNDARY_ENERGY_TOL = 1e-6


# ----------------------------------------------------------------------------
# Core chain
# ----------------------------------------------------------------------------

def generate_signal(probe: PulseEnvelope, filt: SpectralResponse,
                    normalize: bool = True) -> PulseEnvelope:
    """Filter ``probe`` by per-bin multiplication in the frequency domain.

    This is a circular convolution of the probe with the impulse response
    of ``filt``. The result is rescaled to unit peak magnitude unless
    ``normalize`` is false; an all-zero result is returned as is.
    """
    spec = forward_transform(probe)
    if spec.freq_grid.shape != filt.freq_grid.shape or not np.allclose(
        spec.freq_grid, filt.freq_grid, rtol=1e-9, atol=1e-9 * abs(spec.spacing)
    ):
        raise GridMismatch("filter grid does not match the probe's transform grid")
    out = inverse_transform(replace(spec, amplitude=spec.amplitude * filt.amplitude))
    if normalize:
        peak = float(np.max(out.magnitude))
        if peak > 0:
            out = out.scaled(1.0 / peak)
    return out


def check_boundary_energy(pulse: PulseEnvelope, guard_us: float = BOUNDARY_GUARD_US,
                          tol: float = BOUNDARY_ENERGY_TOL) -> float:
    """Fraction of energy within ``guard_us`` of either grid end.

    Raises ``BoundaryEnergyError`` when it reaches ``tol``, because the
    circular convolution would then wrap signal around the grid.
    """
    power = pulse.magnitude ** 2
    total = float(np.sum(power))
    if total == 0:
        return 0.0
    m = max(1, int(round(guard_us / pulse.grid.dt)))
    frac = float((np.sum(power[:m]) + np.sum(power[-m:])) / total)
    if frac >= tol:
        raise BoundaryEnergyError(
            f"{frac:.2e} of the signal energy lies within {guard_us} us of the grid ends"
        )
    return frac


# ----------------------------------------------------------------------------
# Side peaks
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SidePeak:
    time: float
    height: float
    edge: str


@dataclass(frozen=True)
class SidePeakReport:
    peaks: list[SidePeak]
    plateau_level: float
    contrast: float

    def peak(self, edge: str) -> SidePeak:
        for p in self.peaks:
            if p.edge == edge:
                return p
        raise KeyError(edge)


def _window(grid: TimeGrid, t0: float, t1: float, what: str) -> slice:
    tol = 1e-9 * grid.dt
    if t0 < grid.t_start - tol or t1 > grid.t_end + tol:
        raise WindowOutsideGrid(
            f"{what} [{t0:g}, {t1:g}] us leaves grid [{grid.t_start:g}, {grid.t_end:g}] us"
        )
    return grid.index_range(t0, t1 + 0.5 * grid.dt)


def detect_side_peaks(output: PulseEnvelope, edges: tuple[float, float],
                      window: float = DEFAULT_WINDOW_US,
                      plateau_region: tuple[float, float] | None = None) -> SidePeakReport:
    """Locate the edge peaks of a filtered trace.

    Parameters
    ----------
    edges : (float, float)
        Rising and falling edge times of the input, us.
    window : float
        Half-width of the search window around each edge, us.
    plateau_region : (float, float), optional
        Interval whose median magnitude defines the plateau level. Defaults
        to the central half between the two edges.
    """
    grid = output.grid
    mag = output.magnitude
    t = grid.times
    rising, falling = edges
    if plateau_region is None:
        quarter = 0.25 * (falling - rising)
        plateau_region = (rising + quarter, falling - quarter)
    peaks = []
    for label, te in (("rising", rising), ("falling", falling)):
        sl = _window(grid, te - window, te + window, f"{label}-edge window")
        i = sl.start + int(np.argmax(mag[sl]))
        peaks.append(SidePeak(float(t[i]), float(mag[i]), label))
    sl = _window(grid, plateau_region[0], plateau_region[1], "plateau region")
    if sl.stop <= sl.start:
        raise ValueError("plateau region contains no samples")
    plateau = float(np.median(mag[sl]))
    top = max(p.height for p in peaks)
    contrast = min(top / plateau, CONTRAST_CAP) if plateau > 0 else CONTRAST_CAP
    return SidePeakReport(peaks, plateau, contrast)


# ----------------------------------------------------------------------------
# Shared setup for presets and sweeps
# ----------------------------------------------------------------------------

@dataclass
class PipelineSetup:
    """Everything needed to push probe pulses through the atomic filter.

    The FWM spectrum on the probe's transform grid is computed on first use
    and cached; changing the absorption line only recomputes the cheap
    product.
    """

    scheme: AtomScheme
    drives: DriveFields
    filter: FilterParams
    grid: TimeGrid = field(default_factory=TimeGrid)
    mode: SweepMode = SweepMode.FIXED_PROBE
    t_a: float = 15.0
    t_b: float = 25.0
    k: float = 100.0
    t_cut: float = 15.0
    delta_t: float = 3.0
    orientation: Orientation = Orientation.SHARP_RISE
    window: float = DEFAULT_WINDOW_US
    threads: int = 1
    _chi3: SpectralResponse | None = field(default=None, init=False, repr=False, compare=False)

    def chi3(self) -> SpectralResponse:
        if self._chi3 is None:
            log.debug("computing FWM response on %d bins", self.grid.n)
            self._chi3 = chi3_spectrum(self.scheme, self.drives, self.mode,
                                       self.grid.frequencies(), threads=self.threads)
        return self._chi3

    def combined(self, params: FilterParams | None = None) -> SpectralResponse:
        return combined_filter(self.chi3(), params or self.filter)


@dataclass(frozen=True)
class ChainResult:
    probe: PulseEnvelope
    filter: SpectralResponse
    output: PulseEnvelope
    report: SidePeakReport


def half_gaussian_edges(t_cut: float, delta_t: float, orientation: Orientation):
    """Edge times and plateau interval used for half-Gaussian pulses.

    The Gaussian side is represented by its steepest point, one standard
    deviation from the cut; the plateau is the central half in between.
    """
    if Orientation(orientation) is Orientation.SHARP_RISE:
        rising, falling = t_cut, t_cut + delta_t
    else:
        rising, falling = t_cut - delta_t, t_cut
    q = 0.25 * delta_t
    return (rising, falling), (rising + q, falling - q)


def run_chain(probe: PulseEnvelope, filt: SpectralResponse, edges, plateau,
              window: float = DEFAULT_WINDOW_US, normalize: bool = True) -> ChainResult:
    out = generate_signal(probe, filt, normalize=normalize)
    check_boundary_energy(probe)
    check_boundary_energy(out)
    report = detect_side_peaks(out, edges, window, plateau)
    return ChainResult(probe, filt, out, report)


def run_square(setup: PipelineSetup, k: float | None = None,
               params: FilterParams | None = None, normalize: bool = True) -> ChainResult:
    probe = square_pulse(setup.t_a, setup.t_b, setup.k if k is None else k, setup.grid)
    return run_chain(probe, setup.combined(params), (setup.t_a, setup.t_b), None,
                     setup.window, normalize)


def run_half_gaussian(setup: PipelineSetup, delta_t: float | None = None,
                      orientation: Orientation | None = None, t_cut: float | None = None,
                      params: FilterParams | None = None,
                      normalize: bool = True) -> ChainResult:
    delta_t = setup.delta_t if delta_t is None else delta_t
    orientation = setup.orientation if orientation is None else Orientation(orientation)
    t_cut = setup.t_cut if t_cut is None else t_cut
    probe = half_gaussian_pulse(t_cut, delta_t, orientation, setup.grid)
    edges, plateau = half_gaussian_edges(t_cut, delta_t, orientation)
    return run_chain(probe, setup.combined(params), edges, plateau, setup.window, normalize)


# ----------------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    param: float
    peak_rising: float
    peak_falling: float
    contrast: float
    energy_fraction: float

    @classmethod
    def from_chain(cls, param: float, res: ChainResult) -> "SweepRow":
        e_in = res.probe.energy()
        return cls(
            float(param),
            res.report.peak("rising").height,
            res.report.peak("falling").height,
            res.report.contrast,
            res.output.energy() / e_in if e_in > 0 else 0.0,
        )


@dataclass(frozen=True)
class SweepResult:
    """Sweep table; peak heights and energies are taken before normalization."""

    name: str
    rows: list[SweepRow]

    COLUMNS = ("param", "peak_rising", "peak_falling", "contrast", "energy_fraction")

    def __post_init__(self):
        params = [r.param for r in self.rows]
        if params != sorted(params):
            raise ValueError("sweep rows must be sorted by parameter")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def as_array(self) -> np.ndarray:
        return np.array([[getattr(r, c) for c in self.COLUMNS] for r in self.rows], dtype=float)


def _sweep(name: str, values: Iterable[float], row: Callable[[float], SweepRow],
           threads: int = 1) -> SweepResult:
    values = sorted(float(v) for v in values)
    if not values:
        raise ValueError("sweep needs at least one parameter value")
    if not all(math.isfinite(v) for v in values):
        raise ValueError("sweep parameters must be finite")
    rows: list[SweepRow] = []

    def guarded(v):
        try:
            return row(v)
        except FWMError as exc:
            return exc

    if threads > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(values))) as pool:
            results = list(pool.map(guarded, values))
    else:
        results = []
        for v in values:
            results.append(guarded(v))
            if isinstance(results[-1], Exception):
                break
    for v, res in zip(values, results):
        if isinstance(res, Exception):
            raise SweepError(v, res, SweepResult(name, rows)) from res
        rows.append(res)
    return SweepResult(name, rows)


def sweep_pulse_width(delta_t_values, setup: PipelineSetup,
                      orientation: Orientation | None = None) -> SweepResult:
    """Half-Gaussian probes of several widths through the same filter."""
    if any(not v > 0 for v in delta_t_values):
        raise ValueError("delta_t values must be positive")
    setup.chi3()

    def row(dt):
        return SweepRow.from_chain(dt, run_half_gaussian(setup, dt, orientation, normalize=False))

    return _sweep("delta_t_us", delta_t_values, row, setup.threads)


def sweep_detuning(offsets, setup: PipelineSetup) -> SweepResult:
    """Square probe through filters whose absorption line is displaced."""
    setup.chi3()

    def row(off):
        params = replace(setup.filter, center_offset=off)
        return SweepRow.from_chain(off, run_square(setup, params=params, normalize=False))

    return _sweep("center_offset_mhz", offsets, row, setup.threads)


def sweep_edge_steepness(k_values, setup: PipelineSetup) -> SweepResult:
    """Square probe with increasingly steep edges."""
    if any(not v > 0 for v in k_values):
        raise ValueError("k values must be positive")
    setup.chi3()

    def row(k):
        return SweepRow.from_chain(k, run_square(setup, k=k, normalize=False))

    return _sweep("k_per_us2", k_values, row, setup.threads)
