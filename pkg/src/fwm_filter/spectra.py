"""Nonlinear FWM response, linear transmission and the combined spectral filter.

The FWM response is read from the numerically solved steady state. The
pump and probe share the |3>-|4> leg, so the response to the probe is the
derivative of the coupled-transition coherence rho_32 with respect to the
total |3>-|4> Rabi frequency, taken at the pump value by a central
difference of width ``omega_pr``::

    R = [rho_32(omega_p + omega_pr) - rho_32(omega_p - omega_pr)] / (2 omega_pr)

This is the pump-probe grating term of degenerate four-wave mixing: it
vanishes without the coupling leg, vanishes without the pump (rho is even in
the |3>-|4> amplitude), and is linear in the probe. The overall prefactor is
one, so spectra are in arbitrary units.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .atom_model import (
    TWO_PI,
    AtomScheme,
    DriveFields,
    build_liouvillian,
    commutator_superop,
    steady_states,
)
from .errors import EmptySpectrum, NoHalfCrossing, PerturbativeBreakdown

# tolerated change of R when the probe is halved
LINEARITY_TOL = 0.05

# ----------------------------------------------------------------------------
# Calibrated parameter set (fitted so the FixedProbe FWHM is ~10 MHz)
# ----------------------------------------------------------------------------
CALIBRATED_GAMMA_MHZ = 10.0
CALIBRATED_GAMMA_UPPER_MHZ = 16.0
CALIBRATED_B1 = 0.0
CALIBRATED_OMEGA_P_MHZ = 0.5
CALIBRATED_OMEGA_PR_MHZ = 0.025
CALIBRATED_OMEGA_C_MHZ = 2.6833
CALIBRATION_TARGET_MHZ = 10.0


def calibrated_scheme() -> AtomScheme:
    gamma = TWO_PI * CALIBRATED_GAMMA_MHZ
    return AtomScheme(
        gamma=gamma,
        Gamma=TWO_PI * CALIBRATED_GAMMA_UPPER_MHZ,
        gamma_g=1e-3 * gamma,
        gamma_12=1e-3 * gamma,
        b1=CALIBRATED_B1,
    )


def calibrated_drives(omega_c_mhz: float = CALIBRATED_OMEGA_C_MHZ) -> DriveFields:
    return DriveFields(
        omega_c=TWO_PI * omega_c_mhz,
        omega_p=TWO_PI * CALIBRATED_OMEGA_P_MHZ,
        omega_pr=TWO_PI * CALIBRATED_OMEGA_PR_MHZ,
    )


# ----------------------------------------------------------------------------
# Types
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralResponse:
    """Complex amplitude sampled on an ascending uniform detuning grid (MHz).

    ``dt`` and ``t_start`` are only set for spectra obtained from a time
    trace; they let the inverse transform restore the original time grid.
    """

    freq_grid: np.ndarray
    amplitude: np.ndarray
    dt: float | None = None
    t_start: float | None = None

    def __post_init__(self):
        f = np.array(self.freq_grid, dtype=float)
        a = np.array(self.amplitude, dtype=complex)
        if f.ndim != 1 or f.size < 2:
            raise ValueError("frequency grid needs at least two samples")
        if a.shape != f.shape:
            raise ValueError(f"amplitude length {a.size} does not match grid length {f.size}")
        steps = np.diff(f)
        if steps[0] <= 0 or np.max(np.abs(steps - steps[0])) > 1e-9 * abs(steps[0]):
            raise ValueError("frequency grid must be ascending and uniform")
        f.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "freq_grid", f)
        object.__setattr__(self, "amplitude", a)

    @property
    def spacing(self) -> float:
        return float(self.freq_grid[1] - self.freq_grid[0])

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.amplitude)


class Dispersion(str, enum.Enum):
    OFF = "off"
    LORENTZIAN = "lorentzian"


@dataclass(frozen=True)
class FilterParams:
    """Absorption line of the atomic medium.

    Parameters
    ----------
    alpha : float
        Optical depth; the line-center amplitude transmission is ``exp(-alpha)``.
    gamma : float
        Absorption half-linewidth in angular units.
    center_offset : float
        Line center relative to ``delta_2 = 0`` in MHz.
    dispersion : Dispersion
        ``off`` gives the real transmission ``exp(-alpha / (1 + x**2))``;
        ``lorentzian`` gives ``exp(-alpha / (1 + 1j * x))``, whose magnitude is
        identical and whose phase follows the causal Lorentzian line for the
        ``exp(-2j*pi*f*t)`` forward-transform convention.
    """

    alpha: float = 1.0
    gamma: float = TWO_PI * 3.0
    center_offset: float = 0.0
    dispersion: Dispersion = Dispersion.OFF

    def __post_init__(self):
        for name in ("alpha", "gamma", "center_offset"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        object.__setattr__(self, "dispersion", Dispersion(self.dispersion))


class SweepMode(str, enum.Enum):
    FIXED_PROBE = "fixed_probe"
    TWO_PHOTON_LOCKED = "two_photon_locked"


def frequency_grid(start: float, stop: float, points: int) -> np.ndarray:
    return np.linspace(start, stop, int(points))


# ----------------------------------------------------------------------------
# FWM response
# ----------------------------------------------------------------------------

_D2 = commutator_superop(np.diag([0.0, 0.0, -1.0, -1.0]).astype(complex))
_D1 = commutator_superop(np.diag([0.0, 0.0, 0.0, -1.0]).astype(complex))


def liouvillian_stack(scheme: AtomScheme, drives: DriveFields,
                      delta_1: np.ndarray, delta_2: np.ndarray) -> np.ndarray:
    """Liouvillians for many detuning pairs (angular units) at once.

    The generator is affine in the detunings, so the stack is the zero
    detuning generator plus two fixed commutator terms.
    """
    base = build_liouvillian(
        scheme, replace(drives, delta_1=0.0, delta_2=0.0, delta_c=None, delta_p=None)
    ).matrix
    d1 = np.asarray(delta_1, dtype=float)[:, None, None]
    d2 = np.asarray(delta_2, dtype=float)[:, None, None]
    return base + d2 * _D2 + d1 * _D1


def _check_perturbative(scheme: AtomScheme, drives: DriveFields) -> None:
    if abs(drives.omega_s) > 1e-2 * scheme.gamma:
        raise PerturbativeBreakdown(
            f"seed Rabi frequency {abs(drives.omega_s):g} exceeds 1e-2 * gamma"
        )
    if abs(drives.omega_pr) > 0.1 * scheme.gamma:
        raise PerturbativeBreakdown(
            f"probe Rabi frequency {abs(drives.omega_pr):g} exceeds 0.1 * gamma"
        )
    if drives.omega_pr == 0:
        raise ValueError("omega_pr must be nonzero to extract the probe response")


def _response(scheme, drives, d1, d2, omega_pr):
    out = []
    for sign in (1.0, -1.0):
        mats = liouvillian_stack(scheme, replace(drives, omega_pr=sign * omega_pr,
                                                 delta_c=None, delta_p=None), d1, d2)
        out.append(steady_states(mats)[:, 2, 1])
    return (out[0] - out[1]) / (2.0 * omega_pr)


def _chi3_block(scheme, drives, d1_mhz, d2_mhz, check=True):
    d1 = TWO_PI * np.asarray(d1_mhz, dtype=float)
    d2 = TWO_PI * np.asarray(d2_mhz, dtype=float)
    r = _response(scheme, drives, d1, d2, drives.omega_pr)
    if check:
        half = _response(scheme, drives, d1, d2, drives.omega_pr / 2)
        mag = np.abs(r)
        significant = mag > max(1e-14, 1e-9 * float(np.max(mag, initial=0.0)))
        rel = np.zeros_like(mag)
        rel[significant] = np.abs(r - half)[significant] / mag[significant]
        if np.any(rel > LINEARITY_TOL):
            i = int(np.argmax(rel))
            raise PerturbativeBreakdown(
                f"halving omega_pr changed R by {100 * rel[i]:.1f}% "
                f"({r[i]:.6g} vs {half[i]:.6g})",
                full=complex(r[i]), halved=complex(half[i]),
                delta_2=float(np.asarray(d2_mhz)[i]),
            )
    return r


def chi3_point(scheme: AtomScheme, drives: DriveFields, delta_1: float,
               delta_2: float, check: bool = True) -> complex:
    """FWM response at one detuning pair (MHz), normalized units.

    Raises
    ------
    PerturbativeBreakdown
        If the drives leave the perturbative regime or halving the probe
        changes the result by more than 5%.
    """
    _check_perturbative(scheme, drives)
    return complex(_chi3_block(scheme, drives, [delta_1], [delta_2], check)[0])


def chi3_spectrum(scheme: AtomScheme, drives: DriveFields, mode: SweepMode,
                  grid, threads: int = 1, check: bool = True) -> SpectralResponse:
    """Evaluate the FWM response across a uniform ``delta_2`` grid (MHz).

    In ``FIXED_PROBE`` mode ``delta_1 = 0``; in ``TWO_PHOTON_LOCKED`` mode
    ``delta_1 = -delta_2``. Bins are solved in blocks, optionally on several
    threads; results are assembled in grid order.
    """
    _check_perturbative(scheme, drives)
    grid = np.asarray(grid, dtype=float)
    mode = SweepMode(mode)
    d1 = np.zeros_like(grid) if mode is SweepMode.FIXED_PROBE else -grid
    threads = max(1, int(threads))
    blocks = np.array_split(np.arange(grid.size), threads) if threads > 1 else [np.arange(grid.size)]
    blocks = [b for b in blocks if b.size]

    def work(idx):
        return _chi3_block(scheme, drives, d1[idx], grid[idx], check)

    if len(blocks) == 1:
        parts = [work(blocks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            parts = list(pool.map(work, blocks))
    return SpectralResponse(grid, np.concatenate(parts))


# ----------------------------------------------------------------------------
# Linear absorption and the combined filter
# ----------------------------------------------------------------------------

def transmission_amplitude(delta_2, params: FilterParams):
    """Amplitude transmission of the absorption line at ``delta_2`` (MHz)."""
    x = (np.asarray(delta_2, dtype=float) - params.center_offset) / (params.gamma / TWO_PI)
    if params.dispersion is Dispersion.LORENTZIAN:
        t = np.exp(-params.alpha / (1.0 + 1j * x))
    else:
        t = np.exp(-params.alpha / (1.0 + x * x)).astype(complex)
    return complex(t) if np.ndim(t) == 0 else t


def transmission_spectrum(grid, params: FilterParams) -> SpectralResponse:
    grid = np.asarray(grid, dtype=float)
    return SpectralResponse(grid, transmission_amplitude(grid, params))


def absorption_dip(grid, params: FilterParams) -> SpectralResponse:
    """The absorbed fraction ``1 - |t|`` as a spectrum (for width comparisons)."""
    grid = np.asarray(grid, dtype=float)
    return SpectralResponse(grid, 1.0 - np.abs(transmission_amplitude(grid, params)))


def normalized(spec: SpectralResponse) -> SpectralResponse:
    peak = float(np.max(spec.magnitude))
    if not peak > 0:
        raise EmptySpectrum("spectrum is identically zero")
    return replace(spec, amplitude=spec.amplitude / peak)


def combined_filter(chi3: SpectralResponse, params: FilterParams) -> SpectralResponse:
    """FWM gain times absorption, rescaled to unit maximum magnitude."""
    gain = normalized(chi3)
    out = gain.amplitude * transmission_amplitude(chi3.freq_grid, params)
    return normalized(replace(gain, amplitude=out))


# ----------------------------------------------------------------------------
# Bandwidth and calibration
# ----------------------------------------------------------------------------

def bandwidth_fwhm(spec: SpectralResponse) -> float:
    """Full width at half maximum of ``|amplitude|`` in MHz.

    The half-maximum crossings on either side of the global maximum are
    located by linear interpolation between the bracketing bins.
    """
    mag = spec.magnitude
    f = spec.freq_grid
    i = int(np.argmax(mag))
    half = 0.5 * mag[i]
    if not mag[i] > 0:
        raise NoHalfCrossing("spectrum is identically zero")

    below = np.nonzero(mag[:i] < half)[0]
    if below.size == 0:
        raise NoHalfCrossing("no half-maximum crossing below the peak")
    j = below[-1]
    left = f[j] + (half - mag[j]) * (f[j + 1] - f[j]) / (mag[j + 1] - mag[j])

    above = np.nonzero(mag[i + 1:] < half)[0]
    if above.size == 0:
        raise NoHalfCrossing("no half-maximum crossing above the peak")
    j = i + 1 + above[0]
    right = f[j - 1] + (half - mag[j - 1]) * (f[j] - f[j - 1]) / (mag[j] - mag[j - 1])
    return float(right - left)


@dataclass(frozen=True)
class Calibration:
    omega_c_mhz: float
    fwhm_mhz: float
    iterations: int


def calibrate_coupling(scheme: AtomScheme, drives: DriveFields,
                       target_mhz: float = CALIBRATION_TARGET_MHZ,
                       bracket_mhz: tuple[float, float] = (0.5, 4.0),
                       grid=None, tol_mhz: float = 1e-4, threads: int = 1,
                       max_iter: int = 60) -> Calibration:
    """Bisect the coupling Rabi frequency so the FixedProbe FWHM hits a target."""
    if grid is None:
        grid = frequency_grid(-40.0, 40.0, 801)

    def width(omega_c_mhz):
        d = replace(drives, omega_c=TWO_PI * omega_c_mhz)
        spec = chi3_spectrum(scheme, d, SweepMode.FIXED_PROBE, grid, threads=threads)
        return bandwidth_fwhm(spec)

    lo, hi = bracket_mhz
    w_lo, w_hi = width(lo), width(hi)
    if not (w_lo - target_mhz) * (w_hi - target_mhz) <= 0:
        raise ValueError(
            f"target {target_mhz} MHz not bracketed: FWHM spans {w_lo:.3f}..{w_hi:.3f} MHz"
        )
    it = 0
    while hi - lo > tol_mhz and it < max_iter:
        mid = 0.5 * (lo + hi)
        w_mid = width(mid)
        if (w_mid - target_mhz) * (w_lo - target_mhz) <= 0:
            hi = mid
        else:
            lo, w_lo = mid, w_mid
        it += 1
    omega = 0.5 * (lo + hi)
    return Calibration(omega, width(omega), it)
