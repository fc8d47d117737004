"""Pulse envelopes on uniform time grids and unitary discrete Fourier transforms.

Frequency axes are ordinary frequency in MHz with times in us. The forward
transform uses numpy's ``exp(-2j*pi*f*t)`` sign, a ``1/sqrt(n)`` scale and
an ``fftshift`` so bins ascend from ``-1/(2 dt)``; the baseband frequency of
the envelope is read directly as the signal detuning ``delta_2``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import EdgeOutsideGrid, GridMismatch
from .spectra import SpectralResponse


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TimeGrid:
    t_start: float = 0.0
    dt: float = 0.01
    n: int = 4096

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not math.isfinite(self.t_start):
            raise ValueError("t_start must be finite")
        if int(self.n) != self.n or self.n < 8 or not _is_power_of_two(int(self.n)):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n)

    @property
    def span(self) -> float:
        return self.n * self.dt

    @property
    def t_end(self) -> float:
        """Time of the last sample."""
        return self.t_start + (self.n - 1) * self.dt

    def contains(self, t: float) -> bool:
        return self.t_start <= t <= self.t_end

    def index_range(self, t0: float, t1: float) -> slice:
        """Samples with ``t0 <= t < t1`` (to within a small fraction of ``dt``)."""
        i0 = math.ceil((t0 - self.t_start) / self.dt - 1e-9)
        i1 = math.ceil((t1 - self.t_start) / self.dt - 1e-9)
        return slice(max(i0, 0), min(i1, self.n))

    def frequencies(self) -> np.ndarray:
        return np.fft.fftshift(np.fft.fftfreq(self.n, self.dt))


@dataclass(frozen=True)
class PulseEnvelope:
    grid: TimeGrid
    amplitude: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitude, dtype=complex)
        if a.shape != (self.grid.n,):
            raise ValueError(f"amplitude length {a.size} does not match grid n = {self.grid.n}")
        a.setflags(write=False)
        object.__setattr__(self, "amplitude", a)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.amplitude)

    def energy(self) -> float:
        """Integral of ``|a|**2`` over the grid (us, normalized units)."""
        return float(np.sum(np.abs(self.amplitude) ** 2) * self.grid.dt)

    def scaled(self, factor: complex) -> "PulseEnvelope":
        return PulseEnvelope(self.grid, self.amplitude * factor)


class Orientation(str, enum.Enum):
    SHARP_RISE = "sharp_rise"
    SHARP_FALL = "sharp_fall"


def square_pulse(t_a: float, t_b: float, k: float, grid: TimeGrid) -> PulseEnvelope:
    """Flat-top pulse on ``[t_a, t_b]`` with Gaussian edges ``exp(-k (t - t_edge)**2)``.

    Parameters
    ----------
    k : float
        Edge-gradient coefficient in us^-2; larger is steeper.
    """
    if not (grid.contains(t_a) and grid.contains(t_b)):
        raise EdgeOutsideGrid(
            f"edges ({t_a}, {t_b}) us outside grid [{grid.t_start}, {grid.t_end}] us"
        )
    if not t_a < t_b:
        raise ValueError("t_a must be earlier than t_b")
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    t = grid.times
    amp = np.ones(grid.n)
    before = t < t_a
    after = t > t_b
    amp[before] = np.exp(-k * (t[before] - t_a) ** 2)
    amp[after] = np.exp(-k * (t[after] - t_b) ** 2)
    return PulseEnvelope(grid, amp)


def half_gaussian_pulse(t_cut: float, delta_t: float, orientation: Orientation,
                        grid: TimeGrid) -> PulseEnvelope:
    """Gaussian of standard deviation ``delta_t`` cut off sharply at ``t_cut``.

    ``SHARP_RISE`` switches on at ``t_cut`` and decays afterwards;
    ``SHARP_FALL`` is its mirror image and switches off at ``t_cut``.
    """
    if not grid.contains(t_cut):
        raise EdgeOutsideGrid(f"t_cut = {t_cut} us outside grid")
    if not delta_t > 0:
        raise ValueError(f"delta_t must be positive, got {delta_t}")
    orientation = Orientation(orientation)
    t = grid.times
    amp = np.exp(-((t - t_cut) ** 2) / (2.0 * delta_t ** 2))
    if orientation is Orientation.SHARP_RISE:
        amp[t < t_cut] = 0.0
    else:
        amp[t > t_cut] = 0.0
    return PulseEnvelope(grid, amp)


def forward_transform(pulse: PulseEnvelope) -> SpectralResponse:
    g = pulse.grid
    spec = np.fft.fftshift(np.fft.fft(pulse.amplitude)) / math.sqrt(g.n)
    return SpectralResponse(g.frequencies(), spec, dt=g.dt, t_start=g.t_start)


def inverse_transform(spec: SpectralResponse) -> PulseEnvelope:
    n = spec.freq_grid.size
    if not _is_power_of_two(n) or n < 8:
        raise GridMismatch(f"spectrum length {n} is not a power of two >= 8")
    df = spec.spacing
    if not math.isclose(spec.freq_grid[0], -(n // 2) * df, rel_tol=1e-9, abs_tol=1e-12 * df):
        raise GridMismatch("frequency grid is not centred like a transformed time grid")
    dt = spec.dt if spec.dt is not None else 1.0 / (n * df)
    if not math.isclose(dt * n * df, 1.0, rel_tol=1e-9):
        raise GridMismatch(f"frequency spacing {df} MHz is inconsistent with dt = {dt} us")
    t_start = spec.t_start if spec.t_start is not None else 0.0
    amp = np.fft.ifft(np.fft.ifftshift(spec.amplitude)) * math.sqrt(n)
    return PulseEnvelope(TimeGrid(t_start, dt, n), amp)


def high_frequency_fraction(pulse: PulseEnvelope, cutoff_mhz: float) -> float:
    """Share of spectral energy in bins with ``|f| > cutoff_mhz``."""
    spec = forward_transform(pulse)
    power = spec.magnitude ** 2
    total = float(np.sum(power))
    if total == 0:
        return 0.0
    return float(np.sum(power[np.abs(spec.freq_grid) > cutoff_mhz]) / total)
