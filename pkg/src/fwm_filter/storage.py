"""Phenomenological write/read model for the backward side peak.

When coupling and pump are switched off just before the falling edge, the
signal that would have been emitted during a short write window is credited
to a ground-state spin wave. After the gap the fields return and the spin
wave is read out as a one-sided exponential pulse. The spin wave decays as
``exp(-gap / tau_s)``; retrieval energy therefore falls by ``e**-2`` per
``tau_s`` of extra storage.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import GapOutsidePulse, NoOffGap, WindowOutsideGrid
from .pipeline import generate_signal
from .pulses import PulseEnvelope, TimeGrid
from .spectra import SpectralResponse

CHANNELS = ("leak", "retrieval", "reference")

Interval = tuple[float, float]


def _check_intervals(name: str, intervals) -> tuple[Interval, ...]:
    out = tuple((float(a), float(b)) for a, b in intervals)
    prev_end = -math.inf
    for a, b in out:
        if not a < b:
            raise ValueError(f"{name}: interval ({a}, {b}) is empty or reversed")
        if a < prev_end:
            raise ValueError(f"{name}: intervals overlap or are not ascending")
        prev_end = b
    return out


@dataclass(frozen=True)
class TimingSequence:
    """On-intervals (us) of the coupling, pump and probe fields."""

    coupling: tuple[Interval, ...]
    pump: tuple[Interval, ...]
    probe: tuple[Interval, ...]

    def __post_init__(self):
        for name in ("coupling", "pump", "probe"):
            object.__setattr__(self, name, _check_intervals(name, getattr(self, name)))

    @classmethod
    def gated(cls, t_off: float, t_on: float, grid: TimeGrid) -> "TimingSequence":
        """Coupling and pump switched off together over ``[t_off, t_on)``."""
        gate = ((grid.t_start, t_off), (t_on, grid.t_end))
        return cls(coupling=gate, pump=gate, probe=((grid.t_start, grid.t_end),))

    def check_inside(self, grid: TimeGrid) -> None:
        tol = 1e-9 * grid.dt
        for name in ("coupling", "pump", "probe"):
            for a, b in getattr(self, name):
                if a < grid.t_start - tol or b > grid.t_end + tol:
                    raise WindowOutsideGrid(f"{name} interval ({a}, {b}) leaves the grid")

    def off_gap(self) -> Interval:
        """The single interval during which the coupling field is off."""
        on = self.coupling
        gaps = [(on[i][1], on[i + 1][0]) for i in range(len(on) - 1) if on[i + 1][0] > on[i][1]]
        if len(gaps) != 1:
            raise NoOffGap(f"coupling channel has {len(gaps)} off-gaps, expected exactly one")
        return gaps[0]


@dataclass(frozen=True)
class StorageParams:
    """Memory parameters.

    Parameters
    ----------
    eta : float
        Write-read efficiency in (0, 1]; zero disables the memory.
    tau_s : float
        Spin-wave lifetime, us.
    write_window : float
        Time after shutoff over which the suppressed signal is stored, us.
    readout_rate : float
        Decay rate of the exponential readout pulse, 1/us.
    """

    eta: float = 0.5
    tau_s: float = 50.0
    write_window: float = 1.0
    readout_rate: float = 5.0

    def __post_init__(self):
        for name in ("eta", "tau_s", "write_window", "readout_rate"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.tau_s <= 0 or self.write_window <= 0 or self.readout_rate <= 0:
            raise ValueError("tau_s, write_window and readout_rate must be positive")


@dataclass(frozen=True)
class StorageTrace:
    """Leak, retrieval and no-storage reference on a common grid.

    Arrays are kept on the scale of the filtered probe; ``scale`` is the
    joint maximum used when the channels are reported normalized.
    """

    grid: TimeGrid
    leak: np.ndarray
    retrieval: np.ndarray
    reference: np.ndarray
    gap: Interval
    spin_wave: float
    scale: float

    def channel(self, name: str, normalized: bool = True) -> PulseEnvelope:
        if name not in CHANNELS:
            raise KeyError(name)
        amp = getattr(self, name)
        if normalized and self.scale > 0:
            amp = amp / self.scale
        return PulseEnvelope(self.grid, amp)

    def composite(self, normalized: bool = True) -> PulseEnvelope:
        amp = self.leak + self.retrieval
        if normalized and self.scale > 0:
            amp = amp / self.scale
        return PulseEnvelope(self.grid, amp)

    def suppressed_energy(self) -> float:
        """Energy the reference signal carries inside the off-gap."""
        sl = self.grid.index_range(*self.gap)
        return float(np.sum(np.abs(self.reference[sl]) ** 2) * self.grid.dt)

    def retrieved_energy(self) -> float:
        return float(np.sum(np.abs(self.retrieval) ** 2) * self.grid.dt)


def simulate_storage(probe: PulseEnvelope, timing: TimingSequence, params: StorageParams,
                     filt: SpectralResponse) -> StorageTrace:
    """Gate the generated signal and replay the stored part after the gap.

    The generated signal is taken before normalization, so traces obtained
    with the same filter share one amplitude scale and can be compared.
    """
    grid = probe.grid
    timing.check_inside(grid)
    t_off, t_on = timing.off_gap()
    if t_off + params.write_window > grid.t_end + 1e-9 * grid.dt:
        raise WindowOutsideGrid("write window extends past the grid")

    s = generate_signal(probe, filt, normalize=False).amplitude
    t = grid.times
    gap = grid.index_range(t_off, t_on)
    leak = s.copy()
    leak[gap] = 0.0

    write = grid.index_range(t_off, t_off + params.write_window)
    mag = np.abs(s)
    stored = float(np.sum(mag[write]) * grid.dt)
    peak = float(np.max(mag, initial=0.0))
    if peak == 0 or float(np.max(mag[write], initial=0.0)) < 1e-6 * peak:
        warnings.warn(
            f"off-gap at {t_off:g} us misses the generated signal; nothing is stored",
            GapOutsidePulse, stacklevel=2,
        )
    spin_wave = stored * math.exp(-(t_on - t_off) / params.tau_s)

    retrieval = np.zeros(grid.n, complex)
    after = slice(gap.stop, grid.n)
    retrieval[after] = (params.eta * spin_wave * params.readout_rate
                        * np.exp(-params.readout_rate * (t[after] - t_on)))
    scale = float(max(np.max(np.abs(leak + retrieval)), peak))
    return StorageTrace(grid, leak, retrieval, s, (t_off, t_on), spin_wave, scale)


def retrieval_energy(trace: PulseEnvelope, window: Interval) -> float:
    """Sum of ``|amplitude|**2 dt`` over samples with ``window[0] <= t < window[1]``."""
    grid = trace.grid
    t0, t1 = window
    tol = 1e-9 * grid.dt
    if t0 < grid.t_start - tol or t1 > grid.t_start + grid.span + tol or t1 < t0:
        raise WindowOutsideGrid(f"window [{t0:g}, {t1:g}) us leaves the grid")
    sl = grid.index_range(t0, t1)
    return float(np.sum(np.abs(trace.amplitude[sl]) ** 2) * grid.dt)
