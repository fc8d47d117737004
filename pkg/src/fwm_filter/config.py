"""Strict sectioned configuration files.

Files are INI style. Frequencies are ordinary MHz and times are us; the
loader converts rates, Rabi frequencies and linewidths to angular units when
building model objects. Every key is optional (missing keys take the
calibrated defaults), but unknown sections or keys are rejected.

Example::

    [run]
    figure = fig3

    [filter]
    alpha = 6.0
    center_offset_mhz = -20
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any

from .atom_model import TWO_PI, AtomScheme, DriveFields
from .errors import ParseError, ValidationError
from .pipeline import PipelineSetup
from .pulses import Orientation, TimeGrid
from .spectra import (
    CALIBRATED_B1,
    CALIBRATED_GAMMA_MHZ,
    CALIBRATED_GAMMA_UPPER_MHZ,
    CALIBRATED_OMEGA_C_MHZ,
    CALIBRATED_OMEGA_P_MHZ,
    CALIBRATED_OMEGA_PR_MHZ,
    Dispersion,
    FilterParams,
    SweepMode,
    frequency_grid,
)
from .storage import StorageParams, TimingSequence

FIGURES = ("fig2a", "fig2b", "fig3", "fig4", "fig5a", "fig5b", "fig6a", "fig6b",
           "fig7", "calibrate")
FORMATS = ("csv", "json", "png")


@dataclass(frozen=True)
class RunBlock:
    figure: str = "fig3"


@dataclass(frozen=True)
class AtomBlock:
    gamma_mhz: float = CALIBRATED_GAMMA_MHZ
    Gamma_mhz: float = CALIBRATED_GAMMA_UPPER_MHZ
    gamma_g_mhz: float = 1e-3 * CALIBRATED_GAMMA_MHZ
    gamma_12_mhz: float = 1e-3 * CALIBRATED_GAMMA_MHZ
    b1: float = CALIBRATED_B1


@dataclass(frozen=True)
class DrivesBlock:
    omega_c_mhz: float = CALIBRATED_OMEGA_C_MHZ
    omega_p_mhz: float = CALIBRATED_OMEGA_P_MHZ
    omega_pr_mhz: float = CALIBRATED_OMEGA_PR_MHZ
    omega_s_mhz: float = 0.0


@dataclass(frozen=True)
class SpectrumBlock:
    mode: str = SweepMode.FIXED_PROBE.value
    min_mhz: float = -40.0
    max_mhz: float = 40.0
    points: int = 801


@dataclass(frozen=True)
class FilterBlock:
    alpha: float = 6.0
    gamma_mhz: float = 3.0
    center_offset_mhz: float = 0.0
    dispersion: str = Dispersion.OFF.value


@dataclass(frozen=True)
class GridBlock:
    n: int = 4096
    dt_us: float = 0.01
    t_start_us: float = 0.0


@dataclass(frozen=True)
class PulseBlock:
    t_a_us: float = 15.0
    t_b_us: float = 25.0
    k: float = 100.0
    t_cut_us: float = 15.0
    delta_t_us: float = 3.0
    orientation: str = Orientation.SHARP_RISE.value
    window_us: float = 0.5


@dataclass(frozen=True)
class StorageBlock:
    eta: float = 0.5
    tau_s_us: float = 50.0
    write_window_us: float = 1.0
    readout_rate: float = 5.0
    t_off_us: float = 24.8
    t_on_us: float = 36.8


@dataclass(frozen=True)
class SweepBlock:
    delta_t_us: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    offsets_mhz: tuple[float, ...] = (-20.0, 0.0)
    k_values: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
    cutoff_mhz: float = 1.0
    gaps_us: tuple[float, ...] = (6.0, 12.0, 24.0)


@dataclass(frozen=True)
class OutputBlock:
    formats: tuple[str, ...] = FORMATS
    directory: str = ""


@dataclass(frozen=True)
class SimulationConfig:
    run: RunBlock = field(default_factory=RunBlock)
    atom: AtomBlock = field(default_factory=AtomBlock)
    drives: DrivesBlock = field(default_factory=DrivesBlock)
    spectrum: SpectrumBlock = field(default_factory=SpectrumBlock)
    filter: FilterBlock = field(default_factory=FilterBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    pulse: PulseBlock = field(default_factory=PulseBlock)
    storage: StorageBlock = field(default_factory=StorageBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    # -- model objects ----------------------------------------------------
    def scheme(self) -> AtomScheme:
        a = self.atom
        return AtomScheme(TWO_PI * a.gamma_mhz, TWO_PI * a.Gamma_mhz,
                          TWO_PI * a.gamma_g_mhz, TWO_PI * a.gamma_12_mhz, a.b1)

    def drive_fields(self) -> DriveFields:
        d = self.drives
        return DriveFields(omega_c=TWO_PI * d.omega_c_mhz, omega_p=TWO_PI * d.omega_p_mhz,
                           omega_pr=TWO_PI * d.omega_pr_mhz, omega_s=TWO_PI * d.omega_s_mhz)

    def filter_params(self) -> FilterParams:
        f = self.filter
        return FilterParams(f.alpha, TWO_PI * f.gamma_mhz, f.center_offset_mhz,
                            Dispersion(f.dispersion))

    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.grid.t_start_us, self.grid.dt_us, self.grid.n)

    def spectrum_grid(self):
        s = self.spectrum
        return frequency_grid(s.min_mhz, s.max_mhz, s.points)

    def storage_params(self) -> StorageParams:
        s = self.storage
        return StorageParams(s.eta, s.tau_s_us, s.write_window_us, s.readout_rate)

    def timing(self, t_off: float | None = None, t_on: float | None = None) -> TimingSequence:
        s = self.storage
        return TimingSequence.gated(s.t_off_us if t_off is None else t_off,
                                    s.t_on_us if t_on is None else t_on, self.time_grid())

    def pipeline(self, threads: int = 1) -> PipelineSetup:
        p = self.pulse
        return PipelineSetup(
            self.scheme(), self.drive_fields(), self.filter_params(), self.time_grid(),
            SweepMode(self.spectrum.mode), p.t_a_us, p.t_b_us, p.k, p.t_cut_us,
            p.delta_t_us, Orientation(p.orientation), p.window_us, threads,
        )

    def flat(self) -> dict[str, Any]:
        """``section.key -> value`` for every setting, in file order."""
        out = {}
        for sec in fields(self):
            block = getattr(self, sec.name)
            for f in fields(block):
                v = getattr(block, f.name)
                out[f"{sec.name}.{f.name}"] = list(v) if isinstance(v, tuple) else v
        return out

    def with_values(self, **sections: dict) -> "SimulationConfig":
        """Copy with some keys replaced, e.g. ``with_values(filter={'alpha': 1.0})``."""
        cfg = self
        for name, values in sections.items():
            cfg = replace(cfg, **{name: replace(getattr(cfg, name), **values)})
        return cfg


# ----------------------------------------------------------------------------
# Parsing
# ----------------------------------------------------------------------------

def _block_types() -> dict[str, dict[str, Any]]:
    types = {}
    for sec in fields(SimulationConfig):
        block_cls = sec.default_factory
        types[sec.name] = {f.name: f.type for f in fields(block_cls)}
    return types


_KEY_RE = re.compile(r"^\s*([^=:\s]+)\s*[=:]")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


def _locate(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for no, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        m = _KEY_RE.match(line)
        if key is not None and current == section and m and m.group(1) == key:
            return no
    return None


def _convert(raw: str, typ: str, where: str, line: int | None):
    try:
        if typ == "float":
            return float(raw)
        if typ == "int":
            return int(raw)
        if typ == "str":
            return raw.strip()
        if typ == "tuple[float, ...]":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if typ == "tuple[str, ...]":
            return tuple(x.strip() for x in raw.split(",") if x.strip())
    except ValueError:
        raise ParseError(f"{where}: cannot parse {raw!r} as {typ}", line, where) from None
    raise TypeError(typ)


def parse_config(text: str) -> SimulationConfig:
    """Parse configuration text, then validate it.

    Raises
    ------
    ParseError
        Syntax errors, unknown sections or keys, unparsable values.
    ValidationError
        Values that parse but violate model invariants (all are listed).
    """
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r} in [{exc.section}]",
                         exc.lineno, exc.option) from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ParseError(str(exc).splitlines()[0], line) from None

    types = _block_types()
    cfg = SimulationConfig()
    for section in parser.sections():
        if section not in types:
            raise ParseError(f"unknown section [{section}]", _locate(text, section), section)
        values = {}
        for key, raw in parser.items(section):
            where = f"{section}.{key}"
            line = _locate(text, section, key)
            if key not in types[section]:
                raise ParseError(f"unknown key {key!r} in [{section}]", line, where)
            values[key] = _convert(raw, types[section][key], where, line)
        cfg = cfg.with_values(**{section: values})
    validate(cfg)
    return cfg


def load_config(path) -> SimulationConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(v) -> str:
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: SimulationConfig) -> str:
    """Serialize every setting; ``parse_config(dump_config(c)) == c``."""
    lines = []
    for sec in fields(cfg):
        block = getattr(cfg, sec.name)
        lines.append(f"[{sec.name}]")
        for f in fields(block):
            lines.append(f"{f.name} = {_fmt(getattr(block, f.name))}")
        lines.append("")
    return "\n".join(lines)


# ----------------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------------

def validate(cfg: SimulationConfig) -> None:
    """Check every block, collecting all violations before raising."""
    problems: list[str] = []

    def need(cond: bool, key: str, msg: str, value=None):
        if not cond:
            shown = "" if value is None else f" (got {value!r})"
            problems.append(f"{key} {msg}{shown}")

    for key, v in cfg.flat().items():
        items = v if isinstance(v, list) else [v]
        for x in items:
            if isinstance(x, float) and not math.isfinite(x):
                problems.append(f"{key} must be finite (got {x!r})")

    a = cfg.atom
    need(cfg.run.figure in FIGURES, "run.figure", f"must be one of {', '.join(FIGURES)}", cfg.run.figure)
    need(a.gamma_mhz > 0, "atom.gamma_mhz", "must be > 0", a.gamma_mhz)
    need(a.Gamma_mhz > 0, "atom.Gamma_mhz", "must be > 0", a.Gamma_mhz)
    need(a.gamma_g_mhz > 0, "atom.gamma_g_mhz", "must be > 0", a.gamma_g_mhz)
    need(a.gamma_12_mhz >= 0, "atom.gamma_12_mhz", "must be >= 0", a.gamma_12_mhz)
    need(0 <= a.b1 <= 1, "atom.b1", "must lie in [0, 1]", a.b1)

    d = cfg.drives
    need(abs(d.omega_s_mhz) <= 1e-2 * a.gamma_mhz, "drives.omega_s_mhz",
         "must not exceed 1e-2 * atom.gamma_mhz", d.omega_s_mhz)
    need(0 < abs(d.omega_pr_mhz) <= 0.1 * a.gamma_mhz, "drives.omega_pr_mhz",
         "must be nonzero and at most 0.1 * atom.gamma_mhz", d.omega_pr_mhz)

    s = cfg.spectrum
    need(s.mode in [m.value for m in SweepMode], "spectrum.mode",
         "must be fixed_probe or two_photon_locked", s.mode)
    need(s.min_mhz < s.max_mhz, "spectrum.min_mhz", "must be below spectrum.max_mhz", s.min_mhz)
    need(s.points >= 3, "spectrum.points", "must be >= 3", s.points)

    f = cfg.filter
    need(f.alpha >= 0, "filter.alpha", "must be >= 0", f.alpha)
    need(f.gamma_mhz > 0, "filter.gamma_mhz", "must be > 0", f.gamma_mhz)
    need(f.dispersion in [x.value for x in Dispersion], "filter.dispersion",
         "must be off or lorentzian", f.dispersion)

    g = cfg.grid
    grid_ok = g.n >= 8 and (g.n & (g.n - 1)) == 0 and g.dt_us > 0
    need(g.n >= 8 and (g.n & (g.n - 1)) == 0, "grid.n", "must be a power of two >= 8", g.n)
    need(g.dt_us > 0, "grid.dt_us", "must be > 0", g.dt_us)
    lo, hi = g.t_start_us, g.t_start_us + (g.n - 1) * g.dt_us

    def inside(key, t):
        if grid_ok:
            need(lo <= t <= hi, key, f"must lie inside the grid [{lo:g}, {hi:g}] us", t)

    p = cfg.pulse
    need(p.t_a_us < p.t_b_us, "pulse.t_a_us", "must be earlier than pulse.t_b_us", p.t_a_us)
    inside("pulse.t_a_us", p.t_a_us)
    inside("pulse.t_b_us", p.t_b_us)
    inside("pulse.t_cut_us", p.t_cut_us)
    need(p.k > 0, "pulse.k", "must be > 0", p.k)
    need(p.delta_t_us > 0, "pulse.delta_t_us", "must be > 0", p.delta_t_us)
    need(p.orientation in [o.value for o in Orientation], "pulse.orientation",
         "must be sharp_rise or sharp_fall", p.orientation)
    need(p.window_us > 0, "pulse.window_us", "must be > 0", p.window_us)

    st = cfg.storage
    need(0 <= st.eta <= 1, "storage.eta", "must lie in [0, 1]", st.eta)
    need(st.tau_s_us > 0, "storage.tau_s_us", "must be > 0", st.tau_s_us)
    need(st.write_window_us > 0, "storage.write_window_us", "must be > 0", st.write_window_us)
    need(st.readout_rate > 0, "storage.readout_rate", "must be > 0", st.readout_rate)
    need(st.t_off_us < st.t_on_us, "storage.t_off_us", "must be earlier than storage.t_on_us", st.t_off_us)
    inside("storage.t_off_us", st.t_off_us)
    inside("storage.t_on_us", st.t_on_us)

    sw = cfg.sweep
    need(len(sw.delta_t_us) > 0 and all(v > 0 for v in sw.delta_t_us), "sweep.delta_t_us",
         "must be a nonempty list of positive values", list(sw.delta_t_us))
    need(len(sw.k_values) > 0 and all(v > 0 for v in sw.k_values), "sweep.k_values",
         "must be a nonempty list of positive values", list(sw.k_values))
    need(len(sw.offsets_mhz) > 0, "sweep.offsets_mhz", "must not be empty")
    need(sw.cutoff_mhz >= 0, "sweep.cutoff_mhz", "must be >= 0", sw.cutoff_mhz)
    need(len(sw.gaps_us) > 0 and all(v > 0 for v in sw.gaps_us), "sweep.gaps_us",
         "must be a nonempty list of positive values", list(sw.gaps_us))

    unknown = [x for x in cfg.output.formats if x not in FORMATS]
    need(not unknown, "output.formats", f"entries must be among {', '.join(FORMATS)}", unknown or None)

    if problems:
        raise ValidationError(problems)
