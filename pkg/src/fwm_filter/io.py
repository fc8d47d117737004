"""CSV and JSON writers with deterministic formatting.

Numbers are written with 17 significant digits so they round-trip exactly,
lines end in LF, and metadata goes into ``#``-prefixed header lines.
"""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .pipeline import SweepResult
from .pulses import PulseEnvelope
from .spectra import SpectralResponse
from .storage import CHANNELS, StorageTrace

FLOAT_FMT = "%.17g"


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return FLOAT_FMT % x


def _meta_lines(meta: dict[str, Any]) -> list[str]:
    return [f"# {k} = {json.dumps(v, sort_keys=True)}" for k, v in meta.items()]


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> Path:
    path = Path(path)
    lines = _meta_lines(meta or {})
    lines.append(",".join(columns))
    lines.extend(",".join(_fmt(x) for x in row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _complex_rows(x: np.ndarray, a: np.ndarray):
    a = np.asarray(a, dtype=complex)
    return zip(np.asarray(x, dtype=float).tolist(), a.real.tolist(), a.imag.tolist(),
               np.abs(a).tolist())


def write_spectrum(path, spec: SpectralResponse, meta: dict | None = None) -> Path:
    return write_csv(path, ("delta2_mhz", "re", "im", "abs"),
                     _complex_rows(spec.freq_grid, spec.amplitude), meta)


def write_pulse(path, pulse: PulseEnvelope, meta: dict | None = None) -> Path:
    return write_csv(path, ("t_us", "re", "im", "abs"),
                     _complex_rows(pulse.times, pulse.amplitude), meta)


def write_storage(path, trace: StorageTrace, meta: dict | None = None) -> Path:
    rows = []
    for name in CHANNELS:
        ch = trace.channel(name)
        rows.extend(list(r) + [name] for r in _complex_rows(ch.times, ch.amplitude))
    return write_csv(path, ("t_us", "re", "im", "abs", "channel"), rows, meta)


def write_sweep(path, sweep: SweepResult, meta: dict | None = None) -> Path:
    return write_csv(path, SweepResult.COLUMNS, sweep.as_array().tolist(), meta)


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return path


def read_csv(path) -> tuple[dict[str, Any], list[str], list[list[str]]]:
    """Read a file written by :func:`write_csv` as ``(meta, columns, rows)``."""
    meta: dict[str, Any] = {}
    columns: list[str] = []
    rows: list[list[str]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, value = line[2:].partition(" = ")
                meta[key] = json.loads(value)
            elif not columns:
                columns = line.split(",")
            elif line:
                rows.append(line.split(","))
    return meta, columns, rows


def read_numeric_csv(path) -> dict[str, np.ndarray]:
    _, columns, rows = read_csv(path)
    out = {}
    for i, c in enumerate(columns):
        col = [r[i] for r in rows]
        try:
            out[c] = np.array([float(v) for v in col])
        except ValueError:
            out[c] = np.array(col)
    return out


def default_out_dir() -> Path:
    return Path(os.environ.get("FWM_FILTER_OUT_DIR", "fwm_output"))
