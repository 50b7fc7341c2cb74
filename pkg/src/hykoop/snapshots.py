"""Field snapshots, diagnostics CSV, and plot-ready exports.

A snapshot is two files: the raw data at `path` and a JSON sidecar at
`path + ".json"`.  The data file holds the complex field as (real,
imag) pairs of little-endian IEEE-754 doubles, row-major in (q, p, x)
order; the sidecar records the format tag "hykoop-field-v1", the
shape, the axis lengths and offsets, hbar, and the time stamp.  Raw
binary plus JSON keeps the format readable from any language without
libraries; round-trips are bit-exact.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .grids import Grid
from .hybrid import DiagnosticsRecord

FORMAT_TAG = "hykoop-field-v1"


def sidecar_path(path) -> str:
    return str(path) + ".json"


def write_snapshot(path, grid: Grid, field, hbar, time) -> str:
    """Write field + sidecar; returns the data path."""
    field = grid.check_field(field)
    pairs = np.empty(field.shape + (2,), dtype="<f8")
    pairs[..., 0] = field.real
    pairs[..., 1] = field.imag
    with open(path, "wb") as fh:
        fh.write(pairs.tobytes())
    meta = {
        "format": FORMAT_TAG,
        "shape": [grid.n_q, grid.n_p, grid.n_x],
        "axis_lengths": [grid.L_q, grid.L_p, grid.L_x],
        "axis_offsets": [grid.o_q, grid.o_p, grid.o_x],
        "hbar": float(hbar),
        "time": float(time),
    }
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path)


def read_snapshot(path, grid: Grid | None = None):
    """Read a snapshot; returns (field, metadata dict).

    The sidecar is required -- a bare data file is refused rather than
    guessed at.  With `grid` given, shape and axis geometry must match.
    """
    try:
        with open(sidecar_path(path)) as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise FileNotFoundError(
            f"snapshot sidecar {sidecar_path(path)} is missing; refusing to "
            "guess the field geometry") from None
    tag = meta.get("format")
    if tag != FORMAT_TAG:
        raise ValueError(f"snapshot format {tag!r}, expected {FORMAT_TAG!r}")
    shape = tuple(meta["shape"])
    with open(path, "rb") as fh:
        raw = fh.read()
    want = int(np.prod(shape)) * 16
    if len(raw) != want:
        raise ValueError(f"snapshot {path} holds {len(raw)} bytes, "
                         f"expected {want} for shape {shape}")
    pairs = np.frombuffer(raw, dtype="<f8").reshape(shape + (2,))
    field = pairs[..., 0] + 1j * pairs[..., 1]
    if grid is not None:
        if shape != grid.shape:
            raise ValueError(f"snapshot shape {shape} does not match "
                             f"grid {grid.shape}")
        lengths = [grid.L_q, grid.L_p, grid.L_x]
        offsets = [grid.o_q, grid.o_p, grid.o_x]
        if (not np.allclose(meta["axis_lengths"], lengths)
                or not np.allclose(meta["axis_offsets"], offsets)):
            raise ValueError("snapshot axis geometry does not match grid")
    return field, meta


# ---------------------------------------------------------------------------
# CSV exports
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def write_diagnostics(path, records) -> str:
    """Diagnostics CSV, one row per record, fixed column contract."""
    fields = DiagnosticsRecord.CSV_FIELDS
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, name)) for name in fields])
    return str(path)


def export_diagnostic_series(path, records, selector) -> str:
    """Two-column CSV (t, selector) pulled out of diagnostics records."""
    allowed = [f for f in DiagnosticsRecord.CSV_FIELDS if f != "t"]
    if selector not in allowed:
        raise ValueError(f"unknown diagnostic selector {selector!r}; "
                         f"choose from {allowed}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", selector])
        for rec in records:
            writer.writerow([_fmt(rec.t), _fmt(getattr(rec, selector))])
    return str(path)


def export_classical_density(path, grid: Grid, rho) -> str:
    """rho_c heatmap as (q, p, value) triplets, row-major in (q, p)."""
    rho = np.asarray(rho)
    if rho.shape != (grid.n_q, grid.n_p):
        raise ValueError(f"rho_c has shape {rho.shape}, expected "
                         f"{(grid.n_q, grid.n_p)}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["q", "p", "value"])
        for i in range(grid.n_q):
            for j in range(grid.n_p):
                writer.writerow([_fmt(grid.q[i]), _fmt(grid.p[j]),
                                 _fmt(rho[i, j])])
    return str(path)


def export_loop_rate(path, times, lhs, rhs) -> str:
    """Loop-rate comparison as three columns (t, lhs, rhs)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "lhs", "rhs"])
        for t, a, b in zip(times, lhs, rhs):
            writer.writerow([_fmt(t), _fmt(a), _fmt(b)])
    return str(path)


def write_manifest(path, cfg: dict) -> str:
    """Echo the fully resolved config next to a run's outputs."""
    with open(path, "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path)
