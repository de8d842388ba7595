"""CSV, key-value and binary writers for run artifacts.

Floats are written with 17 significant digits so that every value read back
is bit-identical to the one written.

Binary boundary series (``.bin``), all little endian::

    magic b"ENCS", uint32 version = 1, uint64 n_nodes, uint64 n_times
    float64 points[n_nodes, 3], float64 times[n_times], float64 values[n_nodes, n_times]

Binary interior field::

    magic b"ENCF", uint32 version = 1, uint64 nx, ny, nz, float64 lo[3], hi[3]
    float64 values[nx, ny, nz]

Arrays are row major (C order).
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import struct

import numpy as np

SERIES_MAGIC = b"ENCS"
FIELD_MAGIC = b"ENCF"
VERSION = 1


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_indicator_csv(path, series):
    rows = []
    for rec in series.records:
        v = rec.value if rec.ok else math.nan
        log_abs = math.log(abs(v)) if rec.ok and v != 0 else math.nan
        rows.append((rec.tau, math.sqrt(rec.tau), v, log_abs, rec.path))
    return write_csv(path, ("tau", "sqrt_tau", "indicator", "log_abs_indicator", "path"), rows)


def write_oracle_csv(path, rows):
    return write_csv(path, ("j", "eta", "s", "r", "recurrence", "quadrature", "rel_err"), rows)


def write_thermo_csv(path, rows):
    """Rows (tau, lens_value, scaled_value, case) with case "perp" or "parallel"."""
    return write_csv(path, ("tau", "lens_value", "scaled_value", "case"), rows)


def write_series_csv(path, record):
    """Long format (node_id, x, y, z, t, value) of a FluxRecord or BoundarySeries."""
    pts = record.mesh.points
    times = record.times
    values = np.asarray(record.values)

    def rows():
        for i, p in enumerate(pts):
            for k, t in enumerate(times):
                yield (i, p[0], p[1], p[2], t, values[i, k])

    return write_csv(path, ("node_id", "x", "y", "z", "t", "value"), rows())


def write_summary(path, items):
    """``key = value`` lines in the given order; floats in shortest round-trip form."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_summary(items))
    return path


def format_summary(items) -> str:
    out = []
    for k, v in (items.items() if isinstance(items, dict) else items):
        if isinstance(v, (tuple, list)):
            v = ", ".join(repr(float(x)) for x in v)
        elif isinstance(v, (float, np.floating)):
            v = repr(float(v))
        out.append(f"{k} = {v}\n")
    return "".join(out)


def read_summary(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def dump_series(path, record):
    pts = np.ascontiguousarray(record.mesh.points, dtype="<f8")
    times = np.ascontiguousarray(record.times, dtype="<f8")
    values = np.ascontiguousarray(record.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(SERIES_MAGIC + struct.pack("<IQQ", VERSION, pts.shape[0], times.size))
        fh.write(pts.tobytes() + times.tobytes() + values.tobytes())
    return path


def load_series(path):
    """Returns (points, times, values) from :func:`dump_series` output."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != SERIES_MAGIC:
        raise ValueError(f"{path}: not a boundary-series dump")
    _, n, m = struct.unpack_from("<IQQ", data, 4)
    arr = np.frombuffer(data, dtype="<f8", offset=4 + struct.calcsize("<IQQ"))
    pts = arr[: 3 * n].reshape(n, 3)
    times = arr[3 * n: 3 * n + m]
    values = arr[3 * n + m:].reshape(n, m)
    return pts, times, values


def dump_field(path, values, shape, lo, hi):
    values = np.ascontiguousarray(np.asarray(values, dtype="<f8").reshape(shape))
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC + struct.pack("<IQQQ", VERSION, *shape))
        fh.write(np.asarray(lo, dtype="<f8").tobytes() + np.asarray(hi, dtype="<f8").tobytes())
        fh.write(values.tobytes())
    return path


def load_field(path):
    """Returns (values[nx, ny, nz], lo, hi) from :func:`dump_field` output."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != FIELD_MAGIC:
        raise ValueError(f"{path}: not a field dump")
    _, nx, ny, nz = struct.unpack_from("<IQQQ", data, 4)
    arr = np.frombuffer(data, dtype="<f8", offset=4 + struct.calcsize("<IQQQ"))
    return arr[6:].reshape(nx, ny, nz), arr[:3], arr[3:6]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, files, complete: bool, stages=()):
    """manifest.txt: completeness flag, finished stages, then "sha256  bytes  name" per file."""
    lines = [f"complete = {'true' if complete else 'false'}\n", f"stages = {', '.join(stages)}\n"]
    for name in sorted(set(files)):
        p = os.path.join(out_dir, name)
        lines.append(f"{sha256_file(p)}  {os.path.getsize(p)}  {name}\n")
    path = os.path.join(out_dir, "manifest.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(lines)
    return path
