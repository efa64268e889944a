"""CSV time series and binary field snapshots."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

__all__ = [
    "RUN_HEADER",
    "COMPARE_HEADER",
    "SWEEP_HEADER",
    "write_csv",
    "read_csv",
    "write_snapshot",
    "read_snapshot",
]

RUN_HEADER = ("t", "mass", "Xs_norm_u", "Y_norm_v", "Y_norm_w", "energy")
COMPARE_HEADER = ("t", "Ru_Xs", "Rv_Y", "Rw_Y", "S_eps", "composite_error")
SWEEP_HEADER = ("eps", "sup_composite_error", "sup_S", "completed", "dt", "seconds")

SNAPSHOT_MAGIC = "MFPSNAP1"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path, header, rows) -> Path:
    """Write rows under an exact header; floats use 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} values, header has {len(header)}")
            writer.writerow([_fmt(x) for x in row])
    return path


def read_csv(path) -> tuple[list, np.ndarray]:
    """Return (header, 2D float array)."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def write_snapshot(path, grid, t: float, eps, fields: dict) -> Path:
    """One text header line, then raw little-endian float64 data, row-major.

    Header: ``MFPSNAP1 n=<n> L=<L> t=<t> eps=<eps> fields=u:complex,v:real``.
    Complex fields are stored with re/im interleaved.
    """
    path = Path(path)
    spec = []
    blobs = []
    for name, arr in fields.items():
        arr = np.asarray(arr)
        if arr.shape != grid.shape:
            raise ValueError(f"field {name} has shape {arr.shape}, grid is {grid.shape}")
        if np.iscomplexobj(arr):
            spec.append(f"{name}:complex")
            blobs.append(np.ascontiguousarray(arr, dtype="<c16").view("<f8"))
        else:
            spec.append(f"{name}:real")
            blobs.append(np.ascontiguousarray(arr, dtype="<f8"))
    eps_txt = "none" if eps is None else _fmt(eps)
    header = f"{SNAPSHOT_MAGIC} n={grid.n} L={_fmt(grid.L)} t={_fmt(t)} eps={eps_txt} fields={','.join(spec)}\n"
    with path.open("wb") as fh:
        fh.write(header.encode("ascii"))
        for b in blobs:
            fh.write(b.tobytes(order="C"))
    return path


def read_snapshot(path) -> dict:
    """Inverse of :func:`write_snapshot`; returns header values and fields."""
    raw = Path(path).read_bytes()
    end = raw.index(b"\n")
    parts = raw[:end].decode("ascii").split()
    if parts[0] != SNAPSHOT_MAGIC:
        raise ValueError(f"not a snapshot file: {path}")
    meta = dict(p.split("=", 1) for p in parts[1:])
    n = int(meta["n"])
    out = {
        "n": n,
        "L": float(meta["L"]),
        "t": float(meta["t"]),
        "eps": None if meta["eps"] == "none" else float(meta["eps"]),
        "fields": {},
    }
    offset = end + 1
    count = n**3
    for item in meta["fields"].split(","):
        name, kind = item.split(":")
        width = 2 * count if kind == "complex" else count
        data = np.frombuffer(raw, dtype="<f8", count=width, offset=offset)
        offset += 8 * width
        arr = data.view("<c16") if kind == "complex" else data
        out["fields"][name] = arr.reshape(n, n, n).copy()
    if offset != len(raw):
        raise ValueError(f"snapshot {path} has {len(raw) - offset} trailing bytes")
    return out
