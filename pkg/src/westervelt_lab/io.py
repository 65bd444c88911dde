"""Binary field containers, CSV and JSON writers."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fields import BoundaryTrace, Grid3D, ScalarField3D, SpaceTimeField

MAGIC = b"WVLB"
VERSION = 1
# magic, version, n, n_t, dt, kind (16 bytes, NUL padded), complex flag
_HEADER = struct.Struct("<4sIIId16sB")

KINDS = ("scalar", "spacetime", "trace")


def _pack_header(grid: Grid3D, kind: str, is_complex: bool) -> bytes:
    return _HEADER.pack(
        MAGIC, VERSION, grid.n, grid.n_t, grid.dt, kind.encode().ljust(16, b"\0"),
        int(is_complex),
    )


def _payload(arr: np.ndarray) -> bytes:
    # time axis (if any) moved last so t varies fastest
    if np.iscomplexobj(arr):
        arr = np.stack([arr.real, arr.imag], axis=-1)
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def write_field(path, obj) -> None:
    """Serialize a ScalarField3D, SpaceTimeField or BoundaryTrace."""
    if isinstance(obj, ScalarField3D):
        kind, arr = "scalar", obj.values
    elif isinstance(obj, SpaceTimeField):
        kind, arr = "spacetime", np.moveaxis(obj.frames, 0, -1)
    elif isinstance(obj, BoundaryTrace):
        kind, arr = "trace", np.moveaxis(obj.values, 0, -1)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    cplx = bool(np.iscomplexobj(arr))
    with open(path, "wb") as fh:
        fh.write(_pack_header(obj.grid, kind, cplx))
        fh.write(_payload(arr))


def read_field(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ConfigError(f"{path}: truncated header")
    magic, version, n, n_t, dt, kind, cplx = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise ConfigError(f"{path}: not a field container")
    kind = kind.rstrip(b"\0").decode()
    grid = Grid3D(n, dt, n_t)
    shape = {
        "scalar": (n, n, n),
        "spacetime": (n, n, n, n_t),
        "trace": (6, n, n, n_t),
    }[kind]
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if cplx:
        arr = flat.reshape(shape + (2,))
        arr = arr[..., 0] + 1j * arr[..., 1]
    else:
        arr = flat.reshape(shape).copy()
    if kind == "scalar":
        return ScalarField3D(grid, arr)
    if kind == "spacetime":
        return SpaceTimeField(grid, np.moveaxis(arr, -1, 0).copy())
    return BoundaryTrace(grid, np.moveaxis(arr, -1, 0).copy())


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_trace_csv(path, trace: BoundaryTrace) -> None:
    """Long-format CSV with columns t, face, i, j, value (real part, imag if complex)."""
    g = trace.grid
    cplx = np.iscomplexobj(trace.values)
    header = ["t", "face", "i", "j", "value"] + (["value_im"] if cplx else [])

    def rows():
        for k, t in enumerate(g.t):
            for f in range(6):
                for i in range(g.n):
                    for j in range(g.n):
                        v = trace.values[k, f, i, j]
                        if cplx:
                            yield (float(t), f, i, j, float(v.real), float(v.imag))
                        else:
                            yield (float(t), f, i, j, float(v))

    write_csv(path, header, rows())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
