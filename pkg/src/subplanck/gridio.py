"""Grid and table serialisation.

CSV grids have a ``x,p,w`` header and one row per sample in row-major order
(x outer, p inner).  Floats are written with ``repr`` (shortest round-trip
decimal), so identical arrays always give identical bytes.

Binary grids (little-endian)::

    b"WGRD" | u32 version | f64 x_min x_max p_min p_max | u32 nx ny | f64 values[nx*ny]
"""

import io
import struct

import numpy as np

from subplanck.core import GridSpec, WignerGrid

MAGIC = b"WGRD"
VERSION = 1
_HEADER = struct.Struct("<4sI4dII")


class FormatError(ValueError):
    pass


def fmt(v):
    """Shortest round-trip text for a number; ints stay ints."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def grid_to_csv(grid):
    xs, ps = grid.spec.xs, grid.spec.ps
    buf = io.StringIO()
    buf.write("x,p,w\n")
    xt = [repr(float(x)) for x in xs]
    pt = [repr(float(p)) for p in ps]
    for i, x in enumerate(xt):
        row = grid.values[i]
        buf.write("".join(f"{x},{pt[j]},{repr(float(row[j]))}\n" for j in range(len(pt))))
    return buf.getvalue()


def grid_from_csv(text):
    lines = text.splitlines()
    if not lines or lines[0].strip() != "x,p,w":
        raise FormatError("missing 'x,p,w' header")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln.strip()])
    if data.ndim != 2 or data.shape[1] != 3:
        raise FormatError("expected three columns")
    xs = np.unique(data[:, 0])
    ps = np.unique(data[:, 1])
    if xs.size * ps.size != data.shape[0]:
        raise FormatError("samples do not form a rectangular grid")
    spec = GridSpec(float(xs[0]), float(xs[-1]), float(ps[0]), float(ps[-1]), xs.size, ps.size)
    return WignerGrid(spec, data[:, 2].reshape(xs.size, ps.size))


def grid_to_bytes(grid):
    s = grid.spec
    head = _HEADER.pack(MAGIC, VERSION, s.x_min, s.x_max, s.p_min, s.p_max, s.nx, s.ny)
    return head + np.ascontiguousarray(grid.values, dtype="<f8").tobytes()


def grid_from_bytes(blob):
    if len(blob) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, x0, x1, p0, p1, nx, ny = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError("bad magic")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    body = blob[_HEADER.size:]
    if len(body) != 8 * nx * ny:
        raise FormatError("payload size does not match nx*ny")
    vals = np.frombuffer(body, dtype="<f8").reshape(nx, ny).astype(np.float64)
    return WignerGrid(GridSpec(x0, x1, p0, p1, nx, ny), vals)


def write_grid(grid, stem, formats=("csv", "bin")):
    """Write ``stem.csv`` and/or ``stem.wgrd``; returns the paths written."""
    out = []
    if "csv" in formats:
        path = f"{stem}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(grid_to_csv(grid))
        out.append(path)
    if "bin" in formats:
        path = f"{stem}.wgrd"
        with open(path, "wb") as fh:
            fh.write(grid_to_bytes(grid))
        out.append(path)
    return out


def read_grid(path):
    if str(path).endswith(".csv"):
        with open(path, encoding="utf-8") as fh:
            return grid_from_csv(fh.read())
    with open(path, "rb") as fh:
        return grid_from_bytes(fh.read())


def table_to_csv(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(fmt(v) for v in r) + "\n")
    return buf.getvalue()


def write_table(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(table_to_csv(header, rows))
    return path
