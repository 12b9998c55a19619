"""File formats: atom-cloud and root CSV, the BFGRID01 binary grid format,
8-bit PGM quick looks and JSON configuration.

BFGRID01 layout (all little-endian):

    offset  size  content
    0       8     magic b"BFGRID01"
    8       8     nx  (uint64)
    16      8     ny  (uint64)
    24      8     kind (uint64: 0 field values, 1 cell masses)
    32      32    rect re_min, re_max, im_min, im_max (float64)
    64      ...   ny * nx float64 values, row-major (row i has fixed Im)

Floats in CSV files are written with ``repr`` so that they round-trip and
identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from bifcurrent.measures import AtomCloud, GridField, GridMeasure, GridSpec

MAGIC = b"BFGRID01"
HEADER = struct.Struct("<8sQQQ")
RECT = struct.Struct("<4d")
KIND_FIELD = 0
KIND_MEASURE = 1


class FormatError(ValueError):
    pass


def fmt(x: float) -> str:
    """Shortest round-trip text for a float; negative zero prints as 0.0."""
    x = float(x)
    return repr(x + 0.0) if x == 0 else repr(x)


# -- CSV -------------------------------------------------------------------


def write_cloud_csv(path, cloud: AtomCloud) -> None:
    """Dim-2 clouds: c_re,c_im,z_re,z_im,j,weight.  Dim-1: re,im,weight."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if cloud.dim == 2:
            w.writerow(["c_re", "c_im", "z_re", "z_im", "j", "weight"])
            labels = cloud.labels if cloud.labels is not None else np.full(len(cloud), -1)
            for (c, z), j, wt in zip(cloud.points, labels, cloud.weights):
                w.writerow([fmt(c.real), fmt(c.imag), fmt(z.real), fmt(z.imag), int(j), fmt(wt)])
        else:
            w.writerow(["re", "im", "weight"])
            for a, wt in zip(cloud.points, cloud.weights):
                w.writerow([fmt(a.real), fmt(a.imag), fmt(wt)])


def read_cloud_csv(path) -> AtomCloud:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    head, body = rows[0], rows[1:]
    data = np.array(body, dtype=np.float64).reshape(len(body), len(head))
    if head == ["c_re", "c_im", "z_re", "z_im", "j", "weight"]:
        pts = np.column_stack([data[:, 0] + 1j * data[:, 1], data[:, 2] + 1j * data[:, 3]])
        return AtomCloud(pts, data[:, 5], labels=data[:, 4].astype(np.int64))
    if head == ["re", "im", "weight"]:
        return AtomCloud(data[:, 0] + 1j * data[:, 1], data[:, 2])
    raise FormatError(f"{path}: unknown header {head}")


def write_roots_csv(path, roots, residuals) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re", "im", "residual"])
        for r, res in zip(roots, residuals):
            w.writerow([fmt(r.real), fmt(r.imag), fmt(res)])


def table_csv(header, rows) -> str:
    """Render rows as CSV text with round-trip float formatting."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


# -- BFGRID01 --------------------------------------------------------------


def write_grid(path, grid) -> None:
    """Write a :class:`GridField` or :class:`GridMeasure`."""
    if isinstance(grid, GridMeasure):
        kind, values = KIND_MEASURE, grid.cell_mass
    elif isinstance(grid, GridField):
        kind, values = KIND_FIELD, grid.values
    else:
        raise TypeError("expected a GridField or GridMeasure")
    spec = grid.spec
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, spec.nx, spec.ny, kind))
        fh.write(RECT.pack(*spec.rect))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_grid(path):
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size + RECT.size:
        raise FormatError(f"{path}: truncated header")
    magic, nx, ny, kind = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    rect = RECT.unpack_from(raw, HEADER.size)
    body = raw[HEADER.size + RECT.size:]
    if len(body) != 8 * nx * ny:
        raise FormatError(f"{path}: expected {nx * ny} values, found {len(body) // 8}")
    values = np.frombuffer(body, dtype="<f8").reshape(ny, nx).astype(np.float64)
    spec = GridSpec(rect, int(nx), int(ny))
    if kind == KIND_FIELD:
        return GridField(spec, values)
    if kind == KIND_MEASURE:
        return GridMeasure(spec, values)
    raise FormatError(f"{path}: unknown grid kind {kind}")


# -- PGM -------------------------------------------------------------------


def to_gray(values: np.ndarray, gamma: float = 0.5) -> np.ndarray:
    """Log-scale non-negative data to 0..255: ((log1p(v/s)/log1p(max/s))^gamma)
    with s the median positive value."""
    v = np.where(np.isfinite(values), np.maximum(values, 0.0), 0.0)
    pos = v[v > 0]
    if len(pos) == 0:
        return np.zeros(v.shape, dtype=np.uint8)
    s = float(np.median(pos))
    scaled = np.log1p(v / s) / math.log1p(float(pos.max()) / s)
    return np.round(255 * scaled ** gamma).astype(np.uint8)


def write_pgm(path, values: np.ndarray, gamma: float = 0.5) -> None:
    """Binary PGM (P5), top row = largest Im, log-scaled with ``gamma``."""
    img = to_gray(np.asarray(values, dtype=np.float64), gamma)[::-1]
    ny, nx = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n# log1p scale, gamma {gamma!r}\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5":
        raise FormatError(f"{path}: not a binary PGM")
    nx, ny = int(tokens[1]), int(tokens[2])
    return np.frombuffer(raw[pos + 1:pos + 1 + nx * ny], dtype=np.uint8).reshape(ny, nx)


# -- JSON ------------------------------------------------------------------


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def dump_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise FormatError(f"{path}: configuration must be a JSON object")
    return data
