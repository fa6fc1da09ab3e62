"""Bit-exact binary snapshots, the norms CSV, and the run manifest.

Snapshot layout: magic "TMSB", format version, n, q, N (unsigned 32-bit),
then L and t as 64-bit floats, then the payload: f followed by v,
row-major per field, 64-bit little-endian floats, exactly 2 q N^n values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import FieldState, GridSpec

MAGIC = b"TMSB"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIdd")

CSV_HEADER = "t,M1,M2,N1,N2,energy,margin,div_residual"


def write_snapshot(path, state: FieldState):
    g = state.grid
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, g.n, g.q, g.points_per_axis,
                          g.half_width, state.t)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(state.f, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.v, dtype="<f8").tobytes())


def read_snapshot(path) -> FieldState:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, q, N, L, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    grid = GridSpec(n=n, q=q, half_width=L, points_per_axis=N)
    count = 2 * q * N ** n
    expect = _HEADER.size + count * 8
    if len(raw) != expect:
        raise ValueError(f"{path}: payload length {len(raw) - _HEADER.size} != {count * 8}")
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    half = count // 2
    shape = (q,) + grid.shape
    f = payload[:half].reshape(shape).astype(np.float64)
    v = payload[half:].reshape(shape).astype(np.float64)
    return FieldState(grid, t, f, v)


def _fmt(x) -> str:
    """Shortest round-trip float formatting (bit-stable for equal values)."""
    if x is None:
        return "nan"
    return repr(float(x))


def write_norms_csv(path, records):
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join([
            _fmt(r.t), _fmt(r.m1), _fmt(r.m2), _fmt(r.n1), _fmt(r.n2),
            _fmt(r.energy), _fmt(r.min_coercivity_margin), _fmt(r.divergence_residual),
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_norms_csv(path):
    """Columns of a norms CSV as a dict of float arrays."""
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not text or text[0] != CSV_HEADER:
        raise ValueError(f"{path}: unexpected CSV header")
    cols = CSV_HEADER.split(",")
    data = {c: [] for c in cols}
    for line in text[1:]:
        parts = line.split(",")
        if len(parts) != len(cols):
            raise ValueError(f"{path}: malformed row {line!r}")
        for c, p in zip(cols, parts):
            data[c].append(float(p))
    return {c: np.array(v) for c, v in data.items()}


def write_manifest(path, config, meta: dict):
    """Config echo (a valid config file) plus commented metadata."""
    lines = [f"# {k} = {v}" for k, v in meta.items()]
    body = config.to_text()
    Path(path).write_text("\n".join(lines) + "\n" + body, encoding="utf-8")
