"""Trajectory dumps: per-sample CSV or a small little-endian binary container.

Binary layout (all little-endian)::

    bytes 0..7    magic  b"PASTRAJ\\0"
    uint32        format version (1)
    uint32        D, state dimension
    uint32        N, number of steps
    float64[N+1]  times, indexed by step i = 0..N
    float64[(N+1)*D]  states, row i = x_{t_i}, row-major
    float64[N*D]      directions, row i-1 = d_{t_i}, row-major
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from paslab.errors import InvalidArgumentError

MAGIC = b"PASTRAJ\0"
VERSION = 1
_HEADER = struct.Struct("<8sIII")


def trajectory_csv(times, states, directions) -> str:
    """``step,time,state_0..,direction_0..`` with rows ordered N..0; step 0 has no direction."""
    states = np.asarray(states)
    n, dim = states.shape[0] - 1, states.shape[1]
    cols = ["step", "time"] + [f"state_{j}" for j in range(dim)] + [f"direction_{j}" for j in range(dim)]
    out = io.StringIO()
    out.write(",".join(cols) + "\n")
    for i in range(n, -1, -1):
        d = directions[i - 1] if i > 0 else np.full(dim, np.nan)
        fields = [str(i), repr(float(times[i]))] + [repr(float(v)) for v in states[i]] + \
                 ["" if np.isnan(v) else repr(float(v)) for v in d]
        out.write(",".join(fields) + "\n")
    return out.getvalue()


def pack_trajectory(times, states, directions) -> bytes:
    states = np.asarray(states, dtype="<f8")
    directions = np.asarray(directions, dtype="<f8")
    times = np.asarray(times, dtype="<f8")
    n, dim = states.shape[0] - 1, states.shape[1]
    if directions.shape != (n, dim) or times.shape != (n + 1,):
        raise InvalidArgumentError("inconsistent trajectory shapes")
    return _HEADER.pack(MAGIC, VERSION, dim, n) + times.tobytes() + states.tobytes() + directions.tobytes()


def unpack_trajectory(blob: bytes):
    """Inverse of :func:`pack_trajectory`; returns (times, states, directions)."""
    if len(blob) < _HEADER.size:
        raise InvalidArgumentError("truncated trajectory container")
    magic, version, dim, n = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise InvalidArgumentError("not a trajectory container (bad magic)")
    if version != VERSION:
        raise InvalidArgumentError(f"unsupported container version {version}")
    expected = _HEADER.size + 8 * ((n + 1) + (n + 1) * dim + n * dim)
    if len(blob) != expected:
        raise InvalidArgumentError(f"container size {len(blob)} != expected {expected}")
    data = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    times = data[: n + 1].copy()
    states = data[n + 1: n + 1 + (n + 1) * dim].reshape(n + 1, dim).copy()
    directions = data[n + 1 + (n + 1) * dim:].reshape(n, dim).copy()
    return times, states, directions


def write_trajectory(path, times, states, directions, fmt="csv"):
    path = Path(path)
    if fmt == "csv":
        path.write_text(trajectory_csv(times, states, directions))
    elif fmt == "binary":
        path.write_bytes(pack_trajectory(times, states, directions))
    else:
        raise InvalidArgumentError(f"unknown trajectory format {fmt!r}")
    return path
