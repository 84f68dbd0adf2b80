"""Binary and CSV persistence for trajectories.

Binary layout, all little-endian::

    b"DGPR"            magic
    u4 version         currently 1
    u4 d_x
    u4 cells[d_x]
    u4 n_times
    f8 times[n_times]
    f8 epsilon
    f8 box[d_x][2]
    f8 data[n_times, *cells]   C order
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .solver import Field, Grid, Trajectory

MAGIC = b"DGPR"
VERSION = 1


class FormatError(ValueError):
    pass


def write_trajectory(traj: Trajectory, path: str | Path) -> Path:
    grid = traj.grid
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, grid.dim))
        fh.write(struct.pack(f"<{grid.dim}I", *grid.cells))
        fh.write(struct.pack("<I", len(traj.fields)))
        fh.write(np.asarray(traj.times, "<f8").tobytes())
        fh.write(struct.pack("<d", traj.epsilon))
        fh.write(np.asarray(grid.box, "<f8").tobytes())
        for f in traj.fields:
            fh.write(np.ascontiguousarray(f.values, "<f8").tobytes())
    return path


def read_trajectory(path: str | Path) -> Trajectory:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise FormatError("not a trajectory dump (bad magic)")
    pos = 4

    def take(fmt: str):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(raw):
            raise FormatError("truncated header")
        out = struct.unpack_from(fmt, raw, pos)
        pos += size
        return out

    version, dim = take("<II")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    cells = take(f"<{dim}I")
    (n_times,) = take("<I")
    times = take(f"<{n_times}d")
    (eps,) = take("<d")
    box = np.array(take(f"<{2 * dim}d")).reshape(dim, 2)
    count = n_times * int(np.prod(cells))
    if len(raw) - pos != 8 * count:
        raise FormatError("payload size does not match header")
    data = np.frombuffer(raw, "<f8", count, pos).reshape((n_times,) + tuple(cells))
    grid = Grid(cells, tuple(map(tuple, box)))
    fields = tuple(Field(data[i].astype(float), grid, times[i]) for i in range(n_times))
    return Trajectory(fields, eps, {"source": str(path)})


def export_csv(traj: Trajectory, directory: str | Path, stem: str = "field") -> list[Path]:
    """One CSV per saved time with cell-centre coordinates and the value."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grid = traj.grid
    coords = [c.ravel() for c in grid.mesh()]
    names = ["x", "y"][: grid.dim]
    out = []
    for i, f in enumerate(traj.fields):
        p = directory / f"{stem}_{i:03d}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"# t={f.time!r} eps={traj.epsilon!r}"])
            w.writerow(names + ["u"])
            for row in zip(*coords, f.values.ravel()):
                w.writerow([repr(float(v)) for v in row])
        out.append(p)
    return out
