"""File formats: field snapshots, time-series CSV, and JSON documents.

Snapshot layout (documented contract): a text file whose first line is a JSON
header ``{"n": ..., "l": ..., "eps": ...}`` followed by one ``i,j,k,f`` CSV
row per lattice node in C order (i slowest).  The header intentionally pins
only the lattice; loading attaches the default sphere rule unless the caller
supplies a grid.

The time-series CSV carries exactly the columns of ``CSV_HEADER`` in
:mod:`fdkin.solver`; channels that were not computed are written as ``nan``.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .grid import DistributionField, VelocityGrid, build_grid

__all__ = ["save_field", "load_field", "save_series", "load_series", "dump_json"]


def save_field(path: str, f: DistributionField):
    header = {"n": f.grid.n, "l": f.grid.l, "eps": f.eps}
    n = f.grid.n
    vals = f.values.reshape(n, n, n)
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write("i,j,k,f\n")
        for i in range(n):
            for j in range(n):
                row = vals[i, j]
                for k in range(n):
                    fh.write(f"{i},{j},{k},{float(row[k])!r}\n")


def load_field(path: str, grid: VelocityGrid | None = None) -> DistributionField:
    with open(path) as fh:
        header = json.loads(fh.readline())
        cols = fh.readline().strip()
        if cols != "i,j,k,f":
            raise ValueError(f"unexpected snapshot column line {cols!r} in {path}")
        n = int(header["n"])
        if grid is None:
            grid = build_grid(n, float(header["l"]))
        elif grid.n != n or abs(grid.l - float(header["l"])) > 1e-12:
            raise ValueError(
                f"snapshot lattice (n={n}, l={header['l']}) does not match "
                f"grid (n={grid.n}, l={grid.l})"
            )
        vals = np.zeros(n**3)
        for line in fh:
            if not line.strip():
                continue
            i, j, k, v = line.split(",")
            vals[(int(i) * n + int(j)) * n + int(k)] = float(v)
    return DistributionField(grid, vals, float(header["eps"]))


def _fmt(x: float) -> str:
    return repr(float(x))


def save_series(path: str, records, header: str):
    names = header.split(",")
    attr = {
        "t": "t", "rho": "rho", "ux": "ux", "uy": "uy", "uz": "uz", "E": "e",
        "sup_f": "sup_f", "kappa_min": "kappa_min", "l1s2": "l1s2",
        "l1s3": "l1s3", "H_eps": "h_eps", "H_rel": "h_rel", "D_eps": "d_eps",
        "l1k2_dist": "l1k2_dist", "sand_lo": "sand_lo", "sand_hi": "sand_hi",
        "ckp_margin": "ckp_margin",
    }
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for r in records:
            fh.write(",".join(_fmt(getattr(r, attr[c])) for c in names) + "\n")


def load_series(path: str):
    """Read a series CSV back as a dict of column -> float array."""
    with open(path) as fh:
        names = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(x) for x in row] for row in rows])
    if data.size == 0:
        data = data.reshape(0, len(names))
    return {name: data[:, i] for i, name in enumerate(names)}


def dump_json(path: str, obj):
    """Deterministic JSON: sorted keys, repr floats, trailing newline."""
    text = json.dumps(obj, sort_keys=True, indent=2, default=_json_default)
    with open(path, "w") as fh:
        fh.write(text + "\n")
    return text


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, os.PathLike):
        return os.fspath(x)
    raise TypeError(f"not JSON-serializable: {type(x)!r}")
