"""File formats: delimited tables, JSON reports, and binary operator dumps.

CSV files follow RFC 4180 (CRLF line endings, quoting only when needed);
floats are written with repr-faithful precision so reruns with the same
seeds are byte-identical.  The binary operator layout is

    magic  b"PLWEYL01"
    header little-endian: uint8 endianness tag (0 = little), uint8 dim,
           uint32 n, float64 length, float64 hbar
    data   row-major complex64 entries of the full matrix

with an adjacent ``<name>.json`` manifest describing dtype, shape and byte
offset so the block can be memory-mapped without parsing the header.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from paulilab.errors import ContractError
from paulilab.weyl_moyal import GridSpec, WeylOperator

_OPERATOR_MAGIC = b"PLWEYL01"
_EIGEN_MAGIC = b"PLEIG001"


def fmt(x) -> str:
    """Shortest round-trip decimal form of a float."""
    return repr(float(x))


def write_csv(path, header, rows):
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(c) if isinstance(c, (float, np.floating))
                             else c for c in row])
    return path


def write_json(path, payload):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def trajectory_to_csv(traj, path):
    d = traj.dim
    header = (["t"] + [f"p_{i+1}" for i in range(d)]
              + [f"x_{i+1}" for i in range(d)] + ["energy"])
    rows = [[traj.times[i], *traj.points[i], traj.energies[i]]
            for i in range(len(traj.times))]
    return write_csv(path, header, rows)


def transport_to_csv(path, times, quats):
    from paulilab.pauli import quat_to_matrix
    mats = quat_to_matrix(quats)
    header = ["t", "q0", "q1", "q2", "q3",
              "re_d11", "im_d11", "re_d12", "im_d12",
              "re_d21", "im_d21", "re_d22", "im_d22"]
    rows = []
    for i, t in enumerate(times):
        m = mats[i]
        rows.append([t, *quats[i],
                     m[0, 0].real, m[0, 0].imag, m[0, 1].real, m[0, 1].imag,
                     m[1, 0].real, m[1, 0].imag, m[1, 1].real, m[1, 1].imag])
    return write_csv(path, header, rows)


def _pack_grid(grid: GridSpec) -> bytes:
    return struct.pack("<BBIdd", 0, grid.dim, grid.n, grid.length, grid.hbar)


def _unpack_grid(buf: bytes) -> GridSpec:
    endian, dim, n, length, hbar = struct.unpack("<BBIdd", buf)
    if endian != 0:
        raise ContractError("unsupported endianness tag")
    return GridSpec(dim=dim, n=n, length=length, hbar=hbar)


_GRID_HEADER_BYTES = struct.calcsize("<BBIdd")


def save_operator(op: WeylOperator, path) -> Path:
    path = Path(path)
    data = op.matrix.astype(np.complex64)
    with open(path, "wb") as fh:
        fh.write(_OPERATOR_MAGIC)
        fh.write(_pack_grid(op.grid))
        fh.write(data.tobytes(order="C"))
    offset = len(_OPERATOR_MAGIC) + _GRID_HEADER_BYTES
    write_json(path.with_suffix(path.suffix + ".json"), {
        "format": "paulilab-weyl-operator",
        "byte_order": "little",
        "dtype": "complex64",
        "order": "C",
        "shape": list(data.shape),
        "data_offset": offset,
        "grid": {"dim": op.grid.dim, "n": op.grid.n,
                 "length": op.grid.length, "hbar": op.grid.hbar},
        "name": op.name,
        "hermiticity_defect": op.hermiticity_defect,
    })
    return path


def load_operator(path) -> WeylOperator:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(_OPERATOR_MAGIC))
        if magic != _OPERATOR_MAGIC:
            raise ContractError("not a paulilab operator file")
        grid = _unpack_grid(fh.read(_GRID_HEADER_BYTES))
        dim = grid.hilbert_dim
        data = np.frombuffer(fh.read(), dtype=np.complex64)
    if data.size != dim * dim:
        raise ContractError("operator payload size mismatch")
    return WeylOperator(matrix=data.reshape(dim, dim).astype(complex),
                        grid=grid, hermiticity_defect=0.0, name=path.stem)


def export_eigensystem(eig, prefix) -> list:
    """JSON manifest plus binary spinor block; returns written paths."""
    prefix = Path(prefix)
    json_path = prefix.with_suffix(".json")
    bin_path = prefix.with_suffix(".spinors")
    write_json(json_path, {
        "format": "paulilab-eigensystem",
        "window": {"energy": eig.window.energy, "omega": eig.window.omega,
                   "hbar": eig.window.hbar,
                   "lo": eig.window.lo, "hi": eig.window.hi},
        "count": eig.count,
        "energies": [float(e) for e in eig.energies],
        "grid": {"dim": eig.grid.dim, "n": eig.grid.n,
                 "length": eig.grid.length, "hbar": eig.grid.hbar},
        "spinor_file": bin_path.name,
        "spinor_dtype": "complex128",
        "spinor_shape": [eig.count, eig.grid.hilbert_dim],
    })
    with open(bin_path, "wb") as fh:
        fh.write(_EIGEN_MAGIC)
        fh.write(_pack_grid(eig.grid))
        fh.write(struct.pack("<I", eig.count))
        fh.write(np.ascontiguousarray(eig.vectors.T).tobytes())
    return [json_path, bin_path]


def expectation_table(path, eig, values, target):
    header = ["k", "energy", "expectation", "sq_deviation"]
    rows = [[k, eig.energies[k], values[k], abs(values[k] - target) ** 2]
            for k in range(eig.count)]
    return write_csv(path, header, rows)


def field_to_csv(field, path, stride=4):
    """Down-sampled phase-space field table for plotting."""
    if field.grid.dim != 1:
        raise ContractError("field CSV export supports d = 1")
    p, x = field.nodes()
    header = ["p", "x",
              "re_w11", "im_w11", "re_w12", "im_w12",
              "re_w21", "im_w21", "re_w22", "im_w22"]
    rows = []
    vals = field.values
    for i in range(0, vals.shape[0], stride):
        for j in range(0, vals.shape[1], stride):
            w = vals[i, j]
            rows.append([p[i, j, 0], x[i, j, 0],
                         w[0, 0].real, w[0, 0].imag, w[0, 1].real, w[0, 1].imag,
                         w[1, 0].real, w[1, 0].imag, w[1, 1].real, w[1, 1].imag])
    return write_csv(path, header, rows)


def save_field(field, path) -> Path:
    path = Path(path)
    data = field.values.astype(np.complex64)
    with open(path, "wb") as fh:
        fh.write(b"PLFLD001")
        fh.write(_pack_grid(field.grid))
        fh.write(data.tobytes(order="C"))
    write_json(path.with_suffix(path.suffix + ".json"), {
        "format": "paulilab-phase-field",
        "kind": field.kind,
        "dtype": "complex64",
        "shape": list(data.shape),
        "data_offset": len(b"PLFLD001") + _GRID_HEADER_BYTES,
        "grid": {"dim": field.grid.dim, "n": field.grid.n,
                 "length": field.grid.length, "hbar": field.grid.hbar},
    })
    return path
