"""Grid/model JSON serialization and whitespace-table emission.

Complex values are stored as interleaved [re, im] floats; Python's float
repr is shortest-round-trip, so save/load reproduces every binary64 value
exactly.  Documents carry a format tag that is checked on load, and every
malformed-input path raises :class:`IoFormatError` with a distinct code.
"""

from __future__ import annotations

import json

import numpy as np

from .barycentric import BarycentricModel, SampleGrid
from .tensor import CPFactors, as_complex

GRID_FORMAT = "lraaa-grid/1"
MODEL_FORMAT = "lraaa-model/1"


class IoFormatError(ValueError):
    """Unusable document; ``code`` is one of "malformed", "shape-mismatch",
    "duplicate-point", "unsupported-variant"."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


def _interleave(values: np.ndarray) -> list:
    flat = np.asarray(values, dtype=np.complex128).reshape(-1)
    out = np.empty(2 * flat.size, dtype=float)
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out.tolist()


def _deinterleave(values, what: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise IoFormatError("malformed", f"non-numeric values in {what}") from exc
    if arr.ndim != 1 or arr.size % 2:
        raise IoFormatError("malformed", f"{what} must interleave [re, im] pairs")
    return arr[0::2] + 1j * arr[1::2]


def _pairs(points, what: str) -> np.ndarray:
    try:
        arr = np.asarray(points, dtype=float)
    except (TypeError, ValueError) as exc:
        raise IoFormatError("malformed", f"non-numeric points in {what}") from exc
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise IoFormatError("malformed", f"{what} must be a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def _require(doc: dict, key: str, what: str):
    if not isinstance(doc, dict) or key not in doc:
        raise IoFormatError("malformed", f"missing {key!r} in {what}")
    return doc[key]


def _check_format(doc, expected: str):
    tag = _require(doc, "format", "document")
    if tag != expected:
        raise IoFormatError("malformed", f"expected format {expected!r}, got {tag!r}")


def _load_tensor(doc, what: str) -> np.ndarray:
    shape = _require(doc, "shape", what)
    values = _deinterleave(_require(doc, "values", what), what)
    try:
        shape = tuple(int(s) for s in shape)
    except (TypeError, ValueError) as exc:
        raise IoFormatError("malformed", f"bad shape in {what}") from exc
    if int(np.prod(shape)) != values.size:
        raise IoFormatError(
            "shape-mismatch",
            f"{what}: shape {shape} needs {int(np.prod(shape))} values, "
            f"got {values.size}",
        )
    return values.reshape(shape)


def _dump_tensor(values: np.ndarray) -> dict:
    return {
        "shape": list(np.asarray(values).shape),
        "values": _interleave(values),
        "order": "row-major",
    }


def save_grid(grid: SampleGrid, path):
    doc = {
        "format": GRID_FORMAT,
        "axes": [
            {"name": grid.names[j], "points": [[p.real, p.imag] for p in grid.axes[j]]}
            for j in range(grid.ndim)
        ],
        "data": _dump_tensor(grid.data),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_grid(path) -> SampleGrid:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise IoFormatError("malformed", f"invalid JSON: {exc}") from exc
    _check_format(doc, GRID_FORMAT)
    axes_doc = _require(doc, "axes", "grid")
    if not isinstance(axes_doc, list) or not axes_doc:
        raise IoFormatError("malformed", "grid needs a non-empty axes list")
    axes, names = [], []
    for j, axis in enumerate(axes_doc):
        axes.append(_pairs(_require(axis, "points", f"axis {j}"), f"axis {j}"))
        names.append(axis.get("name", f"z{j + 1}"))
    data = _load_tensor(_require(doc, "data", "grid"), "grid data")
    if data.shape != tuple(len(a) for a in axes):
        raise IoFormatError(
            "shape-mismatch",
            f"data shape {data.shape} does not match axis lengths "
            f"{tuple(len(a) for a in axes)}",
        )
    for j, a in enumerate(axes):
        if len(np.unique(a)) != len(a):
            raise IoFormatError("duplicate-point", f"axis {j} has duplicate points")
    return SampleGrid(axes, data, names=tuple(names))


def save_model(model: BarycentricModel, path):
    if model.is_cp():
        coeffs = {
            "kind": "cp",
            "rank": model.coeffs.rank,
            "factors": [
                {
                    "rows": f.shape[0],
                    "cols": f.shape[1],
                    "values": _interleave(f),
                }
                for f in model.coeffs.factors
            ],
        }
    else:
        coeffs = {"kind": "full", **_dump_tensor(model.coeffs)}
    doc = {
        "format": MODEL_FORMAT,
        "nodes": [[[p.real, p.imag] for p in n] for n in model.nodes],
        "H": _dump_tensor(model.interp),
        "coeffs": coeffs,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> BarycentricModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise IoFormatError("malformed", f"invalid JSON: {exc}") from exc
    _check_format(doc, MODEL_FORMAT)
    nodes_doc = _require(doc, "nodes", "model")
    if not isinstance(nodes_doc, list) or not nodes_doc:
        raise IoFormatError("malformed", "model needs a non-empty nodes list")
    nodes = [_pairs(n, f"nodes {j}") for j, n in enumerate(nodes_doc)]
    interp = _load_tensor(_require(doc, "H", "model"), "model H")
    coeffs_doc = _require(doc, "coeffs", "model")
    kind = _require(coeffs_doc, "kind", "coeffs")
    if kind == "full":
        coeffs = _load_tensor(coeffs_doc, "coefficients")
    elif kind == "cp":
        rank = _require(coeffs_doc, "rank", "coeffs")
        factors = []
        for j, fdoc in enumerate(_require(coeffs_doc, "factors", "coeffs")):
            rows = int(_require(fdoc, "rows", f"factor {j}"))
            cols = int(_require(fdoc, "cols", f"factor {j}"))
            values = _deinterleave(
                _require(fdoc, "values", f"factor {j}"), f"factor {j}"
            )
            if values.size != rows * cols:
                raise IoFormatError(
                    "shape-mismatch", f"factor {j} has {values.size} values"
                )
            factors.append(values.reshape(rows, cols))
        cp = CPFactors(factors)
        if cp.rank != int(rank):
            raise IoFormatError("shape-mismatch", "rank does not match factors")
        coeffs = cp
    else:
        raise IoFormatError("unsupported-variant", f"unknown coeffs kind {kind!r}")
    try:
        return BarycentricModel(nodes, interp, coeffs)
    except ValueError as exc:
        msg = str(exc)
        code = "duplicate-point" if "duplicate" in msg else "shape-mismatch"
        raise IoFormatError(code, msg) from exc


def emit_dat(columns, path, schema: str = "lraaa-table/1"):
    """Whitespace-separated numeric columns with one header comment line
    (16 significant digits).  ``columns`` maps names to equal-length
    sequences."""
    names = list(columns)
    cols = [np.asarray(columns[n], dtype=float) for n in names]
    if cols and any(c.shape != cols[0].shape or c.ndim != 1 for c in cols):
        raise ValueError("columns must be equal-length 1-D sequences")
    with open(path, "w") as fh:
        fh.write("# " + schema + " " + " ".join(names) + "\n")
        for row in zip(*cols):
            fh.write(" ".join(f"{v:.16g}" for v in row) + "\n")


def read_dat(path):
    """Parse a table written by :func:`emit_dat` back into a dict of
    float arrays."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# "):
            raise IoFormatError("malformed", "missing table header")
        names = header[2:].split()[1:]
        rows = [[float(v) for v in line.split()] for line in fh if line.strip()]
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(names))
    return {n: data[:, j] for j, n in enumerate(names)}
