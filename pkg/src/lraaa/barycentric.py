"""Multivariate barycentric rational models on tensor-product grids.

A model is a ratio of two multilinear forms anchored at per-variable
interpolation nodes: numerator and denominator are contractions of the
coefficient tensor (Hadamard-scaled by the interpolated data for the
numerator) against per-variable Cauchy vectors.  Columns of the modified
Cauchy matrix at node-coincident points are unit vectors, which removes
the removable singularities and makes interpolation exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .tensor import (
    MAX_MODES,
    CPFactors,
    as_complex,
    materialize_cp,
    mode_product,
)


class PoleError(ArithmeticError):
    """Denominator vanished at a non-node evaluation point."""

    def __init__(self, point):
        self.point = tuple(point)
        super().__init__(f"denominator is zero at non-node point {self.point}")


def _check_distinct(points: np.ndarray, what: str):
    if len(np.unique(points)) != len(points):
        raise ValueError(f"duplicate {what}")


def modified_cauchy(nodes, points) -> np.ndarray:
    """Modified Cauchy matrix of shape ``(len(nodes), len(points))``.

    Entry ``(i, k)`` is ``1/(points[k] - nodes[i])`` when ``points[k]`` is
    not a node, ``1`` when ``points[k] == nodes[i]`` and ``0`` when
    ``points[k]`` coincides with a different node.  Point/node equality is
    exact bitwise equality of complex values, so columns at node-coincident
    points are standard basis vectors and ``modified_cauchy(l, l)`` is the
    identity.
    """
    nodes = as_complex(np.atleast_1d(nodes))
    points = as_complex(np.atleast_1d(points))
    _check_distinct(nodes, "nodes")
    hit = points[None, :] == nodes[:, None]
    free = ~hit.any(axis=0)
    out = np.zeros((len(nodes), len(points)), dtype=np.complex128)
    if free.any():
        out[:, free] = 1.0 / (points[None, free] - nodes[:, None])
    out[hit] = 1.0
    return out


@dataclass(frozen=True)
class SampleGrid:
    """Tensor-product sample set: per-variable point lists plus the data
    tensor of function samples (shape ``(N_1, ..., N_d)``)."""

    axes: list = field(default_factory=list)
    data: np.ndarray = None
    names: tuple = None

    def __post_init__(self):
        axes = [as_complex(np.atleast_1d(a)) for a in self.axes]
        if not 1 <= len(axes) <= MAX_MODES:
            raise ValueError(f"between 1 and {MAX_MODES} axes are supported")
        for j, a in enumerate(axes):
            _check_distinct(a, f"points on axis {j}")
        data = as_complex(self.data)
        if data.shape != tuple(len(a) for a in axes):
            raise ValueError(
                f"data shape {data.shape} does not match axis lengths "
                f"{tuple(len(a) for a in axes)}"
            )
        names = self.names
        if names is None:
            names = tuple(f"z{j + 1}" for j in range(len(axes)))
        elif len(names) != len(axes):
            raise ValueError("one name per axis required")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "names", tuple(names))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return self.data.shape


Coefficients = Union[np.ndarray, CPFactors]


@dataclass(frozen=True)
class BarycentricModel:
    """Barycentric rational approximant.

    ``nodes[j]`` are the interpolation nodes of variable ``j`` (length
    ``n_j``), ``interp`` is the tensor of interpolated data values at node
    tuples (shape ``(n_1, ..., n_d)``) and ``coeffs`` holds the barycentric
    coefficients, either as a full tensor of the same shape or as
    :class:`CPFactors`.
    """

    nodes: list = field(default_factory=list)
    interp: np.ndarray = None
    coeffs: Coefficients = None

    def __post_init__(self):
        nodes = [as_complex(np.atleast_1d(n)) for n in self.nodes]
        for j, n in enumerate(nodes):
            _check_distinct(n, f"nodes for variable {j}")
        interp = as_complex(self.interp)
        shape = tuple(len(n) for n in nodes)
        if interp.shape != shape:
            raise ValueError(
                f"interpolated-data shape {interp.shape} does not match "
                f"node counts {shape}"
            )
        coeffs = self.coeffs
        if isinstance(coeffs, CPFactors):
            if coeffs.shape != shape:
                raise ValueError("CP factor shapes do not match node counts")
        else:
            coeffs = as_complex(coeffs)
            if coeffs.shape != shape:
                raise ValueError("coefficient shape does not match node counts")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "interp", interp)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def ndim(self) -> int:
        return len(self.nodes)

    @property
    def order(self) -> tuple:
        """Per-variable node counts ``n_j``."""
        return self.interp.shape

    def coeff_tensor(self) -> np.ndarray:
        """Coefficients as a dense tensor (materializes CP factors)."""
        if isinstance(self.coeffs, CPFactors):
            return materialize_cp(self.coeffs)
        return self.coeffs

    def is_cp(self) -> bool:
        return isinstance(self.coeffs, CPFactors)


def _point_cauchy_vectors(model: BarycentricModel, z) -> list:
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    if z.shape != (model.ndim,):
        raise ValueError(f"expected a point in C^{model.ndim}")
    return [modified_cauchy(model.nodes[j], z[j])[:, 0] for j in range(model.ndim)]


def _contract_all(t: np.ndarray, vectors: list) -> complex:
    for v in vectors:
        t = np.tensordot(v, t, axes=(0, 0))
    return complex(t)


def evaluate(model: BarycentricModel, z) -> complex:
    """Evaluate the model at a single point ``z`` in C^d.

    At a full node tuple the corresponding interpolated value is returned
    exactly.  Raises :class:`PoleError` when the denominator vanishes at a
    non-node point.
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    hits = []
    for j in range(model.ndim):
        match = np.flatnonzero(model.nodes[j] == z[j])
        hits.append(match[0] if match.size else None)
    if all(h is not None for h in hits):
        return complex(model.interp[tuple(hits)])

    cvecs = _point_cauchy_vectors(model, z)
    alpha = model.coeff_tensor()
    num = _contract_all(alpha * model.interp, cvecs)
    if model.is_cp():
        den = 0.0 + 0.0j
        for k in range(model.coeffs.rank):
            term = 1.0 + 0.0j
            for j, fac in enumerate(model.coeffs.factors):
                term *= complex(cvecs[j] @ fac[:, k])
            den += term
    else:
        den = _contract_all(alpha, cvecs)
    if den == 0:
        raise PoleError(z)
    return num / den


class GridEvaluation(NamedTuple):
    """Batched evaluation of a model over a tensor-product grid."""

    values: np.ndarray
    numerator: np.ndarray
    denominator: np.ndarray


def grid_evaluation(model: BarycentricModel, grid: SampleGrid) -> GridEvaluation:
    """Evaluate numerator, denominator and their ratio over a full grid.

    Numerator and denominator are mode-k products of the (Hadamard-scaled)
    coefficient tensor with the per-axis modified Cauchy matrices; the CP
    denominator uses the separable per-axis transfer fast path.  Node
    tuples present in the grid are patched with the interpolated values so
    interpolation is exact.  A zero denominator anywhere else raises
    :class:`PoleError`.
    """
    if grid.ndim != model.ndim:
        raise ValueError("grid and model dimension mismatch")
    cauchy_t = [
        modified_cauchy(model.nodes[j], grid.axes[j]).T for j in range(model.ndim)
    ]

    num = model.coeff_tensor() * model.interp
    for j, ct in enumerate(cauchy_t):
        num = mode_product(num, ct, j)

    if model.is_cp():
        transfers = [ct @ f for ct, f in zip(cauchy_t, model.coeffs.factors)]
        den = materialize_cp(CPFactors(transfers))
    else:
        den = model.coeff_tensor()
        for j, ct in enumerate(cauchy_t):
            den = mode_product(den, ct, j)

    nonzero = den != 0
    values = np.zeros_like(num)
    np.divide(num, den, out=values, where=nonzero)

    # Node sub-grid: exact interpolation, independent of the coefficients.
    grid_idx, node_idx = [], []
    for j in range(model.ndim):
        hit = grid.axes[j][:, None] == model.nodes[j][None, :]
        gi, ni = np.nonzero(hit)
        grid_idx.append(gi)
        node_idx.append(ni)
    patched = np.zeros(grid.shape, dtype=bool)
    if all(gi.size for gi in grid_idx):
        values[np.ix_(*grid_idx)] = model.interp[np.ix_(*node_idx)]
        patched[np.ix_(*grid_idx)] = True

    bad = ~nonzero & ~patched
    if bad.any():
        where = np.unravel_index(np.argmax(bad), bad.shape)
        point = tuple(grid.axes[j][where[j]] for j in range(model.ndim))
        raise PoleError(point)
    return GridEvaluation(values, num, den)


def evaluate_grid(model: BarycentricModel, grid: SampleGrid) -> np.ndarray:
    """Model values over the full tensor-product grid."""
    return grid_evaluation(model, grid).values


def relative_max_error(approx: np.ndarray, data: np.ndarray) -> float:
    """Maximum entrywise relative error ``|D - R| / |D|``.

    Entries where the data is exactly zero are skipped; for all-zero data
    the absolute maximum ``|R|`` is returned instead.
    """
    approx = np.asarray(approx)
    data = np.asarray(data)
    if approx.shape != data.shape:
        raise ValueError("shape mismatch")
    mask = data != 0
    if not mask.any():
        return float(np.abs(approx).max()) if approx.size else 0.0
    diff = np.abs(data[mask] - approx[mask]) / np.abs(data[mask])
    return float(diff.max())


def relative_ls_error(approx: np.ndarray, data: np.ndarray) -> float:
    """Relative squared-error sum ``sum |D - R|^2 / sum |D|^2`` (absolute
    sum when the data is identically zero)."""
    approx = np.asarray(approx)
    data = np.asarray(data)
    if approx.shape != data.shape:
        raise ValueError("shape mismatch")
    num = float(np.sum(np.abs(data - approx) ** 2))
    den = float(np.sum(np.abs(data) ** 2))
    return num if den == 0 else num / den


def relative_linearized_ls_error(model: BarycentricModel, grid: SampleGrid) -> float:
    """Linearized relative LS error over the grid:
    ``sum |d(z) f(z) - n(z)|^2 / sum |f(z)|^2``."""
    ev = grid_evaluation(model, grid)
    resid = float(np.sum(np.abs(ev.denominator * grid.data - ev.numerator) ** 2))
    den = float(np.sum(np.abs(grid.data) ** 2))
    return resid if den == 0 else resid / den
