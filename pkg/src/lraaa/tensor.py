"""Dense complex tensors, the row-major vectorization convention, mode-k
products and CP factor containers.

All tensors in this package are plain :class:`numpy.ndarray` objects in
complex double precision, stored C-contiguously (row-major, last index
varies fastest).  ``vectorize`` and ``unvectorize`` pin that convention;
every other module inherits it, in particular the ordering of Kronecker
products: for vectors ``a (x) b`` the second index varies fastest, so
``vectorize(outer(a, b)) == kron(a, b)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Largest supported number of tensor modes.
MAX_MODES = 8

_COMPLEX = np.complex128


def as_complex(a) -> np.ndarray:
    """Return ``a`` as a C-contiguous complex128 array (real inputs are
    lifted with zero imaginary part)."""
    return np.ascontiguousarray(a, dtype=_COMPLEX)


def vectorize(t: np.ndarray) -> np.ndarray:
    """Row-major vectorization: ``vectorize(t)[n2*(i1) + i2] = t[i1, i2]``
    for a matrix, and the analogous last-index-fastest rule for d modes."""
    return np.ascontiguousarray(t).reshape(-1)


def unvectorize(v: np.ndarray, shape) -> np.ndarray:
    """Inverse of :func:`vectorize` for the given shape."""
    v = np.asarray(v)
    shape = tuple(int(s) for s in shape)
    if v.size != int(np.prod(shape)):
        raise ValueError(f"cannot reshape {v.size} values into {shape}")
    return v.reshape(shape)


def mode_product(t: np.ndarray, m: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` tensor-matrix product (0-based mode index).

    Replaces axis ``mode`` of ``t`` (length ``n``) by ``m @ .`` along that
    axis, so the result has ``m.shape[0]`` in that position.  Requires
    ``m.shape[1] == t.shape[mode]``.
    """
    t = np.asarray(t)
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError("mode_product expects a matrix")
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for {t.ndim}-way tensor")
    if m.shape[1] != t.shape[mode]:
        raise ValueError(
            f"dimension mismatch: matrix has {m.shape[1]} columns, "
            f"tensor axis {mode} has length {t.shape[mode]}"
        )
    out = np.tensordot(m, t, axes=(1, mode))
    # tensordot puts the new axis first; move it back into place.
    return np.ascontiguousarray(np.moveaxis(out, 0, mode))


@dataclass(frozen=True)
class CPFactors:
    """CP (sum of rank-one terms) representation of a coefficient tensor.

    ``factors[j]`` has shape ``(n_j, rank)``; term ``k`` of the represented
    tensor is the outer product of the columns ``factors[j][:, k]``.
    """

    factors: list = field(default_factory=list)

    def __post_init__(self):
        if not self.factors:
            raise ValueError("CPFactors needs at least one factor")
        if len(self.factors) > MAX_MODES:
            raise ValueError(f"at most {MAX_MODES} modes are supported")
        mats = [as_complex(f) for f in self.factors]
        ranks = {f.shape[1] for f in mats}
        if any(f.ndim != 2 for f in mats) or len(ranks) != 1:
            raise ValueError("factors must be matrices sharing one column count")
        if mats[0].shape[1] < 1:
            raise ValueError("CP rank must be at least 1")
        object.__setattr__(self, "factors", mats)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def ndim(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    def copy(self) -> "CPFactors":
        return CPFactors([f.copy() for f in self.factors])


def materialize_cp(f: CPFactors) -> np.ndarray:
    """Dense tensor represented by CP factors:
    ``vec(out) = sum_k factors[0][:,k] (x) ... (x) factors[d-1][:,k]``."""
    subs = []
    letters = "abcdefgh"
    for j in range(f.ndim):
        subs.append(f"{letters[j]}z")
    spec = ",".join(subs) + "->" + letters[: f.ndim]
    return np.einsum(spec, *f.factors, optimize=True)


def cp_frobenius_norm(f: CPFactors) -> float:
    """Frobenius norm of the materialized tensor, computed without
    materialization via the Gram identity
    ``|a|^2 = sum_{k,l} prod_j <factors[j][:,k], factors[j][:,l]>``
    (inner products conjugate the left argument)."""
    gram = np.ones((f.rank, f.rank), dtype=_COMPLEX)
    for fac in f.factors:
        gram *= fac.conj().T @ fac
    total = gram.sum().real
    return float(np.sqrt(max(total, 0.0)))


def khatri_rao(factors: list, skip: int | None = None) -> np.ndarray:
    """Column-wise Kronecker product of the given factor matrices, in mode
    order, optionally skipping one mode.  Column ``k`` of the result is
    ``factors[0][:,k] (x) ... (x) factors[-1][:,k]`` under the row-major
    Kronecker convention."""
    mats = [f for j, f in enumerate(factors) if j != skip]
    if not mats:
        raise ValueError("khatri_rao of no factors")
    out = mats[0]
    for m in mats[1:]:
        r = out.shape[1]
        out = (out[:, None, :] * m[None, :, :]).reshape(-1, r)
    return out
