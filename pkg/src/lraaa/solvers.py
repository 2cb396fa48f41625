"""Norm-constrained linear least-squares kernels and CP rank truncation.

Both solvers minimize ``|L x|_2^2`` subject to a unit-norm constraint on a
structured image of ``x``: the full solver under ``|x| = 1`` (smallest
right singular vector), the constrained solver under ``x^H G x = 1`` with
``G`` the Hermitian Gram of the CP structure matrix, reduced to the full
problem by a Cholesky substitution.  Solutions are phase-normalized so the
largest-magnitude entry is real positive, which makes results
deterministic and reports reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .tensor import CPFactors, khatri_rao

#: Relative Cholesky pivot threshold below which the diagonal-shift guard
#: kicks in.
_PIVOT_TOL = 1e-14


class SolverError(ArithmeticError):
    """A dense factorization failed."""


class RankDeficiencyError(SolverError):
    """The constraint Gram is singular; rank truncation must be applied
    before solving."""


@dataclass(frozen=True)
class ConstrainedLsSolution:
    """Solution of a norm-constrained LS problem.

    ``objective`` is ``|L x|_2^2`` at the solution, ``constraint_residual``
    is ``| |J x|_2 - 1 |`` and ``effective_rank`` records the CP size the
    solve was performed at.  ``shifted`` flags the diagonal-shift guard.
    """

    solution: np.ndarray
    objective: float
    constraint_residual: float
    effective_rank: int
    shifted: bool = False


def phase_normalize(x: np.ndarray) -> np.ndarray:
    """Multiply by the unit complex scalar that makes the largest-magnitude
    entry real positive."""
    x = np.asarray(x)
    i = int(np.argmax(np.abs(x)))
    if x[i] == 0:
        return x
    return x * (np.abs(x[i]) / x[i])


def solve_full(mat: np.ndarray) -> ConstrainedLsSolution:
    """Minimize ``|L x|`` over unit vectors: smallest right singular
    vector of ``L`` (ties resolved by the factorization's last index,
    deterministic for fixed input)."""
    mat = np.atleast_2d(np.asarray(mat, dtype=np.complex128))
    try:
        _, sing, vh = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise SolverError("SVD failed") from exc
    x = phase_normalize(vh[-1].conj())
    objective = float(sing[-1] ** 2)
    residual = abs(float(np.linalg.norm(x)) - 1.0)
    return ConstrainedLsSolution(x, objective, residual, mat.shape[1])


def _cholesky_guard(gram: np.ndarray):
    """Upper Cholesky factor of the constraint Gram with the near-singular
    diagonal-shift guard; raises RankDeficiencyError for outright singular
    input (truncation belongs upstream)."""
    gram = 0.5 * (gram + gram.conj().T)
    dim = gram.shape[0]
    try:
        upper = scipy.linalg.cholesky(gram, lower=False)
    except scipy.linalg.LinAlgError as exc:
        raise RankDeficiencyError(
            "constraint Gram is singular; apply rank truncation first"
        ) from exc
    pivots = np.abs(np.diag(upper)) ** 2
    if pivots.min() >= _PIVOT_TOL * pivots.max():
        return upper, False
    shift = _PIVOT_TOL * float(np.trace(gram).real) / dim
    try:
        upper = scipy.linalg.cholesky(
            gram + shift * np.eye(dim, dtype=gram.dtype), lower=False
        )
    except scipy.linalg.LinAlgError as exc:
        raise RankDeficiencyError(
            "constraint Gram is numerically singular despite shift; "
            "apply rank truncation first"
        ) from exc
    return upper, True


def _finish(x, objective, gram, effective_rank, shifted):
    x = phase_normalize(x)
    xgx = float(np.real(x.conj() @ (gram @ x)))
    residual = abs(np.sqrt(max(xgx, 0.0)) - 1.0)
    return ConstrainedLsSolution(x, float(objective), residual, effective_rank, shifted)


def solve_constrained(
    lc: np.ndarray, gram: np.ndarray, effective_rank: int | None = None
) -> ConstrainedLsSolution:
    """Minimize ``|Lc x|^2`` subject to ``x^H G x = 1``.

    Substitutes ``y = R x`` with ``G = R^H R`` (guarded Cholesky), solves
    the unit-norm problem for ``Lc R^{-1}`` by smallest singular vector and
    back-substitutes; equivalent to the generalized-SVD solution for
    full-rank constraints.
    """
    lc = np.atleast_2d(np.asarray(lc, dtype=np.complex128))
    gram = np.asarray(gram, dtype=np.complex128)
    upper, shifted = _cholesky_guard(gram)
    reduced = scipy.linalg.solve_triangular(
        upper, lc.T, trans="T", lower=False
    ).T  # Lc R^{-1}
    try:
        _, sing, vh = np.linalg.svd(reduced, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SolverError("SVD failed") from exc
    y = vh[-1].conj()
    x = scipy.linalg.solve_triangular(upper, y, lower=False)
    rank = effective_rank if effective_rank is not None else lc.shape[1]
    return _finish(x, sing[-1] ** 2, gram, rank, shifted)


def reduced_spectrum(loewner_gram: np.ndarray, gram: np.ndarray):
    """Cholesky reduction of the Gram-form constrained problem: returns
    ``(upper, vals, vecs, shifted)`` where ``gram = upper^H upper`` and
    ``vals``/``vecs`` is the ascending eigendecomposition of
    ``upper^{-H} loewner_gram upper^{-1}``."""
    gl = np.asarray(loewner_gram, dtype=np.complex128)
    gram = np.asarray(gram, dtype=np.complex128)
    upper, shifted = _cholesky_guard(gram)
    half = scipy.linalg.solve_triangular(upper, gl.T, trans="T", lower=False).T
    reduced = scipy.linalg.solve_triangular(upper, half, trans="C", lower=False)
    reduced = 0.5 * (reduced + reduced.conj().T)
    try:
        vals, vecs = np.linalg.eigh(reduced)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SolverError("eigendecomposition failed") from exc
    return upper, vals, vecs, shifted


def solve_constrained_gram(
    loewner_gram: np.ndarray,
    gram: np.ndarray,
    effective_rank: int | None = None,
) -> ConstrainedLsSolution:
    """Same problem as :func:`solve_constrained`, but from the Hermitian
    Gram ``Lc^H Lc`` instead of the tall matrix: the reduced problem
    becomes a Hermitian eigenproblem whose smallest eigenpair gives the
    solution.  Used by the streaming ALS path on large grids."""
    gl = np.asarray(loewner_gram, dtype=np.complex128)
    upper, vals, vecs, shifted = reduced_spectrum(gl, gram)
    y = vecs[:, 0]
    x = scipy.linalg.solve_triangular(upper, y, lower=False)
    rank = effective_rank if effective_rank is not None else gl.shape[1]
    return _finish(x, max(float(vals[0]), 0.0), gram, rank, shifted)


def truncate_rank(
    factors: CPFactors, mode: int, tol: float = 1e-12
) -> CPFactors:
    """Reduce the CP size when the off-mode Khatri-Rao structure is
    numerically rank-deficient (which makes the constrained solve for
    ``mode`` ill-posed).

    Dependent Khatri-Rao columns are expressed in terms of a pivoted
    independent subset and absorbed into the mode factor, so the
    materialized coefficient tensor is preserved to within ``tol`` times
    its norm.  Identity when the structure has full column rank.
    """
    if not 0 <= mode < factors.ndim:
        raise ValueError(f"mode {mode} out of range")
    if tol <= 0:
        raise ValueError("tol must be positive")
    r = factors.rank
    if r == 1:
        return factors
    if factors.ndim == 1:
        kr = np.ones((1, r), dtype=np.complex128)
    else:
        kr = khatri_rao(factors.factors, skip=mode)
    _, upper, piv = scipy.linalg.qr(kr, mode="economic", pivoting=True)
    diag = np.abs(np.diag(upper))
    if diag.size == 0 or diag[0] == 0:
        rank = 1
    else:
        rank = max(1, int(np.sum(diag > tol * diag[0])))
    if rank >= r:
        return factors
    kept = np.sort(piv[:rank])
    dropped = np.sort(piv[rank:])
    coeffs, *_ = np.linalg.lstsq(kr[:, kept], kr[:, dropped], rcond=None)
    new_factors = [f[:, kept].copy() for f in factors.factors]
    new_factors[mode] = (
        factors.factors[mode][:, kept]
        + factors.factors[mode][:, dropped] @ coeffs.T
    )
    return CPFactors(new_factors)
