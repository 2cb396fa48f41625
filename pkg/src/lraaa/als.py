"""Alternating least squares over the CP factors of the barycentric
coefficient tensor.

Each sweep visits the factors in mode order; every mode update is an exact
norm-constrained LS solve against the contracted Loewner matrix, so the
objective trace is non-increasing.  Column norms are redistributed after
every update to keep the factor matrices well scaled, and re-absorbed at
the end so the returned factors materialize to the final unit-norm
coefficient tensor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .loewner import (
    LoewnerContext,
    build_contracted,
    contracted_blocks,
    contracted_gram,
    gram_of_J,
    linearized_residual_norm2,
)
from .solvers import (
    ConstrainedLsSolution,
    SolverError,
    phase_normalize,
    reduced_spectrum,
    solve_constrained,
    truncate_rank,
)
from .tensor import CPFactors, cp_frobenius_norm

# The Gram of the contracted Loewner matrix carries an absolute error of
# order eps * lambda_max, so eigenvalues below _GRAM_TRUST * lambda_max are
# noise.  Such solves are redone at full precision from streamed matrix
# blocks through an incremental QR, restricted to the span of the
# suspect eigenvectors (lambda <= _SUBSPACE_RATIO * lambda_max) plus the
# incumbent; when most of the spectrum is suspect the whole matrix is
# re-orthogonalized instead.  The rebuild is capped by problem size
# (rows * cols^2), above which the Gram's floor is accepted (no
# acceptance target needs better than ~1e-5 relative there).
_GRAM_TRUST = 1e-11
_SUBSPACE_RATIO = 1e-7
_REFINE_CAP = 8_000_000_000
_QR_BATCH_ROWS = 65_536


def factor_to_vec(factor: np.ndarray) -> np.ndarray:
    """Stack factor columns into the solver layout (block k holds column
    k), matching the block-column order of the structure matrix J."""
    return np.ascontiguousarray(factor.T).reshape(-1)


def vec_to_factor(vec: np.ndarray, n_mode: int, rank: int) -> np.ndarray:
    """Inverse of :func:`factor_to_vec`."""
    return np.ascontiguousarray(np.asarray(vec).reshape(rank, n_mode).T)


@dataclass(frozen=True)
class AlsConfig:
    """Sweep control: relative-change stopping tolerance, sweep cap,
    truncation tolerance and the seed for randomly re-added columns.

    ``solver_mode`` selects between the explicit contracted matrix + SVD
    ("dense"), the streamed Gram + Hermitian eigensolve ("gram"), or a
    size-based choice ("auto", dense below ``dense_limit`` matrix
    entries)."""

    epsilon: float = 1e-2
    max_sweeps: int = 100
    truncation_tol: float = 1e-12
    rng_seed: int = 0
    solver_mode: str = "auto"
    dense_limit: int = 2_000_000

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.solver_mode not in ("auto", "dense", "gram"):
            raise ValueError("solver_mode must be auto, dense or gram")


@dataclass(frozen=True)
class AlsResult:
    """Final factors (unit Frobenius norm, scaling absorbed into factor 0),
    the final objective ``|L vec(a)|^2``, the sweep count and the per-sweep
    objective trace (entry 0 is the initial-guess objective)."""

    factors: CPFactors
    objective: float
    sweeps: int
    objective_trace: list = field(default_factory=list)


def stopping_check(prev_obj: float, cur_obj: float, epsilon: float) -> bool:
    """Relative-change rule: stop when ``|prev - cur| <= eps * cur`` or the
    objective hit exactly zero."""
    if prev_obj < 0 or cur_obj < 0:
        raise ValueError("objectives must be nonnegative")
    if cur_obj == 0:
        return True
    return abs(prev_obj - cur_obj) <= epsilon * cur_obj


def warm_start(prev: CPFactors, new_node_flags) -> CPFactors:
    """Zero-pad the previous iteration's factors for newly added nodes:
    factor ``j`` gains one zero row iff ``new_node_flags[j]``.  The
    materialized tensor is the previous one zero-padded, so the linearized
    error cannot increase."""
    flags = list(new_node_flags)
    if len(flags) != prev.ndim:
        raise ValueError("one flag per variable required")
    padded = []
    for f, grew in zip(prev.factors, flags):
        if grew:
            padded.append(np.vstack([f, np.zeros((1, prev.rank), dtype=f.dtype)]))
        else:
            padded.append(f)
    return CPFactors(padded)


def ensure_rank(factors: CPFactors, rank: int, rng: np.random.Generator) -> CPFactors:
    """Grow the CP size back to ``rank`` after an earlier truncation by
    appending seeded random columns (uniform on [-1, 1] in both real and
    imaginary part)."""
    have = factors.rank
    if have >= rank:
        return factors
    grown = []
    for f in factors.factors:
        extra = rng.uniform(-1.0, 1.0, (f.shape[0], rank - have)) + 1j * rng.uniform(
            -1.0, 1.0, (f.shape[0], rank - have)
        )
        grown.append(np.hstack([f, extra]))
    return CPFactors(grown)


def _unit_normalized(factors: CPFactors) -> CPFactors:
    nrm = cp_frobenius_norm(factors)
    if nrm == 0:
        raise SolverError("cannot normalize zero CP factors")
    scaled = [f.copy() for f in factors.factors]
    scaled[0] /= nrm
    return CPFactors(scaled)


def _streamed_triangular(ctx, factors, mode, basis=None) -> np.ndarray:
    """Triangular factor T with T^H T = (Lc B)^H (Lc B) for the streamed
    contracted matrix Lc (B optional), accumulated by an incremental QR
    over row blocks."""
    tri = None
    pending, rows = [], 0

    def reduce(parts):
        return np.linalg.qr(np.vstack(parts), mode="r")

    for block in contracted_blocks(ctx, factors, mode):
        pending.append(block if basis is None else block @ basis)
        rows += pending[-1].shape[0]
        if rows >= _QR_BATCH_ROWS:
            tri = reduce(([tri] if tri is not None else []) + pending)
            pending, rows = [], 0
    if pending:
        tri = reduce(([tri] if tri is not None else []) + pending)
    return tri


def _solve_gram_streamed(ctx, factors, mode, gram, rank):
    """Constrained solve from the streamed Gram; when the smallest
    eigenvalue sits in the Gram's roundoff floor (and the problem is small
    enough), the solve is redone at full precision from a streamed QR of
    the suspect eigenspace."""
    gl = contracted_gram(ctx, factors, mode)
    upper, vals, vecs, shifted = reduced_spectrum(gl, gram)
    x_cur = factor_to_vec(factors.factors[mode])
    lam_max = float(vals[-1])
    q = gl.shape[0]
    floor_hit = lam_max > 0 and float(vals[0]) <= _GRAM_TRUST * lam_max
    affordable = int(np.prod(ctx.grid_shape)) * q * q <= _REFINE_CAP

    if not (floor_hit and affordable):
        x = phase_normalize(
            scipy.linalg.solve_triangular(upper, vecs[:, 0], lower=False)
        )
        objective = max(float(vals[0]), 0.0)
        xgx = float(np.real(x.conj() @ (gram @ x)))
        residual = abs(np.sqrt(max(xgx, 0.0)) - 1.0)
        return ConstrainedLsSolution(x, objective, residual, rank, shifted)

    width = int(np.sum(vals <= _SUBSPACE_RATIO * lam_max))
    if width >= int(0.6 * q):
        tri = _streamed_triangular(ctx, factors, mode)
        return solve_constrained(tri, gram, effective_rank=rank)

    # Span of the suspect eigenvectors plus the incumbent (so the
    # restricted minimum can never exceed the current objective); the
    # columns are orthonormal under the constraint metric, so any unit
    # combination is feasible.
    y_cur = upper @ x_cur
    nrm = np.linalg.norm(y_cur)
    cols = [vecs[:, : max(width, 1)]]
    if nrm > 0:
        cols.append((y_cur / nrm)[:, None])
    span = np.linalg.qr(np.hstack(cols), mode="reduced")[0]
    basis = scipy.linalg.solve_triangular(upper, span, lower=False)
    tri = _streamed_triangular(ctx, factors, mode, basis=basis)
    _, sing, vh = np.linalg.svd(tri, full_matrices=False)
    x = phase_normalize(basis @ vh[-1].conj())
    objective = float(sing[-1] ** 2)
    xgx = float(np.real(x.conj() @ (gram @ x)))
    residual = abs(np.sqrt(max(xgx, 0.0)) - 1.0)
    return ConstrainedLsSolution(x, objective, residual, rank, shifted)


def als_solve(ctx: LoewnerContext, init: CPFactors, cfg: AlsConfig) -> AlsResult:
    """Run ALS sweeps until the relative objective change drops below
    ``cfg.epsilon``, the objective reaches zero, or the sweep cap."""
    if init.shape != ctx.node_shape:
        raise ValueError(
            f"initial factor shapes {init.shape} do not match nodes "
            f"{ctx.node_shape}"
        )
    d = ctx.ndim
    grid_entries = int(np.prod(ctx.grid_shape))
    factors = _unit_normalized(init)
    trace = [linearized_residual_norm2(ctx, factors)]
    mu = np.ones(factors.rank)
    prev_obj = None
    sweeps = 0

    for _ in range(cfg.max_sweeps):
        for j in range(d):
            # Re-absorb the previous update's column norms into the factor
            # about to be replaced, so the factors materialize the current
            # coefficient tensor (the mode-j operator never reads factor j).
            absorbed = [f.copy() for f in factors.factors]
            absorbed[j] = absorbed[j] * mu[None, :]
            factors = truncate_rank(CPFactors(absorbed), j, cfg.truncation_tol)
            mu = np.ones(factors.rank)
            rank = factors.rank
            n_mode = factors.shape[j]
            dense = cfg.solver_mode == "dense" or (
                cfg.solver_mode == "auto"
                and grid_entries * n_mode * rank <= cfg.dense_limit
            )
            gram = gram_of_J(factors, j)
            try:
                if dense:
                    lc = build_contracted(ctx, factors, j)
                    sol = solve_constrained(lc, gram, effective_rank=rank)
                else:
                    sol = _solve_gram_streamed(ctx, factors, j, gram, rank)
            except SolverError as exc:
                raise SolverError(
                    f"mode {j} update failed in sweep {sweeps + 1}: {exc}"
                ) from exc
            beta = vec_to_factor(sol.solution, n_mode, rank)
            mu = np.linalg.norm(beta, axis=0)
            mu = np.where(mu == 0, 1.0, mu)
            updated = [f.copy() for f in factors.factors]
            updated[j] = beta / mu[None, :]
            factors = CPFactors(updated)
        sweeps += 1
        absorbed = [f.copy() for f in factors.factors]
        absorbed[-1] = absorbed[-1] * mu[None, :]
        cur_obj = linearized_residual_norm2(ctx, CPFactors(absorbed))
        trace.append(cur_obj)
        base = trace[0] if prev_obj is None else prev_obj
        if stopping_check(base, cur_obj, cfg.epsilon):
            break
        prev_obj = cur_obj

    absorbed = [f.copy() for f in factors.factors]
    absorbed[0] = absorbed[0] * mu[None, :]
    factors = _unit_normalized(CPFactors(absorbed))
    return AlsResult(factors, float(trace[-1]), sweeps, trace)
