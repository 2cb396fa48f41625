"""Higher-order Loewner matrices and their CP-contracted forms.

The full matrix acts on the vectorized coefficient tensor and returns the
linearized residuals ``d(z) f(z) - n(z)`` over the whole sample grid:

    L = diag(vec(D)) [C1 (x) ... (x) Cd]^T - [C1 (x) ... (x) Cd]^T diag(vec(H))

Contracted matrices ``L @ J(mode)`` restrict the action to a single CP
factor with the others fixed.  Three builders are provided:

* :func:`build_full` -- the explicit matrix, memory-budgeted (testing and
  the baseline full algorithm).
* :func:`build_contracted` -- the explicit contracted matrix, assembled by
  reshaping the structured ``J`` matrix into a tensor, applying per-axis
  mode products and row-scaling with vec(D)/vec(H); peak memory is
  ``O(prod(N) * n_j * r)``, never ``prod(N) * prod(n)``.
* :func:`contracted_gram` -- the Gram ``(L @ J)^H (L @ J)`` assembled
  directly from the separable structure without materializing any
  ``prod(N)``-row matrix; this is what makes ALS affordable on large
  grids.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .barycentric import SampleGrid, modified_cauchy
from .tensor import (
    CPFactors,
    as_complex,
    khatri_rao,
    materialize_cp,
    mode_product,
    vectorize,
)

#: Refuse explicit builders above this many complex entries unless overridden.
DEFAULT_MEMORY_BUDGET = 200_000_000

_BUDGET_ENV = "LRAAA_MEMORY_BUDGET"


class MemoryBudgetError(MemoryError):
    """An explicit Loewner build would exceed the memory budget."""

    def __init__(self, entries: int, budget: int):
        self.entries = entries
        self.budget = budget
        super().__init__(
            f"explicit Loewner build needs {entries:.3g} complex entries, "
            f"budget is {budget:.3g}; use the low-rank (contracted) path"
        )


def memory_budget(override: int | None = None) -> int:
    """Active entry budget: explicit override, else the
    LRAAA_MEMORY_BUDGET environment variable, else the default."""
    if override is not None:
        return int(override)
    env = os.environ.get(_BUDGET_ENV)
    return int(float(env)) if env else DEFAULT_MEMORY_BUDGET


# Peak scratch tracking (entries of the largest arrays allocated by the
# builders); tests use this to assert the memory contract.
_peak_scratch = 0


def _track(entries: int):
    global _peak_scratch
    if entries > _peak_scratch:
        _peak_scratch = int(entries)


def peak_scratch_entries() -> int:
    return _peak_scratch


def reset_peak_scratch():
    global _peak_scratch
    _peak_scratch = 0


@dataclass(frozen=True)
class LoewnerContext:
    """Per-axis modified Cauchy matrices plus the data and interpolated
    tensors for a fixed (grid, nodes) pair."""

    cauchy: list = field(default_factory=list)  # C^(j), shape (n_j, N_j)
    data: np.ndarray = None  # D, shape (N_1, ..., N_d)
    interp: np.ndarray = None  # H, shape (n_1, ..., n_d)

    @classmethod
    def from_grid(cls, grid: SampleGrid, nodes: list) -> "LoewnerContext":
        """Build the context for nodes drawn from the grid axes (exact
        complex equality; a node missing from its axis is an error)."""
        nodes = [as_complex(np.atleast_1d(n)) for n in nodes]
        if len(nodes) != grid.ndim:
            raise ValueError("one node list per grid axis required")
        positions = []
        for j, lam in enumerate(nodes):
            hit = lam[:, None] == grid.axes[j][None, :]
            if not hit.any(axis=1).all():
                raise ValueError(f"node missing from grid axis {j}")
            positions.append(np.argmax(hit, axis=1))
        cauchy = [modified_cauchy(nodes[j], grid.axes[j]) for j in range(grid.ndim)]
        interp = grid.data[np.ix_(*positions)]
        return cls(cauchy, grid.data, interp)

    @property
    def ndim(self) -> int:
        return len(self.cauchy)

    @property
    def grid_shape(self) -> tuple:
        return self.data.shape

    @property
    def node_shape(self) -> tuple:
        return self.interp.shape


def _check_factors(ctx: LoewnerContext, factors: CPFactors, mode: int):
    if factors.shape != ctx.node_shape:
        raise ValueError(
            f"factor shapes {factors.shape} do not match node counts "
            f"{ctx.node_shape}"
        )
    if not 0 <= mode < ctx.ndim:
        raise ValueError(f"mode {mode} out of range")


def build_full(ctx: LoewnerContext, budget: int | None = None) -> np.ndarray:
    """Explicit Loewner matrix of shape ``(prod(N), prod(n))``."""
    rows = int(np.prod(ctx.grid_shape))
    cols = int(np.prod(ctx.node_shape))
    limit = memory_budget(budget)
    if rows * cols > limit:
        raise MemoryBudgetError(rows * cols, limit)
    kron = ctx.cauchy[0].T
    for c in ctx.cauchy[1:]:
        kron = np.kron(kron, c.T)
    _track(2 * rows * cols)
    return vectorize(ctx.data)[:, None] * kron - kron * vectorize(ctx.interp)[None, :]


def build_J(factors: CPFactors, mode: int, budget: int | None = None) -> np.ndarray:
    """Explicit block-column matrix mapping one vectorized CP factor to the
    vectorized coefficient tensor; block ``k`` is the Kronecker product of
    the other factors' ``k``-th columns with an identity in slot ``mode``.

    The matching factor vectorization stacks columns: block ``k`` of the
    input vector is ``factors[mode][:, k]``.
    """
    if not 0 <= mode < factors.ndim:
        raise ValueError(f"mode {mode} out of range")
    n_mode = factors.shape[mode]
    rows = int(np.prod(factors.shape))
    limit = memory_budget(budget)
    if rows * n_mode * factors.rank > limit:
        raise MemoryBudgetError(rows * n_mode * factors.rank, limit)
    eye = np.eye(n_mode, dtype=np.complex128)
    blocks = []
    for k in range(factors.rank):
        block = np.ones((1, 1), dtype=np.complex128)
        for j, f in enumerate(factors.factors):
            block = np.kron(block, eye if j == mode else f[:, k : k + 1])
        blocks.append(block)
    return np.hstack(blocks)


def gram_of_J(factors: CPFactors, mode: int) -> np.ndarray:
    """Hermitian Gram ``J^H J`` computed from factor Grams: block ``(k, l)``
    is ``prod_{m != mode} <f_m[:,k], f_m[:,l]> * I``."""
    if not 0 <= mode < factors.ndim:
        raise ValueError(f"mode {mode} out of range")
    r = factors.rank
    gram = np.ones((r, r), dtype=np.complex128)
    for j, f in enumerate(factors.factors):
        if j != mode:
            gram *= f.conj().T @ f
    n_mode = factors.shape[mode]
    out = np.kron(gram, np.eye(n_mode, dtype=np.complex128))
    return 0.5 * (out + out.conj().T)


def _j_tensor(factors: CPFactors, mode: int) -> np.ndarray:
    """The J matrix reshaped into a tensor of shape ``(*n, n_mode * r)``
    with trailing column order (k, c), c fastest."""
    d = factors.ndim
    letters = "abcdefgh"
    n_mode = factors.shape[mode]
    eye = np.eye(n_mode, dtype=np.complex128)
    if d == 1:
        jt = np.repeat(eye[:, None, :], factors.rank, axis=1)
        return jt.reshape(n_mode, factors.rank * n_mode)
    operands, subs = [], []
    for j, f in enumerate(factors.factors):
        if j == mode:
            operands.append(eye)
            subs.append(f"{letters[j]}y")
        else:
            operands.append(f)
            subs.append(f"{letters[j]}k")
    spec = ",".join(subs) + "->" + letters[:d] + "ky"
    jt = np.einsum(spec, *operands, optimize=True)
    return jt.reshape(*factors.shape, factors.rank * n_mode)


def build_contracted(
    ctx: LoewnerContext,
    factors: CPFactors,
    mode: int,
    budget: int | None = None,
) -> np.ndarray:
    """Explicit contracted Loewner matrix ``L @ J(mode)`` of shape
    ``(prod(N), n_mode * r)``.

    Assembled without forming ``L``: the J matrix is reshaped into a
    tensor, the per-axis Cauchy transposes are applied as mode products
    (once plain for the data term, once pre-scaled by the interpolated
    tensor for the other term) and the data scaling is applied row-wise.
    """
    _check_factors(ctx, factors, mode)
    rows = int(np.prod(ctx.grid_shape))
    q = factors.shape[mode] * factors.rank
    limit = memory_budget(budget)
    if 2 * rows * q > limit:
        raise MemoryBudgetError(2 * rows * q, limit)

    jt = _j_tensor(factors, mode)
    stacked = np.concatenate([jt, jt * ctx.interp[..., None]], axis=-1)
    for j, c in enumerate(ctx.cauchy):
        stacked = mode_product(stacked, c.T, j)
    _track(stacked.size)
    left = stacked[..., :q].reshape(rows, q)
    right = stacked[..., q:].reshape(rows, q)
    return vectorize(ctx.data)[:, None] * left - right


def _offmode_axes(d: int, mode: int) -> list:
    return [m for m in range(d) if m != mode]


def _s_matrix(ctx: LoewnerContext, factors: CPFactors, mode: int) -> np.ndarray:
    """Stacked interpolated-term tensors: column ``(k, c)`` holds the
    mode-product chain (all axes except ``mode``) of H Hadamard-scaled by
    the k-th off-mode rank-one weight, evaluated at node index ``c`` of
    axis ``mode``.  Shape ``(prod of off-mode N, r * n_mode)``."""
    d = ctx.ndim
    r = factors.rank
    n_mode = factors.shape[mode]
    off = _offmode_axes(d, mode)
    letters = "abcdefgh"
    if off:
        spec = (
            ",".join(f"{letters[m]}k" for m in off)
            + ","
            + letters[:d]
            + "->"
            + letters[:d]
            + "k"
        )
        weighted = np.einsum(
            spec, *[factors.factors[m] for m in off], ctx.interp, optimize=True
        )
    else:
        weighted = np.repeat(ctx.interp[..., None], r, axis=-1)
    s = weighted  # shape (*n, r)
    for m in off:
        s = mode_product(s, ctx.cauchy[m].T, m)
    _track(s.size)
    # (N_off..., n_mode at slot `mode`, r) -> (M_off, r, n_mode)
    s = np.moveaxis(s, mode, -2)
    m_off = int(np.prod([ctx.grid_shape[m] for m in off])) if off else 1
    s = s.reshape(m_off, n_mode, r)
    s = np.ascontiguousarray(np.swapaxes(s, 1, 2))
    return s.reshape(m_off, r * n_mode)


def linearized_residual_norm2(ctx: LoewnerContext, factors: CPFactors) -> float:
    """``|L vec(a)|_2^2`` evaluated as the grid sum of
    ``|d(z) f(z) - n(z)|^2`` (one pass of per-axis mode products; the
    separable denominator uses the CP transfer fast path).  This is the
    observable form of the ALS objective: it saturates at the evaluation
    roundoff floor instead of descending below double precision."""
    if factors.shape != ctx.node_shape:
        raise ValueError("factor shapes do not match node counts")
    cauchy_t = [c.T for c in ctx.cauchy]
    num = materialize_cp(factors) * ctx.interp
    for j, ct in enumerate(cauchy_t):
        num = mode_product(num, ct, j)
    transfers = [ct @ f for ct, f in zip(cauchy_t, factors.factors)]
    den = materialize_cp(CPFactors(transfers))
    _track(2 * num.size)
    return float(np.sum(np.abs(den * ctx.data - num) ** 2))


def contracted_blocks(
    ctx: LoewnerContext,
    factors: CPFactors,
    mode: int,
    row_chunk_entries: int = 32_000_000,
):
    """Yield row blocks of the contracted Loewner matrix ``L @ J(mode)``
    without ever materializing it.

    Rows are grouped by the ``mode`` grid index (all off-mode grid points
    for one mode point per outer step, split further to respect
    ``row_chunk_entries``), so the concatenation of the blocks is the
    explicit matrix with its rows permuted mode-first.  Row order is
    irrelevant to Gram/QR consumers.
    """
    _check_factors(ctx, factors, mode)
    d = ctx.ndim
    r = factors.rank
    n_mode = factors.shape[mode]
    q = r * n_mode
    off = _offmode_axes(d, mode)

    ct_mode = ctx.cauchy[mode].T  # (N_mode, n_mode)
    if off:
        k_off = khatri_rao(
            [ctx.cauchy[m].T @ factors.factors[m] for m in off]
        )  # (M_off, r)
    else:
        k_off = np.ones((1, r), dtype=np.complex128)
    s3 = _s_matrix(ctx, factors, mode).reshape(-1, r, n_mode)
    m_off = s3.shape[0]
    d_unf = np.moveaxis(ctx.data, mode, 0).reshape(ctx.grid_shape[mode], m_off)

    rows_per_chunk = max(1, int(row_chunk_entries // max(q, 1)))
    for t in range(ctx.grid_shape[mode]):
        ct_row = ct_mode[t]
        for lo in range(0, m_off, rows_per_chunk):
            hi = min(lo + rows_per_chunk, m_off)
            base = (d_unf[t, lo:hi, None] * k_off[lo:hi])[:, :, None] - s3[lo:hi]
            block = (base * ct_row[None, None, :]).reshape(hi - lo, q)
            _track(block.size)
            yield block


def contracted_gram(
    ctx: LoewnerContext,
    factors: CPFactors,
    mode: int,
    row_chunk_entries: int = 32_000_000,
) -> np.ndarray:
    """Hermitian Gram ``(L @ J)^H (L @ J)`` of the contracted Loewner
    matrix, without materializing any ``prod(N)``-row array.

    Writing ``L @ J = diag(vec(D)) A - B`` with ``A`` the Cauchy-transfer
    part (separable per axis) and ``B`` the interpolated-term part, the
    four Gram terms reduce to per-axis contractions of ``|D|^2``, one tall
    Gram of the stacked B-columns, and one data-weighted product per CP
    column, chunked along the contraction axis.
    """
    _check_factors(ctx, factors, mode)
    d = ctx.ndim
    r = factors.rank
    n_mode = factors.shape[mode]
    q = r * n_mode
    off = _offmode_axes(d, mode)
    letters = "abcdefgh"

    ct_mode = ctx.cauchy[mode].T  # (N_mode, n_mode)
    transfers = {m: ctx.cauchy[m].T @ factors.factors[m] for m in off}

    # Term 1: A^H diag(|D|^2) A.  Per-axis contraction of the weight
    # tensor against conj(G_k) * G_l, axis `mode` left for the Cauchy pair.
    weight = np.abs(ctx.data) ** 2
    if off:
        pair_mats = []
        for m in off:
            g = transfers[m]
            pair_mats.append(
                (g.conj()[:, :, None] * g[:, None, :]).reshape(-1, r * r)
            )
        spec = (
            letters[:d]
            + ","
            + ",".join(f"{letters[m]}K" for m in off)
            + "->"
            + letters[mode]
            + "K"
        )
        w_mode = np.einsum(spec, weight, *pair_mats, optimize=True)
    else:
        w_mode = np.repeat(weight.astype(np.complex128)[:, None], r * r, axis=1)
    t1 = np.einsum("jc,jd,jK->Kcd", ct_mode.conj(), ct_mode, w_mode, optimize=True)
    t1 = t1.reshape(r, r, n_mode, n_mode)
    g1 = np.ascontiguousarray(t1.transpose(0, 2, 1, 3)).reshape(q, q)

    # Term 4: B^H B = (Cauchy-pair Gram on axis `mode`) Hadamard the
    # stacked S Gram.
    s_mat = _s_matrix(ctx, factors, mode)
    pair_gram = ct_mode.conj().T @ ct_mode  # (n_mode, n_mode)
    g4 = (s_mat.conj().T @ s_mat) * np.tile(pair_gram, (r, r))

    # Term 2: A^H diag(conj(D)) B, chunked over the `mode` axis rows.
    dbar = np.moveaxis(ctx.data.conj(), mode, 0)
    n_rows = dbar.shape[0]
    m_off = s_mat.shape[0]
    dbar = np.ascontiguousarray(dbar.reshape(n_rows, m_off))
    _track(dbar.size)
    if off:
        kron_g = khatri_rao([transfers[m].conj() for m in off])  # (M_off, r)
    else:
        kron_g = np.ones((1, r), dtype=np.complex128)
    y = np.empty((r, n_rows, q), dtype=np.complex128)
    chunk = max(1, int(row_chunk_entries // max(m_off, 1)))
    for k in range(r):
        for lo in range(0, n_rows, chunk):
            hi = min(lo + chunk, n_rows)
            block = dbar[lo:hi] * kron_g[None, :, k]
            _track(block.size)
            y[k, lo:hi] = block @ s_mat
    t2 = np.einsum(
        "jc,jp,kjlp->kclp",
        ct_mode.conj(),
        ct_mode,
        y.reshape(r, n_rows, r, n_mode),
        optimize=True,
    )
    g2 = np.ascontiguousarray(t2).reshape(q, q)

    gram = g1 - g2 - g2.conj().T + g4
    return 0.5 * (gram + gram.conj().T)
