"""Outer greedy iteration: maximum-error node selection, coefficient
solves (full SVD or low-rank ALS with warm start), error tracking and
termination.

Selection uses the absolute error |r(z) - f(z)| over the sample grid;
termination uses the entrywise relative maximum error.  Points at which no
variable can grow (every coordinate is already a node, or its axis is at
the node cap) are masked out of the selection so capped runs keep making
progress on the remaining variables; when no growable point is left the
fit stops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .als import AlsConfig, als_solve, ensure_rank, warm_start
from .barycentric import (
    BarycentricModel,
    SampleGrid,
    grid_evaluation,
    relative_linearized_ls_error,
    relative_ls_error,
    relative_max_error,
)
from .loewner import LoewnerContext, build_full
from .solvers import solve_full
from .tensor import CPFactors, as_complex, unvectorize


@dataclass(frozen=True)
class FitConfig:
    """Fit settings.

    ``algorithm`` is "full" (explicit Loewner + SVD) or "low-rank"
    (CP-constrained ALS with CP size ``rank``).  ``tol`` is the relative
    maximum-error stopping target, ``max_nodes`` optional per-variable
    caps on the number of interpolation nodes, ``memory_budget`` the
    entry cap for the explicit full-path builder.
    """

    algorithm: str = "low-rank"
    rank: int = 1
    tol: float = 1e-3
    max_iterations: int = 100
    max_nodes: tuple = None
    als: AlsConfig = field(default_factory=AlsConfig)
    memory_budget: int = None

    def __post_init__(self):
        if self.algorithm not in ("full", "low-rank"):
            raise ValueError("algorithm must be 'full' or 'low-rank'")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.algorithm == "low-rank" and self.rank < 1:
            raise ValueError("rank must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    """One outer iteration: the selected grid tuple, per-variable node
    counts and the three error metrics (plus ALS sweeps on the low-rank
    path)."""

    iteration: int
    selected: tuple
    orders: tuple
    linearized_error: float
    ls_error: float
    max_error: float
    als_sweeps: int


@dataclass(frozen=True)
class FitReport:
    iterations: list = field(default_factory=list)
    model: BarycentricModel = None

    @property
    def final(self) -> IterationRecord:
        return self.iterations[-1]


def greedy_select(abs_error: np.ndarray, node_positions, capped=None):
    """Index tuple of the largest error among growable grid points.

    A point is growable when at least one coordinate is not yet a node of
    an uncapped axis.  Ties break to the lexicographically smallest
    multi-index.  Returns None when nothing is growable or every growable
    point has zero error.
    """
    shape = abs_error.shape
    d = len(shape)
    capped = [False] * d if capped is None else list(capped)
    growable = np.zeros(shape, dtype=bool)
    for j in range(d):
        can = np.ones(shape[j], dtype=bool)
        can[np.asarray(node_positions[j], dtype=int)] = False
        if capped[j]:
            can[:] = False
        view = can.reshape([-1 if m == j else 1 for m in range(d)])
        growable |= view
    masked = np.where(growable, abs_error, -1.0)
    flat = int(np.argmax(masked))
    if masked.reshape(-1)[flat] <= 0:
        return None
    return tuple(int(i) for i in np.unravel_index(flat, shape))


def update_nodes(nodes, selected, max_nodes=None):
    """Append each selected coordinate to its variable's node list unless
    it is already present or the variable is at its node cap.  Returns the
    new lists and per-variable growth flags."""
    out, flags = [], []
    for j, lam in enumerate(nodes):
        lam = as_complex(np.asarray(lam).reshape(-1))
        s = complex(selected[j])
        cap = None if max_nodes is None else max_nodes[j]
        grew = not (lam == s).any() and (cap is None or len(lam) < cap)
        if grew:
            lam = np.append(lam, s)
        out.append(lam)
        flags.append(grew)
    return out, flags


def _initial_factors(node_shape, rank: int) -> CPFactors:
    return CPFactors([np.ones((n, rank), dtype=np.complex128) for n in node_shape])


def fit(grid: SampleGrid, cfg: FitConfig):
    """Run the greedy fit on a sample grid.

    Returns ``(model, report)``.  Stops when the relative maximum error
    drops to ``cfg.tol``, the iteration cap is reached, or no node can be
    added (data interpolated or all variables capped).
    """
    if any(len(a) < 2 for a in grid.axes):
        raise ValueError("at least 2 sample points per axis required")
    d = grid.ndim
    caps = list(cfg.max_nodes) if cfg.max_nodes is not None else [None] * d
    if len(caps) != d:
        raise ValueError("one node cap per variable required")

    data = grid.data
    data_norm2 = float(np.sum(np.abs(data) ** 2))
    rng = np.random.default_rng(cfg.als.rng_seed)

    approx = np.full(grid.shape, complex(data.mean()), dtype=np.complex128)
    abs_err = np.abs(approx - data)
    node_vals = [np.zeros(0, dtype=np.complex128) for _ in range(d)]
    node_pos = [[] for _ in range(d)]
    factors = None
    model = None
    records = []

    for it in range(1, cfg.max_iterations + 1):
        is_capped = [caps[j] is not None and len(node_pos[j]) >= caps[j] for j in range(d)]
        sel = greedy_select(abs_err, node_pos, is_capped)
        if sel is None:
            if records:
                break
            sel = (0,) * d  # constant data: a single node tuple is exact
        sel_vals = tuple(grid.axes[j][sel[j]] for j in range(d))
        node_vals, flags = update_nodes(node_vals, sel_vals, caps)
        for j in range(d):
            if flags[j]:
                node_pos[j].append(sel[j])
        if not any(flags):
            break

        ctx = LoewnerContext.from_grid(grid, node_vals)
        if cfg.algorithm == "full":
            loewner = build_full(ctx, cfg.memory_budget)
            sol = solve_full(loewner)
            coeffs = unvectorize(sol.solution, ctx.node_shape)
            sweeps = 0
        else:
            if factors is None:
                init = _initial_factors(ctx.node_shape, cfg.rank)
            else:
                init = ensure_rank(warm_start(factors, flags), cfg.rank, rng)
            result = als_solve(ctx, init, cfg.als)
            factors = result.factors
            coeffs = factors
            sweeps = result.sweeps
        model = BarycentricModel(node_vals, ctx.interp, coeffs)

        ev = grid_evaluation(model, grid)
        approx = ev.values
        abs_err = np.abs(approx - data)
        lin_resid = float(
            np.sum(np.abs(ev.denominator * data - ev.numerator) ** 2)
        )
        lin = lin_resid if data_norm2 == 0 else lin_resid / data_norm2
        max_err = relative_max_error(approx, data)
        records.append(
            IterationRecord(
                iteration=it,
                selected=sel_vals,
                orders=ctx.node_shape,
                linearized_error=lin,
                ls_error=relative_ls_error(approx, data),
                max_error=max_err,
                als_sweeps=sweeps,
            )
        )
        if max_err <= cfg.tol:
            break

    if model is None:
        raise ValueError("no fit iteration could run (empty or degenerate data)")
    return model, FitReport(records, model)


def trace_errors(model: BarycentricModel, grid: SampleGrid, validation: SampleGrid = None):
    """The three error metrics on the sample grid and, optionally, on a
    validation grid."""

    def metrics(g: SampleGrid):
        values = grid_evaluation(model, g).values
        return {
            "linearized": relative_linearized_ls_error(model, g),
            "ls": relative_ls_error(values, g.data),
            "max": relative_max_error(values, g.data),
        }

    out = {"sample": metrics(grid)}
    if validation is not None:
        out["validation"] = metrics(validation)
    return out
