import numpy as np
import pytest

from lraaa.als import (
    AlsConfig,
    als_solve,
    ensure_rank,
    factor_to_vec,
    stopping_check,
    vec_to_factor,
    warm_start,
)
from lraaa.loewner import LoewnerContext, build_full
from lraaa.solvers import solve_full
from lraaa.tensor import CPFactors, cp_frobenius_norm, materialize_cp, vectorize

from conftest import first_nodes, random_complex, random_factors, random_grid, rng_for


def unit_factors(factors: CPFactors) -> CPFactors:
    scaled = [f.copy() for f in factors.factors]
    scaled[0] /= cp_frobenius_norm(factors)
    return CPFactors(scaled)


def test_factor_vec_round_trip(rng):
    f = random_complex(rng, (4, 3))
    assert np.array_equal(vec_to_factor(factor_to_vec(f), 4, 3), f)
    # block k of the vector is column k
    assert np.array_equal(factor_to_vec(f)[:4], f[:, 0])


def test_stopping_check_cases():
    assert stopping_check(1.0, 0.995, 1e-2)
    assert stopping_check(5.0, 0.0, 1e-2)
    assert not stopping_check(1.0, 0.9, 1e-2)
    with pytest.raises(ValueError):
        stopping_check(-1.0, 0.5, 1e-2)


def test_warm_start_no_flags(rng):
    f = random_factors(rng, (3, 2), 2)
    out = warm_start(f, [False, False])
    for a, b in zip(out.factors, f.factors):
        assert np.array_equal(a, b)


def test_warm_start_pads_zero_rows(rng):
    f = random_factors(rng, (3, 2), 2)
    out = warm_start(f, [True, False])
    assert out.shape == (4, 2)
    old = materialize_cp(f)
    new = materialize_cp(out)
    assert np.allclose(new[:3], old)
    assert np.allclose(new[3], 0.0)


def test_warm_start_objective_never_increases(rng):
    """Padding zeros for new nodes cannot increase the linearized error."""
    for seed in range(8):
        r = rng_for(300 + seed)
        grid = random_grid(r, (5, 4, 4))
        counts = (2, 2, 2)
        factors = unit_factors(random_factors(r, counts, 2))
        ctx = LoewnerContext.from_grid(grid, first_nodes(grid, counts))
        before = np.linalg.norm(
            build_full(ctx) @ vectorize(materialize_cp(factors))
        )
        grown = (3, 2, 3)
        padded = warm_start(factors, [True, False, True])
        ctx2 = LoewnerContext.from_grid(grid, first_nodes(grid, grown))
        after = np.linalg.norm(
            build_full(ctx2) @ vectorize(materialize_cp(padded))
        )
        assert after <= before + 1e-12 * max(before, 1.0)


def test_ensure_rank(rng):
    f = random_factors(rng, (3, 2), 1)
    out = ensure_rank(f, 3, rng)
    assert out.rank == 3
    for a, b in zip(out.factors, f.factors):
        assert np.array_equal(a[:, :1], b)
    assert ensure_rank(out, 2, rng) is out


@pytest.mark.parametrize("solver_mode", ["dense", "gram"])
def test_als_d2_full_rank_matches_svd(rng, solver_mode):
    """With r = min(n1, n2) the CP constraint is vacuous: ALS reaches the
    unconstrained optimum within two sweeps."""
    for seed in range(4):
        r = rng_for(400 + seed)
        grid = random_grid(r, (7, 6))
        counts = (4, 3)
        ctx = LoewnerContext.from_grid(grid, first_nodes(grid, counts))
        reference = solve_full(build_full(ctx)).objective
        cfg = AlsConfig(epsilon=1e-2, rng_seed=seed, solver_mode=solver_mode)
        result = als_solve(ctx, random_factors(r, counts, min(counts)), cfg)
        assert result.objective == pytest.approx(reference, rel=1e-8, abs=1e-20)
        assert result.sweeps <= 2


def test_als_rank1_separable_data_exact():
    axes = [np.linspace(0.0, 1.0, 6) for _ in range(2)]
    deltas = [1.0 / (axes[j] + 1.5 + 0.5 * j) for j in range(2)]
    data = np.outer(deltas[0], deltas[1])
    grid_axes = axes
    from lraaa.barycentric import SampleGrid

    grid = SampleGrid(grid_axes, data)
    ctx = LoewnerContext.from_grid(grid, [a[:2] for a in grid_axes])
    cfg = AlsConfig(epsilon=1e-2, solver_mode="dense")
    result = als_solve(ctx, CPFactors([np.ones((2, 1))] * 2), cfg)
    assert result.objective <= 1e-20


def test_als_truncates_excess_rank(rng):
    grid = random_grid(rng, (4, 4))
    ctx = LoewnerContext.from_grid(grid, first_nodes(grid, (1, 1)))
    result = als_solve(ctx, CPFactors([np.ones((1, 3)), np.ones((1, 3))]), AlsConfig())
    assert result.factors.rank == 1
    assert cp_frobenius_norm(result.factors) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("solver_mode", ["dense", "gram"])
def test_als_traces_non_increasing(rng, solver_mode):
    for seed in range(10):
        r = rng_for(500 + seed)
        grid = random_grid(r, (5, 4, 4))
        counts = (3, 2, 2)
        ctx = LoewnerContext.from_grid(grid, first_nodes(grid, counts))
        cfg = AlsConfig(
            epsilon=1e-6, max_sweeps=12, rng_seed=seed, solver_mode=solver_mode
        )
        result = als_solve(ctx, random_factors(r, counts, 2), cfg)
        trace = result.objective_trace
        assert len(trace) == result.sweeps + 1
        for a, b in zip(trace, trace[1:]):
            assert b <= a * (1 + 1e-9) + 1e-14 * trace[0]


def test_als_unit_norm_result(rng):
    grid = random_grid(rng, (5, 5))
    ctx = LoewnerContext.from_grid(grid, first_nodes(grid, (2, 2)))
    result = als_solve(ctx, random_factors(rng, (2, 2), 2), AlsConfig())
    assert cp_frobenius_norm(result.factors) == pytest.approx(1.0, abs=1e-10)


def test_als_deterministic(rng):
    grid = random_grid(rng, (5, 4))
    ctx = LoewnerContext.from_grid(grid, first_nodes(grid, (2, 2)))
    init = random_factors(rng_for(7), (2, 2), 2)
    cfg = AlsConfig(rng_seed=3)
    a = als_solve(ctx, init, cfg)
    b = als_solve(ctx, init, cfg)
    assert a.objective == b.objective
    assert a.objective_trace == b.objective_trace
    for fa, fb in zip(a.factors.factors, b.factors.factors):
        assert np.array_equal(fa, fb)


def test_als_objective_matches_materialized_action(rng):
    grid = random_grid(rng, (6, 5))
    ctx = LoewnerContext.from_grid(grid, first_nodes(grid, (3, 2)))
    result = als_solve(ctx, random_factors(rng, (3, 2), 2), AlsConfig(epsilon=1e-4))
    direct = np.linalg.norm(
        build_full(ctx) @ vectorize(materialize_cp(result.factors))
    ) ** 2
    assert result.objective == pytest.approx(direct, rel=1e-8, abs=1e-18)
