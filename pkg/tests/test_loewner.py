import itertools

import numpy as np
import pytest

from lraaa.als import factor_to_vec
from lraaa.barycentric import SampleGrid
from lraaa.loewner import (
    LoewnerContext,
    MemoryBudgetError,
    build_contracted,
    build_full,
    build_J,
    contracted_gram,
    gram_of_J,
    memory_budget,
)
from lraaa.tensor import CPFactors, materialize_cp, vectorize

from conftest import (
    first_nodes,
    linearized_error_oracle,
    random_complex,
    random_factors,
    random_grid,
)


def make_ctx(rng, grid_shape, node_counts):
    grid = random_grid(rng, grid_shape)
    nodes = first_nodes(grid, node_counts)
    return grid, LoewnerContext.from_grid(grid, nodes)


def test_zero_rows_at_node_tuples(rng):
    grid, ctx = make_ctx(rng, (5, 4), (2, 3))
    loewner = build_full(ctx)
    for i1, i2 in itertools.product(range(2), range(3)):
        row = loewner[i1 * 4 + i2]
        assert np.allclose(row, 0.0, atol=1e-14)


def test_hand_case_two_by_two():
    z1 = np.array([0.3, 1.1])
    z2 = np.array([-0.4, 0.9])
    data = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=complex)
    grid = SampleGrid([z1, z2], data)
    ctx = LoewnerContext.from_grid(grid, [z1[:1], z2[:1]])
    loewner = build_full(ctx)
    expected = (data[1, 1] - data[0, 0]) / ((z1[1] - z1[0]) * (z2[1] - z2[0]))
    assert loewner[3, 0] == pytest.approx(expected)
    assert loewner[0, 0] == 0.0


@pytest.mark.parametrize(
    "grid_shape,node_counts",
    [((6,), (3,)), ((5, 4), (2, 3)), ((4, 3, 5), (2, 2, 3))],
)
def test_loewner_action_matches_loop_oracle(rng, grid_shape, node_counts):
    grid, ctx = make_ctx(rng, grid_shape, node_counts)
    alpha = random_complex(rng, node_counts)
    lhs = float(np.linalg.norm(build_full(ctx) @ vectorize(alpha)) ** 2)
    expected = linearized_error_oracle(
        grid, first_nodes(grid, node_counts), ctx.interp, alpha
    )
    assert lhs == pytest.approx(expected, rel=1e-10)


def test_build_J_identity_contraction(rng):
    # d=2, r=1, second factor scalar 1: J for mode 0 is the identity.
    factors = CPFactors([random_complex(rng, (3, 1)), np.ones((1, 1))])
    assert np.allclose(build_J(factors, 0), np.eye(3))


@pytest.mark.parametrize("shape,rank", [((3, 2), 2), ((2, 3, 2), 3)])
def test_J_maps_factor_to_alpha(rng, shape, rank):
    factors = random_factors(rng, shape, rank)
    alpha_vec = vectorize(materialize_cp(factors))
    for mode in range(len(shape)):
        jmat = build_J(factors, mode)
        got = jmat @ factor_to_vec(factors.factors[mode])
        assert np.allclose(got, alpha_vec, rtol=1e-12, atol=1e-12)
        assert np.linalg.norm(got) == pytest.approx(
            np.linalg.norm(alpha_vec), rel=1e-12
        )


@pytest.mark.parametrize(
    "grid_shape,node_counts,rank",
    [((5, 4), (2, 3), 2), ((4, 3, 5), (2, 2, 3), 2), ((6, 5), (3, 2), 1)],
)
def test_contracted_matches_full_times_J(rng, grid_shape, node_counts, rank):
    grid, ctx = make_ctx(rng, grid_shape, node_counts)
    factors = random_factors(rng, node_counts, rank)
    full = build_full(ctx)
    for mode in range(len(grid_shape)):
        expected = full @ build_J(factors, mode)
        got = build_contracted(ctx, factors, mode)
        scale = np.abs(expected).max()
        assert np.allclose(got, expected, rtol=1e-12, atol=1e-12 * scale)


def test_contracted_trivial_identity_contraction(rng):
    # d=2, r=1, scalar second factor equal to 1: L2^(1) == L2.
    grid, ctx = make_ctx(rng, (5, 3), (2, 1))
    factors = CPFactors([random_complex(rng, (2, 1)), np.ones((1, 1))])
    assert np.allclose(build_contracted(ctx, factors, 0), build_full(ctx))


def test_contracted_action_equals_full_action(rng):
    grid, ctx = make_ctx(rng, (4, 4, 4), (2, 2, 2))
    factors = random_factors(rng, (2, 2, 2), 2)
    alpha_vec = vectorize(materialize_cp(factors))
    full_action = build_full(ctx) @ alpha_vec
    for mode in range(3):
        lc = build_contracted(ctx, factors, mode)
        action = lc @ factor_to_vec(factors.factors[mode])
        assert np.allclose(action, full_action, rtol=1e-12, atol=1e-12)


def test_gram_of_J_unit_offmode_columns(rng):
    cols = [random_complex(rng, (4, 1)), random_complex(rng, (3, 1))]
    cols = [c / np.linalg.norm(c) for c in cols]
    factors = CPFactors([random_complex(rng, (5, 1)), *cols])
    gram = gram_of_J(factors, 0)
    assert np.allclose(gram, np.eye(5), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("shape,rank", [((3, 2, 2), 2), ((2, 4, 3), 3)])
def test_gram_of_J_matches_explicit(rng, shape, rank):
    factors = random_factors(rng, shape, rank)
    for mode in range(3):
        jmat = build_J(factors, mode)
        explicit = jmat.conj().T @ jmat
        assert np.allclose(gram_of_J(factors, mode), explicit, rtol=1e-12)


def test_gram_of_J_singular_for_dependent_columns(rng):
    base = random_complex(rng, (3, 1))
    dep = np.hstack([base, 2.0 * base])
    factors = CPFactors([random_complex(rng, (2, 2)), dep])
    gram = gram_of_J(factors, 0)
    explicit = build_J(factors, 0)
    assert np.linalg.matrix_rank(gram) == np.linalg.matrix_rank(explicit)
    assert np.linalg.matrix_rank(gram) < gram.shape[0]


def test_memory_budget_guard(rng):
    grid, ctx = make_ctx(rng, (6, 6), (3, 3))
    with pytest.raises(MemoryBudgetError):
        build_full(ctx, budget=10)
    factors = random_factors(rng, (3, 3), 2)
    with pytest.raises(MemoryBudgetError):
        build_contracted(ctx, factors, 0, budget=10)


def test_memory_budget_env_override(monkeypatch):
    monkeypatch.setenv("LRAAA_MEMORY_BUDGET", "12345")
    assert memory_budget() == 12345
    assert memory_budget(77) == 77


def test_context_rejects_missing_node(rng):
    grid = random_grid(rng, (4, 4))
    with pytest.raises(ValueError):
        LoewnerContext.from_grid(grid, [np.array([123.456 + 0j]), grid.axes[1][:1]])


@pytest.mark.parametrize(
    "grid_shape,node_counts,rank",
    [
        ((6,), (3,), 2),
        ((5, 4), (2, 3), 2),
        ((4, 3, 5), (2, 2, 3), 3),
        ((3, 3, 3, 3), (2, 2, 2, 2), 2),
    ],
)
def test_contracted_gram_matches_explicit(rng, grid_shape, node_counts, rank):
    """The streamed Gram equals Lc^H Lc for the explicit contracted
    matrix, for every mode."""
    grid, ctx = make_ctx(rng, grid_shape, node_counts)
    factors = random_factors(rng, node_counts, rank)
    for mode in range(len(grid_shape)):
        lc = build_contracted(ctx, factors, mode)
        explicit = lc.conj().T @ lc
        got = contracted_gram(ctx, factors, mode)
        scale = np.abs(explicit).max()
        assert np.allclose(got, explicit, rtol=1e-12, atol=1e-12 * scale)


@pytest.mark.parametrize("grid_shape,node_counts", [((4, 3, 5), (2, 2, 3)), ((6,), (3,))])
def test_contracted_blocks_stack_to_explicit(rng, grid_shape, node_counts):
    from lraaa.loewner import contracted_blocks

    grid, ctx = make_ctx(rng, grid_shape, node_counts)
    factors = random_factors(rng, node_counts, 2)
    for mode in range(len(grid_shape)):
        lc = build_contracted(ctx, factors, mode)
        q = lc.shape[1]
        perm = np.moveaxis(lc.reshape(*grid_shape, q), mode, 0).reshape(-1, q)
        stacked = np.vstack(
            list(contracted_blocks(ctx, factors, mode, row_chunk_entries=64))
        )
        assert np.allclose(stacked, perm, rtol=1e-13, atol=1e-13)


def test_contracted_gram_chunked_rows(rng):
    grid, ctx = make_ctx(rng, (7, 6), (3, 2))
    factors = random_factors(rng, (3, 2), 2)
    lc = build_contracted(ctx, factors, 0)
    explicit = lc.conj().T @ lc
    got = contracted_gram(ctx, factors, 0, row_chunk_entries=8)
    assert np.allclose(got, explicit, rtol=1e-12, atol=1e-12 * np.abs(explicit).max())
