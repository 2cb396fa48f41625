"""Shared helpers: random instances and independent brute-force oracles.

The oracles here recompute quantities from their defining sums with plain
loops, independent of the library's batched/structured code paths.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from lraaa.barycentric import BarycentricModel, SampleGrid
from lraaa.tensor import CPFactors


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_axis(rng, n):
    """Distinct complex sample points."""
    while True:
        axis = random_complex(rng, n)
        if len(np.unique(axis)) == n:
            return axis


def random_grid(rng, shape) -> SampleGrid:
    axes = [random_axis(rng, n) for n in shape]
    return SampleGrid(axes, random_complex(rng, shape))


def random_factors(rng, shape, rank) -> CPFactors:
    return CPFactors([random_complex(rng, (n, rank)) for n in shape])


def first_nodes(grid: SampleGrid, counts):
    """Deterministic node choice: the first n_j points of each axis."""
    return [grid.axes[j][: counts[j]].copy() for j in range(grid.ndim)]


def random_model(rng, grid: SampleGrid, counts, rank=None) -> BarycentricModel:
    """Model with nodes from the grid, H from the data and random
    coefficients (CP when rank is given)."""
    nodes = first_nodes(grid, counts)
    interp = grid.data[np.ix_(*[np.arange(c) for c in counts])]
    if rank is None:
        coeffs = random_complex(rng, tuple(counts))
    else:
        coeffs = random_factors(rng, tuple(counts), rank)
    return BarycentricModel(nodes, interp, coeffs)


# ---------------------------------------------------------------------------
# independent oracles


def cauchy_vector_oracle(nodes, x):
    """Three-case modified Cauchy column, written directly."""
    nodes = np.asarray(nodes)
    out = np.zeros(len(nodes), dtype=complex)
    if np.any(nodes == x):
        out[int(np.argmax(nodes == x))] = 1.0
        return out
    return 1.0 / (x - nodes)


def point_eval_oracle(nodes, interp, alpha, z):
    """Barycentric value at one point by explicit double/triple sums."""
    d = len(nodes)
    vecs = [cauchy_vector_oracle(nodes[j], z[j]) for j in range(d)]
    num = 0.0 + 0.0j
    den = 0.0 + 0.0j
    for idx in itertools.product(*[range(len(n)) for n in nodes]):
        w = alpha[idx]
        for j in range(d):
            w = w * vecs[j][idx[j]]
        den += w
        num += w * interp[idx]
    return num, den


def linearized_error_oracle(grid: SampleGrid, nodes, interp, alpha) -> float:
    """Direct grid-loop sum of |d(z) f(z) - n(z)|^2."""
    total = 0.0
    for idx in itertools.product(*[range(n) for n in grid.shape]):
        z = [grid.axes[j][idx[j]] for j in range(grid.ndim)]
        num, den = point_eval_oracle(nodes, interp, alpha, z)
        total += abs(den * grid.data[idx] - num) ** 2
    return total


def materialize_oracle(factors: CPFactors) -> np.ndarray:
    """CP materialization by explicit loops over terms and entries."""
    out = np.zeros(factors.shape, dtype=complex)
    for idx in itertools.product(*[range(n) for n in factors.shape]):
        for k in range(factors.rank):
            term = 1.0 + 0.0j
            for j in range(factors.ndim):
                term *= factors.factors[j][idx[j], k]
            out[idx] += term
    return out


@pytest.fixture
def rng():
    return rng_for(20240801)
