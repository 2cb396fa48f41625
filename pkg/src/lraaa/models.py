"""Benchmark data generators: the trigonometric test function, a
parametrized mass-spring-damper chain transfer function, block-structured
two-variable parametric systems and rank-1 separable data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .barycentric import PoleError, SampleGrid
from .tensor import CPFactors, as_complex, materialize_cp


def trig_f(z):
    """``(z1 + ... + zd) / (2d + cos z1 + ... + cos zd)``; accepts scalars
    or broadcastable arrays per coordinate.  The denominator is bounded
    below by d on real inputs, so there are no real poles."""
    parts = list(z)
    d = len(parts)
    num = parts[0] + 0.0
    den = 2.0 * d + np.cos(parts[0])
    for p in parts[1:]:
        num = num + p
        den = den + np.cos(p)
    return num / den


@dataclass(frozen=True)
class MsdSpec:
    """Chain of ``mass_count`` masses joined by springs, the last mass
    wall-anchored, every mass damped; spring stiffnesses are assigned in
    four consecutive quarters (the wall spring belongs to the last
    quarter).  Force input on mass 1, output is the velocity of mass 1."""

    mass_count: int = 40
    mass: float = 4.0
    damping: float = 1.0

    def __post_init__(self):
        if self.mass_count < 4 or self.mass_count % 4:
            raise ValueError("mass_count must be a positive multiple of 4")
        if self.mass <= 0 or self.damping <= 0:
            raise ValueError("mass and damping must be positive")


def _stiffness_matrix(spec: MsdSpec, k) -> np.ndarray:
    """Tridiagonal stiffness matrix for the four-parameter spring chain."""
    k = np.asarray(k, dtype=float)
    if k.shape != (4,):
        raise ValueError("four stiffness values required")
    n = spec.mass_count
    per_spring = np.repeat(k, n // 4)  # spring i joins masses i, i+1; last is the wall
    mat = np.zeros((n, n))
    for i in range(n - 1):
        s = per_spring[i]
        mat[i, i] += s
        mat[i + 1, i + 1] += s
        mat[i, i + 1] -= s
        mat[i + 1, i] -= s
    mat[n - 1, n - 1] += per_spring[n - 1]
    return mat


def msd_first_order(spec: MsdSpec, k):
    """First-order realization (A, b, c) with state (positions,
    velocities): input force on mass 1 enters the velocity block scaled by
    1/mass, output picks the velocity of mass 1."""
    n = spec.mass_count
    stiff = _stiffness_matrix(spec, k)
    a = np.zeros((2 * n, 2 * n))
    a[:n, n:] = np.eye(n)
    a[n:, :n] = -stiff / spec.mass
    a[n:, n:] = -(spec.damping / spec.mass) * np.eye(n)
    b = np.zeros(2 * n)
    b[n] = 1.0 / spec.mass
    c = np.zeros(2 * n)
    c[n] = 1.0
    return a, b, c


def msd_transfer(spec: MsdSpec, s: complex, k) -> complex:
    """Transfer function value ``c^T (s I - A(k))^{-1} b`` by a dense
    solve of the first-order form."""
    a, b, c = msd_first_order(spec, k)
    shifted = s * np.eye(2 * spec.mass_count) - a
    try:
        x = np.linalg.solve(shifted, b.astype(np.complex128))
    except np.linalg.LinAlgError as exc:
        raise PoleError((s, *np.asarray(k))) from exc
    return complex(c @ x)


def _msd_data(spec: MsdSpec, s_axis, k_axes, chunk: int = 20_000) -> np.ndarray:
    """Sample tensor over a tensor-product (s, k1..k4) grid.

    Uses one symmetric eigendecomposition of the stiffness matrix per
    stiffness tuple: with K = Q diag(w) Q^T the transfer function is
    ``s * sum_i Q[0,i]^2 / (m s^2 + c s + w_i)``, exact and far cheaper
    than a dense solve per (s, k) pair.
    """
    s_axis = as_complex(s_axis)
    k_axes = [np.asarray(a, dtype=float) for a in k_axes]
    if len(k_axes) != 4:
        raise ValueError("four stiffness axes required")
    unit = np.eye(4)
    parts = np.stack([_stiffness_matrix(spec, unit[q]) for q in range(4)])
    tuples = np.stack(
        np.meshgrid(*k_axes, indexing="ij"), axis=-1
    ).reshape(-1, 4)
    count = tuples.shape[0]
    poly = spec.mass * s_axis**2 + spec.damping * s_axis  # (S,)
    out = np.empty((count, len(s_axis)), dtype=np.complex128)
    for lo in range(0, count, chunk):
        hi = min(lo + chunk, count)
        batch = np.einsum("bq,qij->bij", tuples[lo:hi], parts)
        w, q = np.linalg.eigh(batch)
        weights = q[:, 0, :] ** 2  # (B, n)
        for si, s in enumerate(s_axis):
            out[lo:hi, si] = s * np.sum(weights / (poly[si] + w), axis=1)
    shape = (len(s_axis),) + tuple(len(a) for a in k_axes)
    return np.ascontiguousarray(out.T).reshape(shape)


@dataclass(frozen=True)
class BlockKSpec:
    """Two-variable block system ``f(z) = c^T K(z)^{-1} b`` with diagonal
    blocks scaled by the variables and off-diagonal blocks of prescribed
    rank."""

    k11: np.ndarray
    k12: np.ndarray
    k21: np.ndarray
    k22: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @classmethod
    def random(cls, m1: int, m2: int, rho: int, seed: int = 0) -> "BlockKSpec":
        """Well-conditioned diagonal blocks (identity plus a small random
        perturbation) and explicit rank-``rho`` off-diagonal blocks."""
        if rho > min(m1, m2):
            raise ValueError("off-diagonal rank cannot exceed block sizes")
        rng = np.random.default_rng(seed)
        k11 = np.eye(m1) + 0.1 * rng.standard_normal((m1, m1))
        k22 = np.eye(m2) + 0.1 * rng.standard_normal((m2, m2))
        if rho:
            k12 = rng.standard_normal((m1, rho)) @ rng.standard_normal((rho, m2))
            k21 = rng.standard_normal((m2, rho)) @ rng.standard_normal((rho, m1))
        else:
            k12 = np.zeros((m1, m2))
            k21 = np.zeros((m2, m1))
        b = rng.standard_normal(m1 + m2)
        c = rng.standard_normal(m1 + m2)
        return cls(k11, k12, k21, k22, b, c)

    @property
    def sizes(self):
        return self.k11.shape[0], self.k22.shape[0]


def blockk_f(spec: BlockKSpec, z) -> complex:
    """Evaluate ``c^T K(z)^{-1} b`` with the diagonal blocks scaled by the
    two variables."""
    z1, z2 = complex(z[0]), complex(z[1])
    m1, m2 = spec.sizes
    mat = np.zeros((m1 + m2, m1 + m2), dtype=np.complex128)
    mat[:m1, :m1] = z1 * spec.k11
    mat[:m1, m1:] = spec.k12
    mat[m1:, :m1] = spec.k21
    mat[m1:, m1:] = z2 * spec.k22
    try:
        x = np.linalg.solve(mat, spec.b.astype(np.complex128))
    except np.linalg.LinAlgError as exc:
        raise PoleError((z1, z2)) from exc
    return complex(spec.c @ x)


def separable_data(deltas) -> np.ndarray:
    """Rank-1 tensor ``D[i1,...,id] = d1[i1] * ... * dd[id]``."""
    cols = [as_complex(np.atleast_1d(d)).reshape(-1, 1) for d in deltas]
    return materialize_cp(CPFactors(cols))


def make_grid(kind: str, **params) -> SampleGrid:
    """Benchmark sample grids.

    ``trig3``: three axes of ``points`` (default 100) linearly spaced
    reals in [-limit, limit] (default 10).  ``trig5``: five axes of 30
    points in [-4, 4].  ``msd``: 50 equidistant points on the imaginary
    segment [0.1, 2]i for the frequency axis and 25 equidistant points in
    [0.5, 1] for each of the four stiffness axes (spec overridable via
    ``spec``/``s_points``/``k_points``).  ``blockk``: two axes of
    ``points`` (default 10) in [1, 2].  ``separable``: rank-1 data from
    per-axis factors ``1 / (Z + offset_j)`` on axes in [0, 1].
    """
    if kind in ("trig3", "trig5"):
        d = 3 if kind == "trig3" else 5
        points = int(params.pop("points", 100 if d == 3 else 30))
        limit = float(params.pop("limit", 10.0 if d == 3 else 4.0))
        _reject_extras(kind, params)
        if points < 2 or limit <= 0:
            raise ValueError("need at least 2 points and a positive limit")
        axis = np.linspace(-limit, limit, points)
        views = np.ix_(*([axis] * d))
        data = np.asarray(trig_f(views), dtype=np.complex128)
        return SampleGrid([axis] * d, data)
    if kind == "msd":
        spec = params.pop("spec", None) or MsdSpec(
            mass_count=int(params.pop("masses", 40)),
            mass=float(params.pop("mass", 4.0)),
            damping=float(params.pop("damping", 1.0)),
        )
        s_points = int(params.pop("s_points", 50))
        k_points = int(params.pop("k_points", 25))
        _reject_extras(kind, params)
        if s_points < 2 or k_points < 2:
            raise ValueError("need at least 2 points per axis")
        s_axis = 1j * np.linspace(0.1, 2.0, s_points)
        k_axis = np.linspace(0.5, 1.0, k_points)
        data = _msd_data(spec, s_axis, [k_axis] * 4)
        return SampleGrid(
            [s_axis] + [k_axis] * 4,
            data,
            names=("s", "k1", "k2", "k3", "k4"),
        )
    if kind == "blockk":
        m1 = int(params.pop("m1", 4))
        m2 = int(params.pop("m2", 4))
        rho = int(params.pop("rho", 1))
        seed = int(params.pop("seed", 0))
        points = int(params.pop("points", 10))
        spec = params.pop("spec", None) or BlockKSpec.random(m1, m2, rho, seed)
        _reject_extras(kind, params)
        if points < 2:
            raise ValueError("need at least 2 points per axis")
        axis = np.linspace(1.0, 2.0, points)
        data = np.empty((points, points), dtype=np.complex128)
        for i, z1 in enumerate(axis):
            for j, z2 in enumerate(axis):
                data[i, j] = blockk_f(spec, (z1, z2))
        return SampleGrid([axis, axis], data)
    if kind == "separable":
        d = int(params.pop("d", 3))
        points = int(params.pop("points", 10))
        seed = int(params.pop("seed", 0))
        offsets = params.pop("offsets", None)
        _reject_extras(kind, params)
        if points < 2 or d < 1:
            raise ValueError("need at least 2 points per axis")
        rng = np.random.default_rng(seed)
        if offsets is None:
            offsets = 1.0 + rng.uniform(0.0, 1.0, d)
        offsets = np.asarray(offsets, dtype=np.complex128)
        if offsets.shape != (d,):
            raise ValueError("one offset per variable required")
        axes = [np.linspace(0.0, 1.0, points) for _ in range(d)]
        deltas = [1.0 / (axes[j] + offsets[j]) for j in range(d)]
        return SampleGrid(axes, separable_data(deltas))
    raise ValueError(f"unknown grid kind: {kind!r}")


def _reject_extras(kind: str, params: dict):
    if params:
        raise ValueError(f"unknown parameters for {kind}: {sorted(params)}")
