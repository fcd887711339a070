"""Reproducible lattice instances: the worked 3D example, identities and scrambles."""

from __future__ import annotations

import numpy as np

from .lattice import Basis, NumericalError

EXAMPLE_BASIS = ((1, -1, 0), (0, 1, -1), (0, 0, 1))
SCRAMBLE_SEED = 20240601
SCRAMBLE_ENTRY_BOUND = 3


def identity_basis(n: int) -> Basis:
    return Basis.from_rows(np.eye(n, dtype=int).tolist())


def example_basis() -> Basis:
    return Basis.from_rows(EXAMPLE_BASIS)


def scramble_matrix(n: int, seed: int | None = None, steps: int | None = None) -> np.ndarray:
    """Unimodular n x n matrix built from elementary row operations.

    Each step adds +-1 times one row to another and is kept only if every
    entry stays within [-3, 3].  The default seed is ``SCRAMBLE_SEED + n`` so
    every dimension has one fixed scramble.
    """
    rng = np.random.default_rng(SCRAMBLE_SEED + n if seed is None else seed)
    steps = 4 * n if steps is None else steps
    u = np.eye(n, dtype=np.int64)
    if n == 1:
        return u
    done = tries = 0
    while done < steps and tries < 100 * steps:
        tries += 1
        i, j = rng.choice(n, size=2, replace=False)
        sign = 1 if rng.random() < 0.5 else -1
        row = u[i] + sign * u[j]
        if np.abs(row).max() <= SCRAMBLE_ENTRY_BOUND:
            u[i] = row
            done += 1
    return u


def scrambled_basis(basis: Basis, seed: int | None = None) -> Basis:
    """U * B with U from :func:`scramble_matrix`; generates the same lattice."""
    u = scramble_matrix(basis.n, seed)
    rows = [[sum(int(u[i, t]) * basis.rows[t][c] for t in range(basis.n))
             for c in range(basis.dim)] for i in range(basis.n)]
    return Basis.from_rows(rows)


def random_integer_basis(rng: np.random.Generator, n: int, low: int = -9, high: int = 9,
                         dim: int | None = None) -> Basis:
    """Uniform integer entries in [low, high], resampled until full rank."""
    dim = n if dim is None else dim
    while True:
        rows = rng.integers(low, high + 1, size=(n, dim)).tolist()
        try:
            return Basis.from_rows(rows)
        except NumericalError:
            continue


def random_unimodular(rng: np.random.Generator, n: int, steps: int = 6, bound: int = 2) -> np.ndarray:
    u = np.eye(n, dtype=np.int64)
    for _ in range(steps):
        i, j = rng.choice(n, size=2, replace=False)
        u[i] += int(rng.integers(-bound, bound + 1)) * u[j]
    return u


def gapped_basis(rng: np.random.Generator, n: int, p: int, scale: int = 12, bound: int = 2) -> Basis:
    """Basis with a planted gap after the first p vectors, hidden by a unimodular scramble.

    The first p rows are small random vectors in the first p coordinates; the
    remaining rows get a ``scale`` times longer diagonal part.
    """
    if not 1 <= p < n:
        raise ValueError("need 1 <= p < n")
    while True:
        rows = np.zeros((n, n), dtype=np.int64)
        rows[:p, :p] = rng.integers(-bound, bound + 1, size=(p, p))
        rows[p:, :] = rng.integers(-bound, bound + 1, size=(n - p, n))
        rows[p:, p:] += scale * np.eye(n - p, dtype=np.int64)
        if np.linalg.matrix_rank(rows[:p, :p]) < p:
            continue
        u = random_unimodular(rng, n, steps=n, bound=1)
        return Basis.from_rows((u @ rows).tolist())
