"""Exhaustive K-DSP oracle and a statevector Grover simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapExceeded, ConfigError, NumericalError
from .hamiltonian import (
    _CHUNK,
    DiagonalCost,
    EncodingConfig,
    GramMatrix,
    _exact_block,
    _integer_gram,
    decode_coefficients,
)

BRUTE_FORCE_CAP = 26
GROVER_CAP = 20


@dataclass(frozen=True)
class SolveResult:
    min_vol_sq: Fraction
    solutions: list[list[list[int]]]
    m_count: int
    states_scanned: int
    indices: list[int]

    def to_json(self) -> dict:
        return {
            "min_vol_sq": str(self.min_vol_sq),
            "m_count": self.m_count,
            "states_scanned": self.states_scanned,
            "solutions": self.solutions,
            "indices": self.indices,
        }


def brute_force_solve(g: GramMatrix, cfg: EncodingConfig, list_cap: int = 64,
                      cap: int = BRUTE_FORCE_CAP) -> SolveResult:
    """Scan every encoded state for the smallest nonzero det(X G X^T).

    Chunks are reduced by min-merge; optimal states are listed in increasing
    bitstring order up to ``list_cap`` while ``m_count`` counts all of them.
    """
    if cfg.n > cap:
        raise CapExceeded(f"{cfg.n} qubits exceeds the brute-force cap {cap}")
    if g.n != cfg.n_dim:
        raise ConfigError(f"Gram matrix is {g.n}x{g.n}, encoding has n_dim={cfg.n_dim}")
    gi, den = _integer_gram(g, cfg)
    size = 1 << cfg.n
    best = None
    count = 0
    listed: list[int] = []
    for start in range(0, size, _CHUNK):
        stop = min(size, start + _CHUNK)
        num = _exact_block(gi, cfg, start, stop)
        pos = num[num > 0]
        if pos.size == 0:
            continue
        low = pos.min()
        if best is None or low < best:
            best, count, listed = low, 0, []
        if low == best:
            hits = np.flatnonzero(num == best) + start
            count += hits.size
            listed.extend(int(h) for h in hits[: max(0, list_cap - len(listed))])
    if best is None:
        raise NumericalError("no nontrivial sub-lattice in box")
    return SolveResult(
        Fraction(int(best), den ** cfg.k),
        [decode_coefficients(z, cfg) for z in listed],
        count,
        size,
        listed,
    )


@dataclass(frozen=True)
class GroverResult:
    success_prob: float
    sample: int
    iterations: int
    m_count: int
    n: int

    def sample_bits(self) -> str:
        return format(self.sample, f"0{self.n}b")[::-1]


def amplify(marked: np.ndarray, iterations: int) -> np.ndarray:
    """Amplitudes after ``iterations`` rounds of phase flip + inversion about the mean."""
    psi = np.full(marked.size, 1.0 / math.sqrt(marked.size))
    for _ in range(iterations):
        psi[marked] *= -1.0
        psi = 2.0 * psi.mean() - psi
    return psi


def default_iterations(size: int, m_count: int) -> int:
    return int(math.floor(math.pi / 4 * math.sqrt(size / m_count)))


def grover_success_closed_form(size: int, m_count: int, iterations: int) -> float:
    theta = math.asin(math.sqrt(m_count / size))
    return math.sin((2 * iterations + 1) * theta) ** 2


def grover_simulate(diag: DiagonalCost, threshold: float | None = None,
                    iterations: int | None = None, seed: int = 0) -> GroverResult:
    """Amplitude amplification towards states with 0 < vol^2 <= threshold.

    ``threshold`` defaults to the smallest nonzero value; iterations default
    to floor(pi/4 sqrt(S/M)).  Returns the exact success probability and one
    seeded measurement.
    """
    if diag.n > GROVER_CAP:
        raise CapExceeded(f"{diag.n} qubits exceeds the Grover cap {GROVER_CAP}")
    v = diag.vol_sq
    t = diag.min_nonzero() if threshold is None else threshold
    marked = (v > 0) & (v <= t)
    m_count = int(marked.sum())
    if m_count == 0:
        raise NumericalError("empty target set")
    if iterations is None:
        iterations = default_iterations(v.size, m_count)
    psi = amplify(marked, iterations)
    probs = psi * psi
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(probs)
    sample = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return GroverResult(float(probs[marked].sum()), min(sample, v.size - 1), iterations, m_count, diag.n)


def grover_curve(diag: DiagonalCost, threshold: float | None = None,
                 max_iterations: int | None = None) -> list[tuple[int, float]]:
    """Success probability after j = 0..max_iterations rounds."""
    v = diag.vol_sq
    t = diag.min_nonzero() if threshold is None else threshold
    marked = (v > 0) & (v <= t)
    m_count = int(marked.sum())
    if m_count == 0:
        raise NumericalError("empty target set")
    if max_iterations is None:
        max_iterations = 2 * default_iterations(v.size, m_count) + 1
    psi = np.full(v.size, 1.0 / math.sqrt(v.size))
    out = [(0, float((psi[marked] ** 2).sum()))]
    for j in range(1, max_iterations + 1):
        psi[marked] *= -1.0
        psi = 2.0 * psi.mean() - psi
        out.append((j, float((psi[marked] ** 2).sum())))
    return out


def grover_runtime_estimate(n_dim: int, k: int, m_count: int) -> float:
    """log2 of the query count N^(5KN/2) / sqrt(M)."""
    if m_count < 1:
        raise ConfigError("m_count must be at least 1")
    return 5 * k * n_dim / 2 * math.log2(n_dim) - 0.5 * math.log2(m_count)
