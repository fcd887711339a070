"""Statevector QAOA for diagonal cost tables.

One layer multiplies amplitude z by exp(-i gamma E_z) and then rotates every
qubit by exp(-i beta X).  Parameters are trained by adjoint or
finite-difference gradients; measurements are drawn by inverse CDF from a seeded PCG64 stream.
"""

from __future__ import annotations

import math
from collections import Counter
from functools import lru_cache
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CapExceeded, ConfigError
from .hamiltonian import DiagonalCost, statevector_cap

RNG_NAME = "numpy.random.PCG64"


@dataclass(frozen=True)
class QaoaParams:
    gammas: tuple[float, ...] = ()
    betas: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if len(self.gammas) != len(self.betas):
            raise ConfigError("gammas and betas must have equal length")

    @property
    def p(self) -> int:
        return len(self.gammas)

    def to_vector(self) -> np.ndarray:
        return np.array(self.gammas + self.betas)

    @classmethod
    def from_vector(cls, theta) -> "QaoaParams":
        theta = np.asarray(theta, dtype=float)
        p = theta.size // 2
        return cls(tuple(theta[:p]), tuple(theta[p:]))

    def to_json(self) -> dict:
        return {"p": self.p, "gammas": list(self.gammas), "betas": list(self.betas)}


@dataclass(frozen=True)
class Statevector:
    amplitudes: np.ndarray

    @property
    def n(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


_BLOCK = 8


@lru_cache(maxsize=None)
def _hamming(width: int) -> np.ndarray:
    idx = np.arange(1 << width, dtype=np.uint64)
    return np.bitwise_count(idx[:, None] ^ idx[None, :]).astype(np.int64)


@lru_cache(maxsize=None)
def _adjacency(width: int) -> np.ndarray:
    return (_hamming(width) == 1).astype(np.float64)


def _blocks(n: int) -> list[int]:
    count = max(1, -(-n // _BLOCK))
    base, extra = divmod(n, count)
    return [base + (i < extra) for i in range(count)]


def _apply_blockwise(psi: np.ndarray, n: int, matrix_for) -> np.ndarray:
    """Apply a tensor product of per-block matrices; blocks cover <= 8 qubits."""
    sizes = _blocks(n)
    t = psi.reshape([1 << s for s in sizes])
    for axis, width in enumerate(sizes):
        t = np.moveaxis(np.tensordot(matrix_for(width), t, axes=(1, axis)), 0, axis)
    return np.ascontiguousarray(t).reshape(-1)


def apply_mixer(psi: np.ndarray, beta: float, n: int) -> np.ndarray:
    """exp(-i beta X) on every qubit.

    Within a block the product of single-qubit rotations has entries
    cos(beta)^(w-d) (-i sin(beta))^d for Hamming distance d.
    """
    c, s = math.cos(beta), -1j * math.sin(beta)

    def block(w):
        table = np.array([c ** (w - d) * s ** d for d in range(w + 1)])
        return table[_hamming(w)]

    return _apply_blockwise(psi, n, block)


def apply_sum_x(psi: np.ndarray, n: int) -> np.ndarray:
    """(sum_q X_q) psi."""
    sizes = _blocks(n)
    t = psi.reshape([1 << s for s in sizes])
    out = np.zeros_like(t)
    for axis, width in enumerate(sizes):
        adj = _adjacency(width)
        out += np.moveaxis(np.tensordot(adj, t, axes=(1, axis)), 0, axis)
    return out.reshape(-1)


class _Phases:
    """exp(-i gamma E) evaluated once per distinct energy."""

    def __init__(self, values: np.ndarray):
        self.levels, self.inverse = np.unique(values, return_inverse=True)

    def __call__(self, gamma: float) -> np.ndarray:
        return np.exp(-1j * gamma * self.levels)[self.inverse]


def _evolve(values: np.ndarray, n: int, gammas: Sequence[float], betas: Sequence[float],
            phases: _Phases | None = None) -> np.ndarray:
    phases = _Phases(values) if phases is None else phases
    psi = np.full(values.size, 1.0 / math.sqrt(values.size), dtype=np.complex128)
    for gamma, beta in zip(gammas, betas):
        psi = apply_mixer(psi * phases(gamma), beta, n)
    return psi


def _check_size(diag: DiagonalCost, cap: int | None):
    cap = statevector_cap() if cap is None else cap
    if diag.n > cap:
        raise CapExceeded(f"{diag.n} qubits exceeds the statevector cap {cap}")


def qaoa_state(diag: DiagonalCost, params: QaoaParams, cap: int | None = None) -> Statevector:
    _check_size(diag, cap)
    return Statevector(_evolve(diag.values, diag.n, params.gammas, params.betas))


def expectation(state: Statevector, diag: DiagonalCost) -> float:
    if state.amplitudes.size != diag.values.size:
        raise ConfigError("state and diagonal sizes differ")
    return float(np.dot(state.probabilities(), diag.values))


def _energy(values: np.ndarray, n: int, theta: np.ndarray, phases: _Phases | None = None) -> float:
    p = theta.size // 2
    psi = _evolve(values, n, theta[:p], theta[p:], phases)
    return float(np.dot(psi.real ** 2 + psi.imag ** 2, values))


def _fd_gradient(values, n, theta, h, phases=None):
    grad = np.empty_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = h
        grad[i] = (_energy(values, n, theta + step, phases)
                   - _energy(values, n, theta - step, phases)) / (2 * h)
    return grad


def _adjoint_gradient(values, n, theta, phases=None):
    """Exact gradient by running the circuit backwards once."""
    phases = _Phases(values) if phases is None else phases
    p = theta.size // 2
    gammas, betas = theta[:p], theta[p:]
    psi = _evolve(values, n, gammas, betas, phases)
    lam = values * psi
    grad = np.empty_like(theta)
    for t in range(p - 1, -1, -1):
        grad[p + t] = 2.0 * np.vdot(lam, -1j * apply_sum_x(psi, n)).real
        psi = apply_mixer(psi, -betas[t], n)
        lam = apply_mixer(lam, -betas[t], n)
        grad[t] = 2.0 * np.vdot(lam, -1j * values * psi).real
        phase = phases(-gammas[t])
        psi = psi * phase
        lam = lam * phase
    return grad


@dataclass
class TrainResult:
    params: QaoaParams
    energy: float
    restart_energies: list[float]
    trace: list[tuple[int, int, float]] = field(default_factory=list)
    seed: int = 0


def optimize_params(diag: DiagonalCost, p: int, *, lr: float = 1e-3, epochs: int = 1000,
                    tol: float = 1e-6, restarts: int = 4, seed: int = 0,
                    method: str = "adam", gradient: str = "adjoint", fd_step: float = 1e-5,
                    cap: int | None = None) -> TrainResult:
    """Minimise the energy expectation over (gammas, betas).

    Every restart draws its initial angles uniformly from [0, 2pi] and runs
    until the energy changes by less than ``tol`` between epochs or
    ``epochs`` is reached.  ``gradient`` is ``"adjoint"`` (exact, default)
    or ``"fd"`` (central differences with step ``fd_step``).  ``method`` is
    ``"adam"`` (default) or ``"gd"`` for plain steps.  The best
    energy seen over all restarts and epochs is returned.
    """
    if p < 1:
        raise ConfigError("p must be at least 1")
    if method not in ("adam", "gd"):
        raise ConfigError(f"unknown optimizer {method!r}")
    if gradient not in ("adjoint", "fd"):
        raise ConfigError(f"unknown gradient {gradient!r}")
    _check_size(diag, cap)
    values, n = diag.values, diag.n
    phases = _Phases(values)
    if gradient == "adjoint":
        grad_fn = lambda th: _adjoint_gradient(values, n, th, phases)  # noqa: E731
    else:
        grad_fn = lambda th: _fd_gradient(values, n, th, fd_step, phases)  # noqa: E731
    seqs = np.random.SeedSequence(seed).spawn(restarts)
    best_theta, best_e = None, math.inf
    restart_best = []
    trace = []
    b1, b2, eps = 0.9, 0.999, 1e-8
    for r, ss in enumerate(seqs):
        rng = np.random.Generator(np.random.PCG64(ss))
        theta = rng.uniform(0.0, 2 * math.pi, size=2 * p)
        m1 = np.zeros_like(theta)
        m2 = np.zeros_like(theta)
        old = _energy(values, n, theta, phases)
        r_best, r_theta = old, theta.copy()
        trace.append((r, 0, old))
        for epoch in range(1, epochs + 1):
            g = grad_fn(theta)
            if method == "adam":
                m1 = b1 * m1 + (1 - b1) * g
                m2 = b2 * m2 + (1 - b2) * g * g
                mh = m1 / (1 - b1 ** epoch)
                vh = m2 / (1 - b2 ** epoch)
                theta = theta - lr * mh / (np.sqrt(vh) + eps)
            else:
                theta = theta - lr * g
            e = _energy(values, n, theta, phases)
            trace.append((r, epoch, e))
            if e < r_best:
                r_best, r_theta = e, theta.copy()
            if abs(e - old) < tol:
                break
            old = e
        restart_best.append(r_best)
        if r_best < best_e:
            best_e, best_theta = r_best, r_theta
    return TrainResult(QaoaParams.from_vector(best_theta), best_e, restart_best, trace, seed)


@dataclass
class RunReport:
    shots: int
    counts: dict[str, int]
    energy_mean: float
    histogram: list[tuple[str, int]]
    prob_below: dict[str, float]
    params: QaoaParams
    seed: int
    exact_energy: float
    raw_histogram: list[tuple[str, int]] | None = None
    rng: str = RNG_NAME

    def to_json(self) -> dict:
        out = {
            "shots": self.shots,
            "seed": self.seed,
            "rng": self.rng,
            "params": self.params.to_json(),
            "energy_mean": self.energy_mean,
            "exact_energy": self.exact_energy,
            "prob_below": self.prob_below,
            "histogram": [{"vol_sq": v, "occurrences": c} for v, c in self.histogram],
            "counts": self.counts,
        }
        if self.raw_histogram is not None:
            out["raw_histogram"] = [{"energy": v, "occurrences": c} for v, c in self.raw_histogram]
        return out

    def histogram_rows(self) -> list[tuple[str, int, float]]:
        return [(v, c, c / self.shots) for v, c in self.histogram]


def sample_states(probs: np.ndarray, shots: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, rng.random(shots) * cdf[-1], side="right")
    return np.minimum(idx, probs.size - 1)


def _fraction_key(s: str) -> Fraction:
    return Fraction(s)


def sample_report(diag: DiagonalCost, params: QaoaParams, shots: int = 10000,
                  thresholds: Sequence[float] = (5, 10, 20), seed: int = 0) -> RunReport:
    """Measure ``shots`` times and bin outcomes by their exact vol^2.

    ``prob_below[t]`` is the fraction of shots with unpenalized vol^2 <= t,
    trivial zero-volume states included.
    """
    if shots < 1:
        raise ConfigError("shots must be at least 1")
    state = qaoa_state(diag, params)
    probs = state.probabilities()
    samples = sample_states(probs, shots, seed)
    n = diag.n
    counts = Counter(int(z) for z in samples)
    vol_counts: Counter = Counter()
    raw_counts: Counter = Counter()
    for z, c in counts.items():
        vol_counts[str(diag.exact_vol_sq(z))] += c
        if diag.penalized:
            raw_counts[repr(float(diag.values[z]))] += c
    vols = diag.vol_sq[samples]
    prob_below = {repr(float(t)): float(np.mean(vols <= t)) for t in thresholds}
    histogram = sorted(vol_counts.items(), key=lambda kv: _fraction_key(kv[0]))
    raw = sorted(raw_counts.items(), key=lambda kv: float(kv[0])) if diag.penalized else None
    return RunReport(
        shots=shots,
        counts={format(z, f"0{n}b")[::-1]: c for z, c in sorted(counts.items())},
        energy_mean=float(np.mean(diag.values[samples])),
        histogram=histogram,
        prob_below=prob_below,
        params=params,
        seed=seed,
        exact_energy=float(np.dot(probs, diag.values)),
        raw_histogram=raw,
    )
