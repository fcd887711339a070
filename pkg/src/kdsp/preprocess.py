"""Classical front end: LLL, gap-driven dimension reduction, lifting, qubit budgets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConfigError, NumericalError
from .lattice import (
    DEFAULT_DELTA,
    Basis,
    _axpy,
    _dot,
    alpha_of,
    basis_to_json,
    find_gap,
    lll_reduce,
    project_out,
    solve_coefficients,
)


@dataclass(frozen=True)
class PlanStep:
    """One reduction step.  ``prefix``/``tail``/``projected`` are only set for
    projections, where lifting needs them."""

    kind: str
    dim: int
    k: int
    p: int | None = None
    prefix: Basis | None = None
    tail: Basis | None = None
    projected: Basis | None = None

    def to_json(self) -> dict:
        out = {"step": self.kind, "dim": self.dim, "k": self.k}
        if self.p is not None:
            out["p"] = self.p
        return out


@dataclass(frozen=True)
class PreprocessPlan:
    b_p: Basis
    action: str
    p: int | None
    k: int
    k_in: int
    trace: tuple[PlanStep, ...] = field(default_factory=tuple)
    solution: Basis | None = None

    @property
    def needs_search(self) -> bool:
        return self.action != "solved"

    def to_json(self) -> dict:
        out = {
            "action": self.action,
            "p": self.p,
            "k": self.k,
            "k_in": self.k_in,
            "b_p": basis_to_json(self.b_p)["rows"],
            "trace": [s.to_json() for s in self.trace],
        }
        if self.solution is not None:
            out["solution"] = basis_to_json(self.solution)["rows"]
        return out


def preprocess(b_in: Basis, k: int, delta=DEFAULT_DELTA) -> PreprocessPlan:
    """Reduce a K-DSP instance until the working basis is LLL-reduced and gap-free.

    A gap at p with k == p solves the instance outright; k < p restricts to the
    first p vectors; k > p projects the rest orthogonally to them and continues
    with k - p.
    """
    if not 1 <= k < b_in.n:
        raise ConfigError(f"k must satisfy 1 <= k < N={b_in.n}, got {k}")
    steps: list[PlanStep] = []
    basis, kk = b_in, k
    while True:
        reduced = lll_reduce(basis, delta)
        steps.append(PlanStep("lll", reduced.n, kk))
        gap = find_gap(reduced).gap_index
        if gap is None:
            steps.append(PlanStep("direct", reduced.n, kk))
            leaf, solution = reduced, None
            break
        if gap == kk:
            steps.append(PlanStep("solved", reduced.n, kk, gap))
            leaf = reduced
            solution = _lift(steps, Basis.from_rows(reduced.rows[:gap]))
            break
        if kk < gap:
            steps.append(PlanStep("restrict", reduced.n, kk, gap))
            basis = Basis.from_rows(reduced.rows[:gap])
        else:
            projected = project_out(reduced, gap)
            steps.append(PlanStep(
                "project", reduced.n, kk, gap,
                prefix=Basis.from_rows(reduced.rows[:gap]),
                tail=Basis.from_rows(reduced.rows[gap:]),
                projected=projected,
            ))
            basis, kk = projected, kk - gap

    first = next((s for s in steps if s.kind in ("restrict", "project")), None)
    if solution is not None:
        action = "solved"
        p = next(s.p for s in steps if s.kind == "solved") if first is None else first.p
    elif first is not None:
        action, p = first.kind, first.p
    else:
        action, p = "direct", None
    return PreprocessPlan(leaf, action, p, kk, k, tuple(steps), solution)


def _nearest_plane(v: list[Fraction], prefix: Basis) -> list[Fraction]:
    """Size-reduce v against the prefix rows (Babai nearest plane)."""
    rows = [list(r) for r in prefix.rows]
    stars: list[list[Fraction]] = []
    for r in rows:
        s = list(r)
        for t in stars:
            s = _axpy(_dot(r, t) / _dot(t, t), t, s)
        stars.append(s)
    for j in range(len(rows) - 1, -1, -1):
        q = round(_dot(v, stars[j]) / _dot(stars[j], stars[j]))
        if q:
            v = _axpy(q, rows[j], v)
    return v


def _lift(steps, sub: Basis) -> Basis:
    rows = [list(r) for r in sub.rows]
    for step in reversed(steps):
        if step.kind != "project":
            continue
        lifted = []
        for r in rows:
            c = solve_coefficients(step.projected, r)
            if any(x.denominator != 1 for x in c):
                raise NumericalError("sub-solution is not in the projected lattice")
            pre = [sum((ci * t[j] for ci, t in zip(c, step.tail.rows)), Fraction(0))
                   for j in range(step.tail.dim)]
            lifted.append(_nearest_plane(pre, step.prefix))
        rows = [list(r) for r in step.prefix.rows] + lifted
    return Basis.from_rows(rows)


def lift_solution(plan: PreprocessPlan, sub_solution: Basis | None = None) -> Basis:
    """Map a solution of the reduced instance back to the input lattice."""
    if plan.action == "solved":
        return plan.solution
    if sub_solution is None:
        raise ConfigError("sub_solution required unless the plan is solved")
    if sub_solution.n != plan.k or sub_solution.dim != plan.b_p.dim:
        raise ConfigError(
            f"sub_solution shape {sub_solution.n}x{sub_solution.dim} does not match "
            f"plan (k={plan.k}, dim={plan.b_p.dim})"
        )
    return _lift(plan.trace, sub_solution)


def unimodular_transform(source: Basis, target: Basis) -> list[list[int]]:
    """Integer U with U.source = target; raises if the lattices differ."""
    u = [solve_coefficients(source, row) for row in target.rows]
    if any(x.denominator != 1 for row in u for x in row):
        raise NumericalError("bases generate different lattices")
    return [[int(x) for x in row] for row in u]


# --------------------------------------------------------------------------
# qubit budgets


@dataclass(frozen=True)
class QubitBudget:
    mode: str
    n_dim: int
    k: int
    m: int
    total_qubits: int
    coefficient_bound: float
    direct_bits: float
    closed_form: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def coefficient_bound(n_dim: int, mode: str, delta=DEFAULT_DELTA) -> float:
    """Bound on |X| entries: N*alpha^(3(N-1)/4) for LLL, N^3((N+3)/4)^2 for HKZ."""
    if mode == "LLL":
        return n_dim * alpha_of(delta) ** (3 * (n_dim - 1) / 4)
    if mode == "HKZ":
        return n_dim ** 3 * ((n_dim + 3) / 4) ** 2
    raise ConfigError(f"unknown budget mode {mode!r}")


def bits_for_bound(bound: float) -> int:
    """Smallest m with [-2^m, 2^m - 1] covering every |x| <= bound."""
    return max(0, math.ceil(math.log2(bound + 1)))


def qubit_budget(n_dim: int, k: int, mode: str = "LLL", delta=DEFAULT_DELTA,
                 m_override: int | None = None) -> QubitBudget:
    """Qubits needed to hold a K-DSP solution for an N-dimensional input.

    ``direct_bits`` is K*log2 of the product of per-coordinate bounds;
    ``closed_form`` is the asymptotic expression quoted for each mode
    (logs base 2).
    """
    if n_dim < 2 or not 1 <= k < n_dim:
        raise ConfigError(f"need 1 <= k < N, got k={k}, N={n_dim}")
    bound = coefficient_bound(n_dim, mode, delta)
    m = bits_for_bound(bound) if m_override is None else m_override
    if m < 0:
        raise ConfigError("m must be non-negative")
    direct = k * n_dim * math.log2(bound)
    log_n = math.log2(n_dim)
    if mode == "LLL":
        la = math.log2(alpha_of(delta))
        closed = 3 * k * n_dim ** 2 / 4 * la - 3 * k * n_dim / 4 * la + n_dim * log_n
    else:
        closed = 5 * k * n_dim * log_n
    return QubitBudget(mode, n_dim, k, m, k * n_dim * (m + 1), bound, direct, closed)
