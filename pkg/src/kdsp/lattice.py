"""Exact lattice linear algebra over the rationals.

Everything here works with :class:`fractions.Fraction` so that Gram-Schmidt
norms, Lovasz conditions and gap tests are compared exactly.  Bases are small
(desk scale), so plain Python lists beat numpy object arrays for clarity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .errors import CapExceeded, ConfigError, NumericalError, ParseError

ENUM_CAP = 12
DEFAULT_DELTA = Fraction(3, 4) + Fraction(1, 10**6)


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    return Fraction(value)


def _dot(u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def _det(matrix: Sequence[Sequence]) -> Fraction:
    """Determinant by Gaussian elimination over the rationals."""
    a = [[_frac(x) for x in row] for row in matrix]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return det


def _inverse(matrix: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    n = len(matrix)
    a = [[_frac(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(matrix)]
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            raise NumericalError("singular matrix")
        a[c], a[piv] = a[piv], a[c]
        inv = 1 / a[c][c]
        a[c] = [x * inv for x in a[c]]
        for r in range(n):
            if r != c and a[r][c]:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return [row[n:] for row in a]


@dataclass(frozen=True)
class Basis:
    """Ordered lattice basis; rows are vectors with exact rational entries."""

    rows: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(_frac(x) for x in row) for row in self.rows)
        object.__setattr__(self, "rows", rows)
        if not rows or not rows[0]:
            raise ConfigError("basis needs at least one non-empty row")
        d = len(rows[0])
        if any(len(r) != d for r in rows):
            raise ConfigError("basis rows have unequal length")
        if len(rows) > d:
            raise NumericalError("not a basis: more rows than ambient dimension")
        if _det(_gram_rows(rows)) == 0:
            raise NumericalError("not a basis: rows are linearly dependent")

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable]) -> "Basis":
        return cls(tuple(tuple(r) for r in rows))

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def dim(self) -> int:
        return len(self.rows[0])

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def is_integral(self) -> bool:
        return all(x.denominator == 1 for row in self.rows for x in row)

    def to_lists(self) -> list[list]:
        """Rows as ints where integral, otherwise Fractions."""
        return [[int(x) if x.denominator == 1 else x for x in row] for row in self.rows]

    def __str__(self) -> str:
        return format_basis(self)


@dataclass(frozen=True)
class GramMatrix:
    entries: tuple[tuple[Fraction, ...], ...]

    @property
    def n(self) -> int:
        return len(self.entries)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def det(self) -> Fraction:
        return _det(self.entries)

    def to_float(self):
        import numpy as np
        return np.array([[float(x) for x in row] for row in self.entries])

    @classmethod
    def from_entries(cls, entries) -> "GramMatrix":
        return cls(tuple(tuple(_frac(x) for x in row) for row in entries))


@dataclass(frozen=True)
class GsoData:
    star_norms_sq: tuple[Fraction, ...]
    mu: tuple[tuple[Fraction, ...], ...]


@dataclass(frozen=True)
class GapReport:
    gap_index: int | None
    prefix_max_sq: Fraction | None = None
    suffix_min_sq: Fraction | None = None


class SvpResult(NamedTuple):
    vector: tuple[Fraction, ...]
    norm_sq: Fraction
    coeffs: tuple[int, ...]


def _gram_rows(rows) -> list[list[Fraction]]:
    return [[_dot(a, b) for b in rows] for a in rows]


def gram(basis: Basis) -> GramMatrix:
    return GramMatrix.from_entries(_gram_rows(basis.rows))


def _gso_from_gram(g) -> tuple[list[list[Fraction]], list[Fraction]]:
    n = len(g)
    mu = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    bb: list[Fraction] = []
    for i in range(n):
        for j in range(i + 1):
            r = g[i][j] - sum((mu[j][l] * mu[i][l] * bb[l] for l in range(j)), Fraction(0))
            if j < i:
                mu[i][j] = r / bb[j]
            else:
                if r <= 0:
                    raise NumericalError("not a basis")
                bb.append(r)
    return mu, bb


def gso(basis: Basis) -> GsoData:
    """Gram-Schmidt data computed exactly from the Gram matrix."""
    mu, bb = _gso_from_gram(_gram_rows(basis.rows))
    return GsoData(tuple(bb), tuple(tuple(r) for r in mu))


def covolume_sq(basis: Basis) -> Fraction:
    return _det(_gram_rows(basis.rows))


# --------------------------------------------------------------------------
# LLL


def _check_delta(delta) -> Fraction:
    delta = _frac(delta)
    if not Fraction(1, 4) < delta <= 1:
        raise ConfigError(f"delta must lie in (1/4, 1], got {delta}")
    return delta


def alpha_of(delta) -> float:
    """LLL approximation constant 1/(delta - 1/4); 2 for delta = 3/4, 4/3 for delta = 1."""
    return float(1 / (_check_delta(delta) - Fraction(1, 4)))


def _axpy(q, x, y):
    """y - q*x, rowwise."""
    return [b - q * a for a, b in zip(x, y)]


def _lll_rows(rows: list[list], delta: Fraction, start: int = 0) -> list[list]:
    """In-place LLL on ``rows[start:]``; rows before ``start`` are left alone.

    Size reduction only touches pairs inside the block, so running this on a
    tail block is LLL on the projected lattice.
    """
    n = len(rows)
    if n - start < 2:
        return rows
    mu, bb = _gso_from_gram(_gram_rows(rows))
    k = start + 1
    while k < n:
        for j in range(k - 1, start - 1, -1):
            q = round(mu[k][j])
            if q:
                rows[k] = _axpy(q, rows[j], rows[k])
                for l in range(j):
                    mu[k][l] -= q * mu[j][l]
                mu[k][j] -= q
        m = mu[k][k - 1]
        if delta * bb[k - 1] <= bb[k] + m * m * bb[k - 1]:
            k += 1
            continue
        rows[k - 1], rows[k] = rows[k], rows[k - 1]
        big_b = bb[k] + m * m * bb[k - 1]
        new_m = m * bb[k - 1] / big_b
        bb[k] = bb[k - 1] * bb[k] / big_b
        bb[k - 1] = big_b
        mu[k][k - 1] = new_m
        for j in range(k - 1):
            mu[k - 1][j], mu[k][j] = mu[k][j], mu[k - 1][j]
        for i in range(k + 1, n):
            t = mu[i][k]
            mu[i][k] = mu[i][k - 1] - m * t
            mu[i][k - 1] = t + new_m * mu[i][k]
        k = max(k - 1, start + 1)
    return rows


def _common_denominator(rows) -> int:
    return math.lcm(*(x.denominator for row in rows for x in row))


def lll_reduce(basis: Basis, delta=DEFAULT_DELTA) -> Basis:
    """LLL-reduce ``basis`` with Lovasz parameter ``delta`` in (1/4, 1].

    Rational input is scaled to integers by the common denominator first and
    scaled back afterwards.
    """
    delta = _check_delta(delta)
    scale = _common_denominator(basis.rows)
    rows = [[int(x * scale) for x in row] for row in basis.rows]
    _lll_rows(rows, delta)
    return Basis.from_rows([[Fraction(x, scale) for x in row] for row in rows])


def is_size_reduced(basis: Basis) -> bool:
    mu = gso(basis).mu
    return all(abs(mu[i][j]) <= Fraction(1, 2) for i in range(basis.n) for j in range(i))


def is_lll_reduced(basis: Basis, delta=DEFAULT_DELTA) -> bool:
    delta = _check_delta(delta)
    data = gso(basis)
    bb, mu = data.star_norms_sq, data.mu
    if not is_size_reduced(basis):
        return False
    return all(delta * bb[i] <= bb[i + 1] + mu[i + 1][i] ** 2 * bb[i]
               for i in range(basis.n - 1))


# --------------------------------------------------------------------------
# gaps, projections, duals


def find_gap(basis: Basis) -> GapReport:
    """Smallest r with max(|b_1*|..|b_r*|) < min(|b_{r+1}*|..|b_N*|)."""
    bb = gso(basis).star_norms_sq
    n = len(bb)
    suffix = list(bb)
    for i in range(n - 2, -1, -1):
        suffix[i] = min(suffix[i], suffix[i + 1])
    prefix = bb[0]
    for r in range(1, n):
        prefix = max(prefix, bb[r - 1])
        if prefix < suffix[r]:
            return GapReport(r, prefix, suffix[r])
    return GapReport(None)


def project_out(basis: Basis, p: int) -> Basis:
    """Project rows p..N-1 orthogonally to span(rows 0..p-1)."""
    rows = basis.rows
    stars: list[list[Fraction]] = []
    for row in rows[:p]:
        v = list(row)
        for s in stars:
            v = _axpy(_dot(row, s) / _dot(s, s), s, v)
        stars.append(v)
    out = []
    for row in rows[p:]:
        v = list(row)
        for s in stars:
            v = _axpy(_dot(row, s) / _dot(s, s), s, v)
        out.append(v)
    return Basis.from_rows(out)


def solve_coefficients(basis: Basis, vector: Sequence) -> tuple[Fraction, ...]:
    """Exact c with c.B = vector; raises if ``vector`` is not in the span."""
    v = [_frac(x) for x in vector]
    rhs = [_dot(v, row) for row in basis.rows]
    inv = _inverse(_gram_rows(basis.rows))
    c = [_dot(inv_row, rhs) for inv_row in inv]
    back = [sum((ci * row[t] for ci, row in zip(c, basis.rows)), Fraction(0))
            for t in range(basis.dim)]
    if back != v:
        raise NumericalError("vector is not in the span of the basis")
    return tuple(c)


def dual_basis(basis: Basis) -> Basis:
    """Rows d_j in span(B) with <b_i, d_j> = [i == j]."""
    inv = _inverse(_gram_rows(basis.rows))
    rows = basis.rows
    return Basis.from_rows(
        [[_dot(inv_row, [r[t] for r in rows]) for t in range(basis.dim)] for inv_row in inv]
    )


def same_lattice(a: Basis, b: Basis) -> bool:
    """True if the two bases generate the same lattice."""
    if a.n != b.n or a.dim != b.dim or covolume_sq(a) != covolume_sq(b):
        return False
    try:
        return all(c.denominator == 1 for row in b.rows for c in solve_coefficients(a, row))
    except NumericalError:
        return False


# --------------------------------------------------------------------------
# enumeration


def _enumerate_shortest(mu, bb, radius: Fraction) -> tuple[Fraction, list[int]]:
    """Fincke-Pohst depth-first enumeration over the GSO data (mu, bb).

    Returns the minimal squared norm and the coefficient vector that is
    lexicographically smallest once normalised to a positive leading entry.
    """
    n = len(bb)
    best_norm = radius
    best_key: tuple[int, ...] | None = None
    x = [0] * n

    def canon(coeffs):
        lead = next(c for c in coeffs if c)
        return tuple(coeffs) if lead > 0 else tuple(-c for c in coeffs)

    def rec(i: int, partial: Fraction):
        nonlocal best_norm, best_key
        c = -sum((mu[j][i] * x[j] for j in range(i + 1, n)), Fraction(0))
        rem = best_norm - partial
        if rem < 0:
            return
        span = math.sqrt(float(rem / bb[i]))
        lo = math.floor(float(c) - span) - 1
        hi = math.ceil(float(c) + span) + 1
        for xi in range(lo, hi + 1):
            d = xi - c
            norm = partial + d * d * bb[i]
            if norm > best_norm:
                continue
            x[i] = xi
            if i == 0:
                if any(x):
                    key = canon(x)
                    if norm < best_norm or best_key is None or key < best_key:
                        best_norm, best_key = norm, key
            else:
                rec(i - 1, norm)
        x[i] = 0

    rec(n - 1, Fraction(0))
    if best_key is None:
        raise NumericalError("enumeration found no vector within the radius")
    return best_norm, list(best_key)


def svp_enumerate(basis: Basis, cap: int = ENUM_CAP) -> SvpResult:
    """Shortest nonzero vector, exactly, by Fincke-Pohst enumeration."""
    if basis.n > cap:
        raise CapExceeded(f"enumeration cap exceeded: N={basis.n} > {cap}")
    mu, bb = _gso_from_gram(_gram_rows(basis.rows))
    radius = min(_dot(r, r) for r in basis.rows)
    norm, coeffs = _enumerate_shortest(mu, bb, radius)
    vec = tuple(sum((c * row[t] for c, row in zip(coeffs, basis.rows)), Fraction(0))
                for t in range(basis.dim))
    return SvpResult(vec, norm, tuple(coeffs))


def _unimodular_completion(x: Sequence[int]) -> list[list[int]]:
    """Unimodular integer matrix whose first row is the primitive vector x."""
    t = len(x)
    y = list(x)
    w = [[int(i == j) for j in range(t)] for i in range(t)]
    while sum(1 for v in y if v) > 1:
        a = min((i for i in range(t) if y[i]), key=lambda i: abs(y[i]))
        for b in range(t):
            if b != a and y[b]:
                q = y[b] // y[a]
                y[b] -= q * y[a]
                w[a] = [wa + q * wb for wa, wb in zip(w[a], w[b])]
    a = next(i for i in range(t) if y[i])
    if abs(y[a]) != 1:
        raise NumericalError("coefficient vector is not primitive")
    if y[a] < 0:
        w[a] = [-v for v in w[a]]
    w[0], w[a] = w[a], w[0]
    return w


def _size_reduce_rows(rows: list[list]) -> list[list]:
    n = len(rows)
    for k in range(1, n):
        mu, _ = _gso_from_gram(_gram_rows(rows))
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q:
                rows[k] = _axpy(q, rows[j], rows[k])
                for l in range(j):
                    mu[k][l] -= q * mu[j][l]
                mu[k][j] -= q
    return rows


def _hkz_rows(rows: list[list], cap: int) -> list[list]:
    n = len(rows)
    if n > cap:
        raise CapExceeded(f"enumeration cap exceeded: N={n} > {cap}")
    delta = Fraction(99, 100)
    _lll_rows(rows, delta)
    for i in range(n - 1):
        _lll_rows(rows, delta, start=i)
        mu, bb = _gso_from_gram(_gram_rows(rows))
        sub_mu = [r[i:] for r in mu[i:]]
        norm, x = _enumerate_shortest(sub_mu, bb[i:], bb[i])
        if norm == bb[i]:
            # b_i* already attains the projected minimum; keep the row
            continue
        u = _unimodular_completion(x)
        tail = rows[i:]
        rows[i:] = [[sum((c * r[t] for c, r in zip(urow, tail)), Fraction(0))
                     for t in range(len(tail[0]))] for urow in u]
    return _size_reduce_rows(rows)


def hkz_reduce(basis: Basis, dual: bool = False, cap: int = ENUM_CAP) -> Basis:
    """HKZ reduction; with ``dual`` the reversed dual basis is HKZ-reduced."""
    if basis.n > cap:
        raise CapExceeded(f"enumeration cap exceeded: N={basis.n} > {cap}")
    if not dual:
        rows = [list(r) for r in basis.rows]
        return Basis.from_rows(_hkz_rows(rows, cap))
    d = dual_basis(basis)
    reduced = _hkz_rows([list(r) for r in reversed(d.rows)], cap)
    return dual_basis(Basis.from_rows(list(reversed(reduced))))


def projected_lambda1_sq(basis: Basis, i: int) -> Fraction:
    """Squared first minimum of the lattice projected orthogonally to b_0..b_{i-1}."""
    return svp_enumerate(project_out(basis, i) if i else basis).norm_sq


# --------------------------------------------------------------------------
# I/O


def parse_basis_text(text: str) -> Basis:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([Fraction(tok) for tok in line.split()])
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    if not rows:
        raise ParseError("empty basis")
    return Basis.from_rows(rows)


def _fmt(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def format_basis(basis: Basis) -> str:
    return "\n".join(" ".join(_fmt(x) for x in row) for row in basis.rows) + "\n"


def basis_to_json(basis: Basis) -> dict:
    return {"rows": [[int(x) if x.denominator == 1 else _fmt(x) for x in row]
                     for row in basis.rows]}


def parse_basis_json(obj) -> Basis:
    if isinstance(obj, str):
        try:
            obj = json.loads(obj)
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc)) from None
    try:
        rows = obj["rows"]
        return Basis.from_rows([[Fraction(str(x)) for x in row] for row in rows])
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad basis JSON: {exc}") from None


def load_basis(path) -> Basis:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return parse_basis_json(text)
    return parse_basis_text(text)
