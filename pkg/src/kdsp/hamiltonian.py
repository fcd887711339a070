"""Diagonal K-DSP cost over the encoded qubit register.

Bit convention: qubit bit 0 <-> Z = +1 <-> O = 0, so a qudit of m+1 qubits
decodes to sum_w 2^w b_w - 2^m, an integer in [-2^m, 2^m - 1].  Qubit
``((i * n_dim + a) * (m + 1) + w)`` holds bit w of coefficient a of vector i,
and computational basis index z stores qubit q in bit q of z.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded, ConfigError, NumericalError
from .lattice import DEFAULT_DELTA, Basis, GramMatrix, alpha_of, covolume_sq, is_lll_reduced

SYMBOLIC_K_CAP = 4
_CHUNK = 1 << 16


def statevector_cap() -> int:
    """Max qubits for dense tables; ``KDSP_STATEVECTOR_CAP`` overrides 24."""
    return int(os.environ.get("KDSP_STATEVECTOR_CAP", 24))


@dataclass(frozen=True)
class EncodingConfig:
    k: int
    n_dim: int
    m: int

    def __post_init__(self):
        if self.k < 1 or self.n_dim < 1 or self.m < 0:
            raise ConfigError(f"invalid encoding k={self.k} n_dim={self.n_dim} m={self.m}")

    @property
    def bits_per_qudit(self) -> int:
        return self.m + 1

    @property
    def n(self) -> int:
        return self.k * self.n_dim * (self.m + 1)

    def qubit(self, i: int, a: int, w: int) -> int:
        return (i * self.n_dim + a) * (self.m + 1) + w

    def layout(self) -> dict[tuple[int, int, int], int]:
        return {(i, a, w): self.qubit(i, a, w)
                for i in range(self.k) for a in range(self.n_dim) for w in range(self.m + 1)}


def index_to_bits(z: int, n: int) -> list[int]:
    return [(z >> q) & 1 for q in range(n)]


def bits_to_index(bits: Sequence[int]) -> int:
    return sum(int(b) << q for q, b in enumerate(bits))


def decode_coefficients(bits: Sequence[int] | int, cfg: EncodingConfig) -> list[list[int]]:
    """Integer coefficient matrix X (k x n_dim) held by a bitstring."""
    if isinstance(bits, (int, np.integer)):
        bits = index_to_bits(int(bits), cfg.n)
    if len(bits) != cfg.n:
        raise ConfigError(f"bitstring has {len(bits)} bits, encoding needs {cfg.n}")
    shift = 1 << cfg.m
    return [[sum(int(bits[cfg.qubit(i, a, w)]) << w for w in range(cfg.m + 1)) - shift
             for a in range(cfg.n_dim)] for i in range(cfg.k)]


def encode_coefficients(x: Sequence[Sequence[int]], cfg: EncodingConfig) -> int:
    """Inverse of :func:`decode_coefficients`, returning the basis index."""
    z = 0
    for i, row in enumerate(x):
        for a, v in enumerate(row):
            u = int(v) + (1 << cfg.m)
            if not 0 <= u < (1 << (cfg.m + 1)):
                raise ConfigError(f"coefficient {v} outside the encodable range")
            for w in range(cfg.m + 1):
                if (u >> w) & 1:
                    z |= 1 << cfg.qubit(i, a, w)
    return z


def decode_block(cfg: EncodingConfig, start: int, stop: int) -> np.ndarray:
    """Coefficient matrices for basis indices [start, stop) as (count, k, n_dim)."""
    z = np.arange(start, stop, dtype=np.int64)
    shape = (stop - start, cfg.k, cfg.n_dim)
    x = np.zeros(shape, dtype=np.int64)
    for i in range(cfg.k):
        for a in range(cfg.n_dim):
            acc = np.zeros(stop - start, dtype=np.int64)
            for w in range(cfg.m + 1):
                acc += ((z >> cfg.qubit(i, a, w)) & 1) << w
            x[:, i, a] = acc - (1 << cfg.m)
    return x


def _scaled_gram(g: GramMatrix) -> tuple[list[list[int]], int]:
    den = math.lcm(*(x.denominator for row in g.entries for x in row))
    return [[int(x * den) for x in row] for row in g.entries], den


def _bareiss(a: list[list[int]]) -> int:
    """Fraction-free determinant of an integer matrix."""
    a = [list(r) for r in a]
    n = len(a)
    sign, prev = 1, 1
    for c in range(n - 1):
        if a[c][c] == 0:
            piv = next((r for r in range(c + 1, n) if a[r][c] != 0), None)
            if piv is None:
                return 0
            a[c], a[piv] = a[piv], a[c]
            sign = -sign
        for i in range(c + 1, n):
            for j in range(c + 1, n):
                a[i][j] = (a[i][j] * a[c][c] - a[i][c] * a[c][j]) // prev
        prev = a[c][c]
    return sign * a[n - 1][n - 1]


def eval_cost_direct(bits: Sequence[int] | int, g: GramMatrix, cfg: EncodingConfig) -> Fraction:
    """Exact squared covolume det(X G X^T) of the decoded sub-lattice."""
    if g.n != cfg.n_dim:
        raise ConfigError(f"Gram matrix is {g.n}x{g.n}, encoding has n_dim={cfg.n_dim}")
    x = decode_coefficients(bits, cfg)
    gi, den = _scaled_gram(g)
    xg = [[sum(r[a] * gi[a][b] for a in range(cfg.n_dim)) for b in range(cfg.n_dim)] for r in x]
    sub = [[sum(u * v for u, v in zip(xr, yr)) for yr in x] for xr in xg]
    return Fraction(_bareiss(sub), den ** cfg.k)


def _batched_det(m: np.ndarray) -> np.ndarray:
    """Exact determinants of a batch of PSD integer matrices, shape (B, k, k).

    No pivoting: for a PSD matrix a vanishing leading minor already forces a
    zero determinant, so those entries are masked to 0.
    """
    m = m.copy()
    count, k, _ = m.shape
    if k == 1:
        return m[:, 0, 0]
    singular = np.zeros(count, dtype=bool)
    prev = np.ones(count, dtype=m.dtype)
    for c in range(k - 1):
        piv = m[:, c, c]
        singular |= piv == 0
        safe = np.where(piv == 0, 1, piv)
        m[:, c, c] = safe
        for i in range(c + 1, k):
            for j in range(c + 1, k):
                m[:, i, j] = (m[:, i, j] * safe - m[:, i, c] * m[:, c, j]) // prev
        prev = safe
    det = m[:, k - 1, k - 1]
    det[singular] = 0
    return det


def _exact_block(gi: np.ndarray, cfg: EncodingConfig, start: int, stop: int) -> np.ndarray:
    x = decode_block(cfg, start, stop).astype(gi.dtype)
    sub = np.einsum("bia,ac,bjc->bij", x, gi, x) if gi.dtype != object else \
        np.array([xx @ gi @ xx.T for xx in x], dtype=object).reshape(-1, cfg.k, cfg.k)
    return _batched_det(sub)


def _integer_gram(g: GramMatrix, cfg: EncodingConfig) -> tuple[np.ndarray, int]:
    rows, den = _scaled_gram(g)
    max_g = max(abs(v) for r in rows for v in r) or 1
    entry = (cfg.n_dim * (1 << cfg.m)) ** 2 * max_g
    hadamard = (math.sqrt(cfg.k) * entry) ** cfg.k
    dtype = np.int64 if hadamard * entry < 2.0 ** 62 else object
    return np.array(rows, dtype=dtype), den


@dataclass(frozen=True)
class DiagonalCost:
    """Energies of every computational basis state.

    ``vol_num / vol_den`` keeps the exact unpenalized squared covolumes even
    after :func:`penalize` rewrites ``values``.
    """

    values: np.ndarray
    n: int
    penalized: bool = False
    params: dict | None = None
    vol_num: np.ndarray | None = field(default=None, repr=False)
    vol_den: int = 1

    @property
    def vol_sq(self) -> np.ndarray:
        if self.vol_num is None:
            return self.values
        return self.vol_num.astype(np.float64) / self.vol_den

    def exact_vol_sq(self, z: int) -> Fraction:
        if self.vol_num is None:
            return Fraction(float(self.values[z])).limit_denominator(10**9)
        return Fraction(int(self.vol_num[z]), self.vol_den)

    def min_nonzero(self) -> float:
        v = self.vol_sq
        nz = v[v > 0]
        if nz.size == 0:
            raise NumericalError("no nontrivial sub-lattice in box")
        return float(nz.min())

    def save(self, path) -> None:
        """Little-endian float64 table at ``path`` plus ``path.json`` sidecar."""
        from .io import atomic_write_bytes, atomic_write_text
        atomic_write_bytes(path, self.values.astype("<f8").tobytes())
        atomic_write_text(str(path) + ".json", json.dumps(
            {"n": self.n, "penalized": self.penalized, "params": self.params},
            sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "DiagonalCost":
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
        values = np.fromfile(path, dtype="<f8")
        if values.size != 1 << meta["n"]:
            raise NumericalError("diagonal file size does not match sidecar")
        return cls(values, meta["n"], meta["penalized"], meta["params"])


def diagonal_vector(g: GramMatrix, cfg: EncodingConfig, cap: int | None = None) -> DiagonalCost:
    """Squared covolume of every encoded state, computed exactly then cast to float."""
    cap = statevector_cap() if cap is None else cap
    if cfg.n > cap:
        raise CapExceeded(f"{cfg.n} qubits exceeds the statevector cap {cap}")
    if g.n != cfg.n_dim:
        raise ConfigError(f"Gram matrix is {g.n}x{g.n}, encoding has n_dim={cfg.n_dim}")
    gi, den = _integer_gram(g, cfg)
    size = 1 << cfg.n
    num = np.empty(size, dtype=gi.dtype)
    for start in range(0, size, _CHUNK):
        stop = min(size, start + _CHUNK)
        num[start:stop] = _exact_block(gi, cfg, start, stop)
    scale = den ** cfg.k
    values = num.astype(np.float64) / scale
    return DiagonalCost(values, cfg.n, vol_num=num, vol_den=scale)


def penalize(diag: DiagonalCost, scheme: str, **params) -> DiagonalCost:
    """Lift the trivial zero-volume states.

    ``exp``: v + r*exp(-s*v) with r, s > 0.  ``quadratic``: (v - E)^2, E > 0.
    """
    v = diag.vol_sq
    if scheme == "exp":
        r, s = float(params["r"]), float(params["s"])
        if r <= 0 or s <= 0:
            raise ConfigError("exp penalty needs r > 0 and s > 0")
        new = v + r * np.exp(-s * v)
        rec = {"scheme": "exp", "r": r, "s": s}
    elif scheme == "quadratic":
        e = float(params["E"])
        if e <= 0:
            raise ConfigError("quadratic penalty needs E > 0")
        new = (v - e) ** 2
        rec = {"scheme": "quadratic", "E": e}
    else:
        raise ConfigError(f"unknown penalty scheme {scheme!r}")
    num = diag.vol_num
    if num is None:
        num, den = None, 1
    else:
        den = diag.vol_den
    return DiagonalCost(new, diag.n, True, rec, num, den)


def default_penalty(gap_estimate: float, gap_lower: float | None = None) -> dict:
    """r = 2*gap, s = ln 4 / gap_lower.

    Zero states then sit at r while first excited states move up by at most
    a quarter of the gap estimate.
    """
    lo = gap_estimate if gap_lower is None else gap_lower
    if gap_estimate <= 0 or lo <= 0:
        raise ConfigError("gap estimates must be positive")
    return {"r": 2.0 * gap_estimate, "s": math.log(4.0) / lo}


def spectral_gap_bound(basis: Basis, k: int, delta=DEFAULT_DELTA) -> float:
    """alpha^(K(N-1)) * vol(L)^(2K) for an LLL-reduced basis."""
    if not is_lll_reduced(basis, delta):
        raise ConfigError("basis not reduced: spectral gap bound needs an LLL-reduced basis")
    return alpha_of(delta) ** (k * (basis.n - 1)) * float(covolume_sq(basis)) ** k


def estimate_gap(diag: DiagonalCost, upper: float, tol: float = 1e-6,
                 cross_check: bool = True) -> float:
    """Binary search for the smallest nonzero squared covolume.

    The oracle answers "is there a state with 0 < vol^2 <= t"; here it is a
    scan of the table.  Returns an upper estimate within ``tol``.
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    v = diag.vol_sq
    nonzero = v[v > 0]

    def oracle(t: float) -> bool:
        return bool(np.any(nonzero <= t))

    if not oracle(upper):
        raise NumericalError(f"gap search failed: no nonzero energy at or below {upper}")
    lo, hi = 0.0, float(upper)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if oracle(mid):
            hi = mid
        else:
            lo = mid
    if cross_check and not (hi - tol <= float(nonzero.min()) <= hi):
        raise NumericalError("gap search disagrees with the exact scan")
    return hi


# --------------------------------------------------------------------------
# symbolic Z expansion
#
# Polynomials are dicts {bitmask of qubits: integer coefficient}; a product
# of Z monomials is the XOR of their masks since Z^2 = 1.


def _pmul(p: dict, q: dict) -> dict:
    out: dict[int, int] = {}
    for a, ca in p.items():
        for b, cb in q.items():
            key = a ^ b
            out[key] = out.get(key, 0) + ca * cb
    return {k: v for k, v in out.items() if v}


def _padd(acc: dict, p: dict, scale: int = 1) -> dict:
    for k, v in p.items():
        acc[k] = acc.get(k, 0) + scale * v
    return acc


def _clean(p: dict) -> dict:
    return {k: v for k, v in p.items() if v}


def _qudit_twice(cfg: EncodingConfig, i: int, a: int) -> dict:
    """2*Q = -1 - sum_w 2^w Z_w for coefficient a of vector i."""
    p = {0: -1}
    for w in range(cfg.m + 1):
        p[1 << cfg.qubit(i, a, w)] = -(1 << w)
    return p


@dataclass
class PauliPolynomial:
    """Z-monomials (sorted qubit tuples) with real coefficients."""

    terms: dict[tuple[int, ...], float]
    n: int

    @classmethod
    def _from_masks(cls, masks: dict, n: int, scale: int) -> "PauliPolynomial":
        terms = {}
        for mask, c in masks.items():
            if c:
                idx = tuple(q for q in range(n) if (mask >> q) & 1)
                terms[idx] = float(Fraction(c, scale))
        return cls(dict(sorted(terms.items(), key=lambda kv: (len(kv[0]), kv[0]))), n)

    def max_weight(self) -> int:
        return max((len(t) for t in self.terms), default=0)

    def __len__(self) -> int:
        return len(self.terms)

    def evaluate(self, z: int) -> float:
        return sum(c * (-1) ** sum((z >> q) & 1 for q in t) for t, c in self.terms.items())

    def diagonal(self) -> np.ndarray:
        """Value on every basis state; Z_q contributes (1 - 2*bit_q)."""
        if self.n > statevector_cap():
            raise CapExceeded(f"{self.n} qubits exceeds the statevector cap")
        z = np.arange(1 << self.n, dtype=np.uint64)
        out = np.zeros(1 << self.n)
        for t, c in self.terms.items():
            mask = np.uint64(sum(1 << q for q in t))
            parity = np.bitwise_count(z & mask) & 1
            out += c * (1.0 - 2.0 * parity)
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps({"z": list(t), "c": c}) + "\n" for t, c in self.terms.items())

    @classmethod
    def from_jsonl(cls, text: str, n: int) -> "PauliPolynomial":
        terms = {}
        for line in text.splitlines():
            if line.strip():
                rec = json.loads(line)
                terms[tuple(rec["z"])] = float(rec["c"])
        return cls(terms, n)


def _permutation_sign(perm: Sequence[int]) -> int:
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inv % 2 else 1


def build_pauli_cost(g: GramMatrix, cfg: EncodingConfig) -> PauliPolynomial:
    """Leibniz expansion of det(<v_i, v_j>) with every coefficient replaced by
    its qudit operator, collected into Z-monomials.

    Works on 2Q and the integer-scaled Gram matrix so that all arithmetic is
    exact; the common factor (4*den)^k is divided out at the end.
    """
    if cfg.k > SYMBOLIC_K_CAP:
        raise CapExceeded(f"symbolic expansion refused for k={cfg.k} > {SYMBOLIC_K_CAP}")
    if g.n != cfg.n_dim:
        raise ConfigError(f"Gram matrix is {g.n}x{g.n}, encoding has n_dim={cfg.n_dim}")
    gi, den = _scaled_gram(g)
    n_dim = cfg.n_dim
    q = [[_qudit_twice(cfg, i, a) for a in range(n_dim)] for i in range(cfg.k)]
    # lin[j][a] = sum_b G_ab * 2Q^(j)_b, a linear polynomial
    lin = [[_clean(_padd_many(((gi[a][b], q[j][b]) for b in range(n_dim))))
            for a in range(n_dim)] for j in range(cfg.k)]
    inner: dict[tuple[int, int], dict] = {}
    for i in range(cfg.k):
        for j in range(cfg.k):
            acc: dict[int, int] = {}
            for a in range(n_dim):
                _padd(acc, _pmul(q[i][a], lin[j][a]))
            inner[i, j] = _clean(acc)
    total: dict[int, int] = {}
    for perm in itertools.permutations(range(cfg.k)):
        prod = {0: 1}
        for i, j in enumerate(perm):
            prod = _pmul(prod, inner[i, j])
        _padd(total, prod, _permutation_sign(perm))
    return PauliPolynomial._from_masks(_clean(total), cfg.n, (4 * den) ** cfg.k)


def _padd_many(pairs: Iterable[tuple[int, dict]]) -> dict:
    acc: dict[int, int] = {}
    for scale, p in pairs:
        if scale:
            _padd(acc, p, scale)
    return acc


def closed_form_tensor(g: np.ndarray, k: int) -> np.ndarray:
    """Coefficient tensor T with vol^2 = sum T[i,j,k,l,...] x_i x_j y_k y_l ...

    k = 2 is G_ij G_kl - G_ik G_jl; k = 3 is the six-term expansion with
    indices (i, j, k, l, m, n) pairing x_i x_j y_k y_l z_m z_n.
    """
    e = np.einsum
    if k == 1:
        return g.copy()
    if k == 2:
        return e("ij,kl->ijkl", g, g) - e("ik,jl->ijkl", g, g)
    if k == 3:
        return (e("ij,kl,mn->ijklmn", g, g, g) + e("ik,lm,nj->ijklmn", g, g, g)
                + e("im,kj,nl->ijklmn", g, g, g) - e("im,kl,nj->ijklmn", g, g, g)
                - e("ik,lj,mn->ijklmn", g, g, g) - e("ij,km,nl->ijklmn", g, g, g))
    raise ConfigError("closed forms exist for k in {1, 2, 3}")


def closed_form_cost(x: Sequence[Sequence[int]], g: np.ndarray) -> float:
    """Evaluate the closed-form coefficient sum for one coefficient matrix."""
    x = np.asarray(x)
    t = closed_form_tensor(np.asarray(g), len(x))
    for row in x:
        t = np.tensordot(row, np.tensordot(row, t, axes=(0, 0)), axes=(0, 0))
    return float(t)


def build_pauli_cost_closed_form(g: GramMatrix, cfg: EncodingConfig) -> PauliPolynomial:
    """Substitute qudit operators into the k = 2 / k = 3 coefficient tensor.

    Independent of the Leibniz route in :func:`build_pauli_cost`; used to
    cross-check it term for term.
    """
    gi, den = _scaled_gram(g)
    t = closed_form_tensor(np.array(gi, dtype=object), cfg.k)
    n_dim = cfg.n_dim
    pairs = [[[_pmul(_qudit_twice(cfg, i, a), _qudit_twice(cfg, i, b)) for b in range(n_dim)]
              for a in range(n_dim)] for i in range(cfg.k)]

    def contract(sub, reg: int) -> dict:
        if reg == cfg.k - 1:
            return _clean(_padd_many((int(sub[a, b]), pairs[reg][a][b])
                                     for a in range(n_dim) for b in range(n_dim)))
        acc: dict[int, int] = {}
        for a in range(n_dim):
            for b in range(n_dim):
                rest = contract(sub[a, b], reg + 1)
                if rest:
                    _padd(acc, _pmul(pairs[reg][a][b], rest))
        return _clean(acc)

    return PauliPolynomial._from_masks(contract(t, 0), cfg.n, (4 * den) ** cfg.k)


def count_gates(poly: PauliPolynomial) -> tuple[int, int]:
    """One QAOA layer: (one-qubit, two-qubit) gates with a CNOT-ladder per monomial.

    A weight-w monomial costs one RZ and 2(w-1) CNOTs; the mixer adds one RX
    per qubit.
    """
    one, two = poly.n, 0
    for t, c in poly.terms.items():
        w = len(t)
        if w == 0 or c == 0:
            continue
        one += 1
        two += 2 * (w - 1)
    return one, two
