"""Command-line pipeline: preprocess, budget, build, solve, report.

Every subcommand writes its artifacts into ``--out`` atomically and records a
``manifest.json``.  Errors print one line ``error:<reason>: <message>`` on
stderr and exit with the code of the matching :mod:`kdsp.errors` class; files
written before the failure are removed.

Sub-seeds: all randomness derives from ``--seed``.  Stream ``name`` uses
``SeedSequence([seed, crc32(name)])`` reduced to one 32-bit word, with names
``train``, ``sample`` and ``grover``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, KdspError
from .hamiltonian import (
    DiagonalCost,
    EncodingConfig,
    build_pauli_cost,
    count_gates,
    default_penalty,
    diagonal_vector,
    estimate_gap,
    penalize,
    spectral_gap_bound,
)
from .instances import identity_basis, scrambled_basis
from .io import atomic_write_text, dumps, read_csv, write_csv, write_json
from .lattice import (
    DEFAULT_DELTA,
    Basis,
    alpha_of,
    basis_to_json,
    covolume_sq,
    gram,
    is_lll_reduced,
    load_basis,
)
from .preprocess import lift_solution, preprocess, qubit_budget
from .qaoa import QaoaParams, optimize_params, sample_report
from .solvers import brute_force_solve, default_iterations, grover_curve, grover_simulate

COMMANDS = ("preprocess", "budget", "exact", "spectrum", "grover", "qaoa", "gates", "report", "render")
HISTOGRAM_BINS = 40


def sub_seed(seed: int, name: str) -> int:
    ss = np.random.SeedSequence([seed, zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])


@dataclass(frozen=True)
class Penalty:
    scheme: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class JobConfig:
    command: str
    basis_path: Path | None = None
    k: int = 2
    m_override: int | None = None
    delta: Fraction = DEFAULT_DELTA
    p: int = 1
    shots: int = 10000
    thresholds: tuple[float, ...] = (5.0, 10.0, 20.0)
    seed: int = 0
    penalize: Penalty | None = None
    output_dir: Path = Path("out")
    use_preprocess: bool = False
    n_max: int = 10
    restarts: int = 4
    epochs: int = 1000
    lr: float = 1e-3

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        needs_basis = self.command not in ("gates", "render", "budget")
        if needs_basis and self.basis_path is None:
            raise ConfigError("--basis is required")
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.m_override is not None and self.m_override < 0:
            raise ConfigError("m must be non-negative")
        if not Fraction(1, 4) < self.delta <= 1:
            raise ConfigError("delta must lie in (1/4, 1]")
        if self.p < 0:
            raise ConfigError("p must be non-negative")
        if self.shots < 1:
            raise ConfigError("shots must be at least 1")
        if not self.thresholds or any(t <= 0 or not math.isfinite(t) for t in self.thresholds):
            raise ConfigError("thresholds must be positive and finite")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.n_max < 3:
            raise ConfigError("n-max must be at least 3")
        if self.restarts < 1 or self.epochs < 0 or self.lr <= 0:
            raise ConfigError("restarts >= 1, epochs >= 0 and lr > 0 required")


def parse_penalty(text: str | None) -> Penalty | None:
    """``exp``, ``exp:r=2,s=0.7``, ``quadratic`` or ``quadratic:E=1``."""
    if not text:
        return None
    scheme, _, rest = text.partition(":")
    if scheme not in ("exp", "quadratic"):
        raise ConfigError(f"unknown penalty scheme {scheme!r}")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"penalty parameter {item!r} needs key=value")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"penalty parameter {item!r} is not a number") from None
    allowed = {"exp": {"r", "s"}, "quadratic": {"E"}}[scheme]
    if set(params) - allowed:
        raise ConfigError(f"{scheme} penalty accepts {sorted(allowed)}")
    if scheme == "exp" and len(params) == 1:
        raise ConfigError("exp penalty needs both r and s, or neither")
    return Penalty(scheme, params)


# --------------------------------------------------------------------------
# artifacts


class Artifacts:
    """Tracks files written by a job so a failure can remove them."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out / name
        self.written.append(p)
        return p

    def json(self, name: str, obj) -> None:
        write_json(self.path(name), obj)

    def csv(self, name: str, header, rows) -> None:
        write_csv(self.path(name), header, rows)

    def diagonal(self, name: str, diag: DiagonalCost) -> None:
        p = self.path(name)
        self.written.append(Path(str(p) + ".json"))
        diag.save(p)

    def rollback(self) -> None:
        for p in self.written:
            if p.exists():
                p.unlink()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --------------------------------------------------------------------------
# instance setup


@dataclass
class Instance:
    basis: Basis
    k: int
    cfg: EncodingConfig
    plan: object = None


def _load(cfg: JobConfig) -> Basis:
    try:
        return load_basis(cfg.basis_path)
    except OSError as exc:
        raise ConfigError(f"cannot read basis: {exc.strerror}") from None


def _instance(cfg: JobConfig, basis: Basis) -> Instance:
    """Working instance: the basis as given, or the preprocessed leaf."""
    plan = None
    k = cfg.k
    if not 1 <= k < basis.n:
        raise ConfigError(f"k must satisfy 1 <= k < N={basis.n}, got {k}")
    if cfg.use_preprocess:
        plan = preprocess(basis, k, cfg.delta)
        basis, k = plan.b_p, plan.k
    m = cfg.m_override
    if m is None:
        m = qubit_budget(basis.n, k, "LLL", cfg.delta).m if k < basis.n else 0
    return Instance(basis, k, EncodingConfig(k, basis.n, m), plan)


def _diagonal(cfg: JobConfig, inst: Instance) -> tuple[DiagonalCost, DiagonalCost]:
    raw = diagonal_vector(gram(inst.basis), inst.cfg)
    if cfg.penalize is None:
        return raw, raw
    gap = raw.min_nonzero()
    params = dict(cfg.penalize.params)
    if cfg.penalize.scheme == "exp" and not params:
        params = default_penalty(gap)
    if cfg.penalize.scheme == "quadratic" and not params:
        params = {"E": gap}
    return raw, penalize(raw, cfg.penalize.scheme, **params)


def _instance_json(inst: Instance) -> dict:
    return {"basis": basis_to_json(inst.basis)["rows"], "k": inst.k, "m": inst.cfg.m,
            "n_dim": inst.cfg.n_dim, "qubits": inst.cfg.n}


# --------------------------------------------------------------------------
# subcommands


def cmd_preprocess(cfg, art: Artifacts) -> dict:
    basis = _load(cfg)
    plan = preprocess(basis, cfg.k, cfg.delta)
    art.json("preprocess.json", plan.to_json())
    return {"action": plan.action}


def cmd_budget(cfg, art: Artifacts) -> dict:
    n = _load(cfg).n if cfg.basis_path is not None else cfg.n_max
    out = {mode: qubit_budget(n, cfg.k, mode, cfg.delta, cfg.m_override).to_json()
           for mode in ("LLL", "HKZ")}
    art.json("budget.json", out)
    return {"n_dim": n}


def cmd_exact(cfg, art: Artifacts) -> dict:
    basis = _load(cfg)
    inst = _instance(cfg, basis)
    res = brute_force_solve(gram(inst.basis), inst.cfg)
    out = {"instance": _instance_json(inst), **res.to_json()}
    if inst.plan is not None:
        vectors = [[sum(c * row[j] for c, row in zip(x, inst.basis.rows)) for j in range(inst.basis.dim)]
                   for x in res.solutions[0]]
        lifted = lift_solution(inst.plan, Basis.from_rows(vectors))
        out["lifted_solution"] = basis_to_json(lifted)["rows"]
        out["lifted_vol_sq"] = str(covolume_sq(lifted))
    art.json("exact.json", out)
    return {"min_vol_sq": str(res.min_vol_sq)}


def cmd_spectrum(cfg, art: Artifacts) -> dict:
    inst = _instance(cfg, _load(cfg))
    raw, diag = _diagonal(cfg, inst)
    gap = estimate_gap(raw, float(raw.vol_sq.max()) + 1.0)
    bound = None
    if is_lll_reduced(inst.basis, cfg.delta):
        bound = spectral_gap_bound(inst.basis, inst.k, cfg.delta)
    art.diagonal("diagonal.bin", diag)
    out = {
        "instance": _instance_json(inst),
        "min_nonzero": raw.min_nonzero(),
        "gap_estimate": gap,
        "gap_bound": bound,
        "gap_bound_note": None if bound is not None else "basis not LLL-reduced",
        "mean": float(raw.values.mean()),
        "penalty": diag.params,
    }
    art.json("spectrum.json", out)
    return {"min_nonzero": out["min_nonzero"]}


def cmd_grover(cfg, art: Artifacts) -> dict:
    inst = _instance(cfg, _load(cfg))
    raw = diagonal_vector(gram(inst.basis), inst.cfg)
    res = grover_simulate(raw, seed=sub_seed(cfg.seed, "grover"))
    curve = grover_curve(raw)
    art.csv("grover_curve.csv", ["iterations", "success_prob"], curve)
    art.json("grover.json", {
        "instance": _instance_json(inst),
        "success_prob": res.success_prob,
        "iterations": res.iterations,
        "m_count": res.m_count,
        "sample": res.sample_bits(),
        "default_iterations": default_iterations(raw.values.size, res.m_count),
    })
    return {"success_prob": res.success_prob}


def cmd_qaoa(cfg, art: Artifacts, tag: str = "") -> dict:
    inst = _instance(cfg, _load(cfg))
    raw, diag = _diagonal(cfg, inst)
    if cfg.p == 0:
        params, train = QaoaParams(), None
    else:
        train = optimize_params(diag, cfg.p, lr=cfg.lr, epochs=cfg.epochs,
                                restarts=cfg.restarts, seed=sub_seed(cfg.seed, "train"))
        params = train.params
    rep = sample_report(diag, params, cfg.shots, cfg.thresholds, sub_seed(cfg.seed, "sample"))
    out = {"instance": _instance_json(inst), "label": cfg.basis_path.stem, "p": cfg.p,
           "uniform_mean": float(raw.values.mean()), **rep.to_json()}
    if train is not None:
        out["trained_energy"] = train.energy
        out["restart_energies"] = train.restart_energies
        best = int(np.argmin(train.restart_energies))
        art.csv(f"trace{tag}.csv", ["epoch", "expectation"],
                [(e, v) for r, e, v in train.trace if r == best])
    art.csv(f"histogram{tag}.csv", ["vol_sq", "occurrences", "probability"], rep.histogram_rows())
    art.json(f"qaoa{tag}.json", out)
    return {"energy_mean": rep.energy_mean}


def gate_sweep(k: int, m: int, n_max: int) -> list[tuple]:
    rows = []
    for n in range(max(3, k + 1), n_max + 1):
        for label, basis in (("good", identity_basis(n)), ("bad", scrambled_basis(identity_basis(n)))):
            poly = build_pauli_cost(gram(basis), EncodingConfig(k, n, m))
            one, two = count_gates(poly)
            rows.append((n, label, one, two, len(poly)))
    return rows


def cmd_gates(cfg, art: Artifacts) -> dict:
    m = 1 if cfg.m_override is None else cfg.m_override
    rows = gate_sweep(cfg.k, m, cfg.n_max)
    art.csv("gates.csv", ["n_dim", "basis", "one_qubit", "two_qubit", "terms"], rows)
    return {"rows": len(rows)}


def cmd_report(cfg, art: Artifacts) -> dict:
    cmd_preprocess(cfg, art)
    cmd_budget(cfg, art)
    cmd_exact(cfg, art)
    cmd_spectrum(cfg, art)
    cmd_grover(cfg, art)
    cmd_qaoa(cfg, art)
    cmd_gates(cfg, art)
    written = render_plots(cfg.output_dir)
    art.written.extend(written)
    return {"artifacts": len(art.written)}


def cmd_render(cfg, art: Artifacts) -> dict:
    art.written.extend(render_plots(cfg.output_dir))
    return {}


# --------------------------------------------------------------------------
# plot data


def _histogram_table(rows: list[dict], max_bins: int = HISTOGRAM_BINS) -> list[tuple]:
    data = sorted(((Fraction(r["vol_sq"]), int(r["occurrences"])) for r in rows), key=lambda x: x[0])
    total = sum(c for _, c in data)
    if total == 0:
        raise ConfigError("histogram has no occurrences")
    out = [(str(v), c, c / total, 0) for v, c in data[:max_bins]]
    rest = data[max_bins:]
    if rest:
        c = sum(x for _, x in rest)
        out.append((f">{data[max_bins - 1][0]}", c, c / total, 1))
    return out


def render_plots(report_dir) -> list[Path]:
    """Normalized plot-data tables from a report directory.

    histogram*.csv -> plot_histogram*.csv (last row marked ``truncated`` when
    more than ``HISTOGRAM_BINS`` bins exist); qaoa*.json -> table_prob_vs_p.csv
    with one row per p and one column per (label, threshold); gates.csv ->
    series_gates.csv with good and bad columns per N.
    """
    d = Path(report_dir)
    hists = sorted(d.glob("histogram*.csv")) if d.is_dir() else []
    runs = sorted(d.glob("qaoa*.json")) if d.is_dir() else []
    gates = d / "gates.csv"
    if not hists and not runs and not gates.exists():
        raise ConfigError(f"missing inputs in {d}")
    written = []
    for h in hists:
        out = d / f"plot_{h.name}"
        write_csv(out, ["vol_sq", "occurrences", "probability", "truncated"], _histogram_table(read_csv(h)))
        written.append(out)
    if runs:
        table: dict[int, dict[str, float]] = {}
        columns: list[str] = []
        for r in runs:
            rec = json.loads(r.read_text())
            for t, prob in rec["prob_below"].items():
                col = f"{rec.get('label', r.stem)}<={float(t):g}"
                if col not in columns:
                    columns.append(col)
                table.setdefault(int(rec["p"]), {})[col] = prob
        out = d / "table_prob_vs_p.csv"
        write_csv(out, ["p"] + columns,
                  [[p] + [table[p].get(c, "") for c in columns] for p in sorted(table)])
        written.append(out)
    if gates.exists():
        series: dict[int, dict[str, int]] = {}
        for r in read_csv(gates):
            s = series.setdefault(int(r["n_dim"]), {})
            s[f"{r['basis']}_one"] = int(r["one_qubit"])
            s[f"{r['basis']}_two"] = int(r["two_qubit"])
        cols = ["good_one", "good_two", "bad_one", "bad_two"]
        out = d / "series_gates.csv"
        write_csv(out, ["n_dim"] + cols, [[n] + [series[n].get(c, "") for c in cols] for n in sorted(series)])
        written.append(out)
    return written


# --------------------------------------------------------------------------
# entry point

HANDLERS = {
    "preprocess": cmd_preprocess, "budget": cmd_budget, "exact": cmd_exact,
    "spectrum": cmd_spectrum, "grover": cmd_grover, "qaoa": cmd_qaoa,
    "gates": cmd_gates, "report": cmd_report, "render": cmd_render,
}


def _manifest(cfg: JobConfig, art: Artifacts, summary: dict) -> dict:
    inputs = {}
    if cfg.basis_path is not None:
        inputs[str(cfg.basis_path)] = _sha256(Path(cfg.basis_path))
    return {
        "command": cfg.command,
        "versions": {"kdsp": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "seed": cfg.seed,
        "sub_seeds": {name: sub_seed(cfg.seed, name) for name in ("train", "sample", "grover")},
        "parameters": {
            "k": cfg.k, "m": cfg.m_override, "delta": str(cfg.delta), "alpha": alpha_of(cfg.delta),
            "p": cfg.p, "shots": cfg.shots, "thresholds": list(cfg.thresholds),
            "penalize": None if cfg.penalize is None else
            {"scheme": cfg.penalize.scheme, **cfg.penalize.params},
            "preprocess": cfg.use_preprocess, "restarts": cfg.restarts, "epochs": cfg.epochs,
            "lr": cfg.lr,
        },
        "inputs_sha256": inputs,
        "artifacts": sorted(str(p.relative_to(cfg.output_dir)) for p in art.written if p.exists()),
        "summary": summary,
    }


def run(cfg: JobConfig) -> int:
    cfg.validate()
    art = Artifacts(cfg.output_dir)
    try:
        summary = HANDLERS[cfg.command](cfg, art)
        if cfg.command != "render":
            manifest = _manifest(cfg, art, summary)
            atomic_write_text(art.path("manifest.json"), dumps(manifest))
    except BaseException:
        art.rollback()
        raise
    return 0


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kdsp", description="K-densest sub-lattice pipeline")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--basis", type=Path, help="basis file: whitespace rows or JSON {\"rows\": ...}")
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--m", type=int, default=None, help="qudit bits minus one; default from the LLL budget")
    ap.add_argument("--delta", type=_fraction, default=DEFAULT_DELTA)
    ap.add_argument("--p", type=int, default=1, help="QAOA layers; 0 samples the uniform state")
    ap.add_argument("--shots", type=int, default=10000)
    ap.add_argument("--thresholds", type=_floats, default=(5.0, 10.0, 20.0))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--penalize", default=None, help="exp[:r=..,s=..] or quadratic[:E=..]")
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--preprocess", action="store_true", help="run LLL/gap reduction first")
    ap.add_argument("--n-max", type=int, default=10, help="largest N for gates; N for budget without --basis")
    ap.add_argument("--restarts", type=int, default=4)
    ap.add_argument("--epochs", type=int, default=1000)
    ap.add_argument("--lr", type=float, default=1e-3)
    return ap


def config_from_args(argv: Sequence[str] | None = None) -> JobConfig:
    a = build_parser().parse_args(argv)
    return JobConfig(
        command=a.command, basis_path=a.basis, k=a.k, m_override=a.m, delta=a.delta, p=a.p,
        shots=a.shots, thresholds=a.thresholds, seed=a.seed, penalize=parse_penalty(a.penalize),
        output_dir=a.out, use_preprocess=a.preprocess, n_max=a.n_max, restarts=a.restarts,
        epochs=a.epochs, lr=a.lr,
    )


def main(argv: Sequence[str] | None = None) -> int:
    try:
        return run(config_from_args(argv))
    except KdspError as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error:{exc.reason}: {msg}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
