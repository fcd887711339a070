import csv
import hashlib
import json
from fractions import Fraction

import pytest

from kdsp.cli import main, parse_penalty, render_plots
from kdsp.errors import ConfigError

EXAMPLE = "1 -1 0\n0 1 -1\n0 0 1\n"
IDENTITY = "1 0 0\n0 1 0\n0 0 1\n"


@pytest.fixture
def files(tmp_path):
    (tmp_path / "example.txt").write_text(EXAMPLE)
    (tmp_path / "identity.txt").write_text(IDENTITY)
    return tmp_path


def run(args, capsys=None):
    code = main([str(a) for a in args])
    err = capsys.readouterr().err if capsys else ""
    return code, err


def read_json(path):
    return json.loads(path.read_text())


def test_exact_example(files):
    out = files / "o"
    assert run(["exact", "--basis", files / "example.txt", "--k", 2, "--m", 1, "--out", out])[0] == 0
    assert '"min_vol_sq": "1"' in (out / "exact.json").read_text()
    man = read_json(out / "manifest.json")
    digest = hashlib.sha256(EXAMPLE.encode()).hexdigest()
    assert list(man["inputs_sha256"].values()) == [digest]
    assert man["parameters"]["m"] == 1 and "alpha" in man["parameters"]


def test_exact_with_preprocess(files):
    out = files / "o"
    assert run(["exact", "--basis", files / "example.txt", "--k", 2, "--m", 1, "--preprocess", "--out", out])[0] == 0
    rec = read_json(out / "exact.json")
    assert rec["lifted_vol_sq"] == "1" and len(rec["lifted_solution"]) == 2


def test_qaoa_p0_uniform(files):
    out = files / "o"
    assert run(["qaoa", "--basis", files / "identity.txt", "--k", 2, "--m", 1, "--p", 0, "--out", out])[0] == 0
    rep = read_json(out / "qaoa.json")
    assert abs(rep["energy_mean"] - 13.125) <= 0.5
    assert rep["uniform_mean"] == 13.125
    rows = list(csv.DictReader((out / "histogram.csv").open()))
    assert list(rows[0]) == ["vol_sq", "occurrences", "probability"]
    assert sum(int(r["occurrences"]) for r in rows) == 10000


def test_budget_hkz(files):
    out = files / "o"
    assert run(["budget", "--basis", files / "identity.txt", "--k", 2, "--out", out])[0] == 0
    hkz = read_json(out / "budget.json")["HKZ"]
    assert hkz["total_qubits"] == 42 and abs(hkz["closed_form"] - 47.5) < 0.1


def test_spectrum_and_grover(files):
    out = files / "o"
    base = ["--basis", files / "identity.txt", "--k", 2, "--m", 1, "--out", out, "--delta", "1"]
    assert run(["spectrum", *base, "--penalize", "exp"])[0] == 0
    spec = read_json(out / "spectrum.json")
    assert spec["min_nonzero"] == 1.0 and spec["gap_bound"] == pytest.approx((4 / 3) ** 4)
    assert spec["penalty"]["scheme"] == "exp"
    assert (out / "diagonal.bin").stat().st_size == 8 * 4096
    assert run(["grover", *base])[0] == 0
    assert read_json(out / "grover.json")["success_prob"] >= 0.9
    assert (out / "grover_curve.csv").read_text().startswith("iterations,success_prob\n")


@pytest.mark.parametrize("args,code,reason", [
    (["exact", "--k", 2], 2, "config"),
    (["exact", "--basis", "{example}", "--k", 3, "--m", 1], 2, "config"),
    (["exact", "--basis", "{example}", "--delta", "1/8"], 2, "config"),
    (["exact", "--basis", "{missing}"], 2, "config"),
    (["exact", "--basis", "{garbled}"], 3, "parse"),
    (["exact", "--basis", "{example}", "--k", 2, "--m", 4], 4, "cap"),
    (["exact", "--basis", "{dependent}"], 5, "numerical"),
    (["qaoa", "--basis", "{example}", "--penalize", "exp:r=1"], 2, "config"),
    (["qaoa", "--basis", "{example}", "--shots", 0], 2, "config"),
])
def test_exit_codes(files, capsys, args, code, reason):
    (files / "garbled.txt").write_text("1 zero\n")
    (files / "dependent.txt").write_text("1 2\n2 4\n")
    paths = {"example": files / "example.txt", "missing": files / "none.txt",
             "garbled": files / "garbled.txt", "dependent": files / "dependent.txt"}
    args = [str(a).format(**paths) for a in args] + ["--out", str(files / "o")]
    got, err = run(args, capsys)
    assert got == code
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith(f"error:{reason}: ")


def test_failure_removes_partial_artifacts(files, capsys):
    out = files / "o"
    # preprocess and budget succeed, then the exact scan hits the cap
    code, _ = run(["report", "--basis", files / "identity.txt", "--k", 2, "--m", 4, "--out", out], capsys)
    assert code == 4
    assert not out.exists() or not any(out.iterdir())


def test_determinism(files):
    args = ["qaoa", "--basis", files / "identity.txt", "--k", 2, "--m", 1, "--p", 2,
            "--epochs", 15, "--shots", 500, "--seed", 7]
    run(args + ["--out", files / "a"])
    run(args + ["--out", files / "b"])
    names = sorted(p.name for p in (files / "a").iterdir())
    assert names == ["histogram.csv", "manifest.json", "qaoa.json", "trace.csv"]
    for name in names:
        assert (files / "a" / name).read_bytes() == (files / "b" / name).read_bytes()
    trace = (files / "a" / "trace.csv").read_text().splitlines()
    assert trace[0] == "epoch,expectation"


def test_qaoa_and_exact_agree(files):
    out = files / "o"
    base = ["--basis", files / "example.txt", "--k", 2, "--m", 1, "--out", out]
    run(["exact", *base])
    run(["qaoa", *base, "--p", 0, "--shots", 3000])
    best = Fraction(read_json(out / "exact.json")["min_vol_sq"])
    hist = read_json(out / "qaoa.json")["histogram"]
    sampled = [Fraction(h["vol_sq"]) for h in hist if Fraction(h["vol_sq"]) > 0]
    assert min(sampled) >= best
    assert min(sampled) == best  # 216 of 4096 states are optimal, so 3000 shots hit one


def test_report_and_render(files):
    out = files / "r"
    args = ["report", "--basis", files / "identity.txt", "--k", 2, "--m", 1, "--p", 1,
            "--epochs", 10, "--shots", 2000, "--n-max", 4, "--out", out]
    assert run(args)[0] == 0
    man = read_json(out / "manifest.json")
    for name in ("preprocess.json", "budget.json", "exact.json", "spectrum.json", "grover.json",
                 "qaoa.json", "histogram.csv", "gates.csv", "plot_histogram.csv",
                 "table_prob_vs_p.csv", "series_gates.csv"):
        assert name in man["artifacts"], name
    rows = list(csv.DictReader((out / "plot_histogram.csv").open()))
    assert abs(sum(float(r["probability"]) for r in rows) - 1) < 1e-9
    series = list(csv.DictReader((out / "series_gates.csv").open()))
    assert [int(r["n_dim"]) for r in series] == [3, 4]
    assert all(int(r["bad_two"]) >= int(r["good_two"]) for r in series)
    table = list(csv.DictReader((out / "table_prob_vs_p.csv").open()))
    assert table[0]["p"] == "1" and "identity<=5" in table[0]


def test_render_truncates_long_histograms(tmp_path):
    rows = "".join(f"{v},{v + 1},0\n" for v in range(60))
    (tmp_path / "histogram_x.csv").write_text("vol_sq,occurrences,probability\n" + rows)
    render_plots(tmp_path)
    out = list(csv.DictReader((tmp_path / "plot_histogram_x.csv").open()))
    assert out[-1]["truncated"] == "1" and out[-1]["vol_sq"].startswith(">")
    assert sum(int(r["occurrences"]) for r in out) == sum(v + 1 for v in range(60))
    assert abs(sum(float(r["probability"]) for r in out) - 1) < 1e-9


def test_render_missing_inputs(tmp_path, capsys):
    with pytest.raises(ConfigError, match="missing inputs"):
        render_plots(tmp_path)
    code, err = run(["render", "--out", tmp_path], capsys)
    assert code == 2 and "missing inputs" in err


def test_gates_sweep(files):
    out = files / "g"
    assert run(["gates", "--k", 2, "--m", 1, "--n-max", 5, "--out", out])[0] == 0
    rows = list(csv.DictReader((out / "gates.csv").open()))
    assert len(rows) == 6
    assert rows[0] == {"n_dim": "3", "basis": "good", "one_qubit": "264", "two_qubit": "936", "terms": "253"}


@pytest.mark.parametrize("text,expected", [
    (None, None), ("exp", ("exp", {})), ("exp:r=2,s=0.5", ("exp", {"r": 2.0, "s": 0.5})),
    ("quadratic:E=1", ("quadratic", {"E": 1.0})),
])
def test_parse_penalty(text, expected):
    got = parse_penalty(text)
    assert (got is None and expected is None) or (got.scheme, got.params) == expected


@pytest.mark.parametrize("text", ["cubic", "exp:r", "exp:r=x,s=1", "quadratic:r=1"])
def test_parse_penalty_errors(text):
    with pytest.raises(ConfigError):
        parse_penalty(text)
