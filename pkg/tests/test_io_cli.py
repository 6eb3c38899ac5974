import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgbias import (
    Capacity,
    DocumentError,
    MeanVar,
    Pessimism,
    Polynomial,
    Tax,
    dumps,
    gen_braess_adversarial,
    gen_braess_quadratic,
    gen_pigou,
    loads,
    meanvar_braess,
    random_dsp_instance,
)
from cgbias.cli import main, parse_bias, read_sweep_csv
from cgbias.io import format_number


@pytest.mark.parametrize(
    "inst",
    [
        gen_pigou(2 / 3, 2, Tax(0.5)),
        gen_braess_quadratic(Pessimism(1.5)),
        meanvar_braess(0.7),
        gen_braess_adversarial(0.1, 60),
        gen_pigou(0.3, 2, Capacity(2, 0.5, 3)),
        gen_pigou(1.0, 1, MeanVar(1.0, Polynomial([0, 0.5]), 0.5)),
    ],
)
def test_document_roundtrip(inst):
    text = dumps(inst)
    back = loads(text)
    assert back == inst
    assert dumps(back) == text


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_random_document_roundtrip(seed):
    inst = random_dsp_instance(np.random.default_rng(seed))
    assert loads(dumps(inst)) == inst


@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_number_format_roundtrips(x):
    assert float(format_number(x)) == x


def test_unknown_field_reports_path_and_position():
    text = dumps(gen_pigou(1, 1)).replace('"poly"', '"polly"', 1)
    with pytest.raises(DocumentError) as info:
        loads(text)
    msg = str(info.value)
    assert "$.edges[0].cost" in msg and "line" in msg and "polly" in msg


def test_duplicate_field_rejected():
    with pytest.raises(DocumentError, match="duplicate"):
        loads('{"schema": 1, "schema": 1, "nodes": [], "edges": [], "types": []}')


def test_syntax_error_has_line_column():
    with pytest.raises(DocumentError, match="line 2 column"):
        loads('{"schema": 1,\n "nodes": [}')


def test_parse_bias_strings():
    assert parse_bias("tax:0.5") == Tax(0.5)
    assert parse_bias("pessimism:2") == Pessimism(2.0)
    with pytest.raises(ValueError):
        parse_bias("tax")
    with pytest.raises(ValueError):
        parse_bias("greed:1")


@pytest.fixture
def pigou_file(tmp_path):
    p = tmp_path / "pigou_1_1.json"
    assert main(["generate", "pigou", "a=1", "d=1", "--out", str(p)]) == 0
    return p


def test_cli_solve_pigou(pigou_file, capsys):
    assert main(["solve", str(pigou_file), "--biased"]) == 0
    out = capsys.readouterr().out
    assert "e2\t1.0000000000" in out
    assert "SC\t1.0000000000" in out


def test_cli_solve_braess_tax(tmp_path, capsys):
    p = tmp_path / "braess_tax1.json"
    main(["generate", "braess", "bias=tax:1", "--out", str(p)])
    assert main(["solve", str(p)]) == 0
    assert "u-a\t0.57735" in capsys.readouterr().out


def test_cli_solve_true_costs(tmp_path, capsys):
    p = tmp_path / "b.json"
    main(["generate", "braess", "bias=tax:1", "--out", str(p)])
    main(["solve", str(p), "--true"])
    assert "u-a\t1.0000000000" in capsys.readouterr().out


def test_cli_malformed_exit_1(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"schema": 1, "nodes": [], "edges": [], "types": [], "colour": 1}')
    assert main(["solve", str(p)]) == 1
    assert "colour" in capsys.readouterr().err
    assert main(["solve", str(tmp_path / "missing.json")]) == 1


def test_cli_not_converged_exit_2(tmp_path):
    p = tmp_path / "b.json"
    main(["generate", "braess", "bias=tax:0.5", "--out", str(p)])
    assert main(["solve", str(p), "--method", "frank_wolfe", "--max-iters", "2", "--tol", "1e-14"]) == 2


def test_cli_bpoa(pigou_file, tmp_path, capsys):
    assert main(["bpoa", str(pigou_file)]) == 0
    out = capsys.readouterr().out
    assert "measured BPoA\t1.333333" in out and "analytic bound\t1.333333" in out
    r = tmp_path / "r.json"
    main(["generate", "risk", "eps=0.4", "M=1", "--out", str(r)])
    main(["bpoa", str(r)])
    assert "unbounded (not DSPG)" in capsys.readouterr().out


def test_cli_sweep_csv_roundtrip(tmp_path, monkeypatch):
    monkeypatch.setenv("CGBIAS_THREADS", "2")
    out = tmp_path / "s.csv"
    assert main(["sweep", "--class", "affine", "--bias-family", "tax", "--from", "0", "--to", "2",
                 "--step", "0.5", "--out", str(out)]) == 0
    text = out.read_text()
    rows = read_sweep_csv(text)
    assert [r[0] for r in rows] == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert rows[0][1] == pytest.approx(4 / 3) and rows[0][2] == pytest.approx(4 / 3, abs=1e-6)
    assert rows[2][1] == pytest.approx(1.0)
    header = next(csv.reader(io.StringIO(text)))
    assert header == ["param", "analytic_bound", "measured_bpoa", "slack"]
    monkeypatch.setenv("CGBIAS_THREADS", "1")
    out2 = tmp_path / "s2.csv"
    main(["sweep", "--class", "affine", "--bias-family", "tax", "--from", "0", "--to", "2", "--step", "0.5",
          "--out", str(out2)])
    assert out2.read_bytes() == out.read_bytes()


def test_cli_sweep_rejects_family(capsys):
    assert main(["sweep", "--class", "affine", "--bias-family", "greed", "--from", "0", "--to", "1",
                 "--step", "1"]) == 1
    assert "tax, pessimism" in capsys.readouterr().err


def test_cli_smooth(capsys):
    assert main(["smooth", "fit", "--class", "affine"]) == 0
    assert "mu_hat\t0.250000" in capsys.readouterr().out
    assert main(["smooth", "verify", "--class", "quadratic", "--bias", "pessimism:1.5",
                 "--lambda", "1", "--mu", "0.1565"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["smooth", "verify", "--class", "affine", "--lambda", "1", "--mu", "0.2"]) == 3
    out = capsys.readouterr().out
    assert "FAIL" in out and "witness=(" in out
    assert main(["smooth", "verify", "--cost", '{"poly": [1, 1]}', "--bias", "tax:0.5"]) == 1


def test_cli_audit(tmp_path, capsys):
    p = tmp_path / "t.json"
    main(["generate", "pigou", "a=1", "bias=tax:0.5", "--out", str(p)])
    assert main(["audit", str(p)]) == 0
    assert "result\tPASS" in capsys.readouterr().out


def test_cli_generate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for f in (a, b):
        assert main(["generate", "adversarial", "eps=0.1", "M=60", "--out", str(f)]) == 0
    assert a.read_bytes() == b.read_bytes()
    json.loads(a.read_text())
    assert main(["generate", "pigou", "colour=red"]) == 1
    assert main(["generate", "unknown"]) == 1
