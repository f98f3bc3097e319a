import json
import subprocess
import sys
import textwrap

import pytest

from fewspace.cli import main, run
from fewspace.errors import SpecError
from fewspace.spaces import ExpSpan, Product, Weyl
from fewspace.specfile import parse_document, parse_domain, parse_space

C = 0.202918921282


def write(tmp_path, text, name="spec.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


def run_json(argv):
    status, text = run(argv)
    return status, json.loads(text)


def test_expect_expspan(tmp_path):
    spec = write(tmp_path, """\
        task: expect
        spaces:
          E: {ExpSpan: {frequencies: [0, 1]}}
        equations: [E]
        domain: {disk: {radius: 1}}
        options: {tol: 1.0e-9}
    """)
    status, rec = run_json(["expect", "--spec", spec])
    assert status == 0
    assert abs(rec["value"] - C) <= 1e-9
    assert rec["error"] <= 1e-9
    assert rec["method"] == "quadrature"
    assert {"task", "inputs", "value", "error", "evaluations", "diagnostics"} <= set(rec)


def test_expect_flags_override_document(tmp_path):
    spec = write(tmp_path, """\
        equations: [{Weyl: {degree: 2}}]
        options: {tol: 1.0e-3}
    """)
    _, rec = run_json(["expect", "--spec", spec, "--tol", "1e-10", "--space", "{Weyl: {degree: 6}}"])
    assert rec["inputs"]["tol"] == 1e-10
    assert rec["value"] == pytest.approx(3.0, abs=1e-10)


def test_expect_inline_domain():
    _, rec = run_json(["expect", "--space", "GEF", "--domain", "{annulus: {r_in: 1, r_out: 2}}"])
    assert rec["value"] == pytest.approx(3.0, abs=1e-7)


def test_mc_weyl_seeded():
    status, rec = run_json(["mc", "--space", "{Weyl: {degree: 4}}", "--seed", "42", "--samples", "20000"])
    assert status == 0
    assert rec["samples"] == 20000 and rec["seed"] == 42
    assert abs(rec["mean"] - 2.0) <= 3 * rec["stderr"]
    assert rec["value"] == rec["mean"] and rec["error"] == rec["stderr"]


def test_mc_radius_from_domain():
    _, rec = run_json(["mc", "--space", "HyperbolicGAF", "--domain", "{disk: {radius: 0.5}}",
                       "--samples", "500", "--seed", "1"])
    assert rec["inputs"]["radius"] == 0.5
    assert "truncation_bias" in rec["diagnostics"]


def test_mixed_record():
    status, rec = run_json(["mixed", "--space", "{Weyl: {degree: 1, nvars: 2}}",
                            "--space", "{Weyl: {degree: 2, nvars: 2}}", "--tol", "1e-8"])
    assert status == 0
    assert rec["discrepancy"] <= 1e-6
    assert rec["diagnostics"]["agree"]
    assert rec["mixed"]["method"] == "quadrature"
    assert rec["extracted"]["method"] == "quadrature-extracted"


def test_bkk(tmp_path):
    spec = write(tmp_path, """\
        supports:
          - [[0, 0], [1, 0], [0, 1]]
          - [[0, 0], [2, 0], [0, 2]]
        kushnirenko:
          weights: [[2, 7.0], [5, 0.1]]
    """)
    status, rec = run_json(["bkk", "--spec", spec])
    assert status == 0
    assert rec["bernstein"]["value"] == 2
    k = rec["kushnirenko"]
    assert k["combinatorial"]["value"] == 3
    assert abs(k["integral"]["value"] - 3) <= 1e-3


def test_weights_rows():
    status, text = run(["weights", "--space", "{Power: {base: {SparseLaurent: {weights: [[0, 1], [1, 1]]}}, exponent: 2}}"])
    assert status == 0
    rows = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert rows == ["exponent,weight", "0,1", "1,2", "2,1"]


def test_weights_with_frequencies():
    _, text = run(["weights", "--space", "{Product: [{ExpSpan: {frequencies: [0, 1]}}, {Weyl: {degree: 1}}]}"])
    rows = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert rows[0] == "exponent,frequency,weight"
    assert sorted(rows[1:]) == ["0,0,1", "0,1,1", "1,0,1", "1,1,1"]


def test_grid(tmp_path):
    spec = write(tmp_path, """\
        equations: [GEF]
        grid: {re: [-1, 1, 3], im: [0, 1, 2]}
    """)
    status, text = run(["grid", "--spec", spec])
    assert status == 0
    lines = text.splitlines()
    assert lines[0].startswith("#")
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == "re,im,density"
    assert len(body) == 1 + 6
    for row in body[1:]:
        re_, im_, d = map(float, row.split(","))
        assert d == pytest.approx(1 / 3.141592653589793)


def test_grid_two_variables(tmp_path):
    spec = write(tmp_path, """\
        equations: [{Weyl: {degree: 1, nvars: 2}}, {Weyl: {degree: 1, nvars: 2}}]
        grid: {re: [0, 1, 2], im: [0, 0, 1], fixed: [0.5]}
    """)
    status, text = run(["grid", "--spec", spec])
    assert status == 0
    assert len([ln for ln in text.splitlines() if not ln.startswith("#")]) == 3


def test_outputs_byte_identical(tmp_path):
    argv_sets = [
        ["expect", "--space", "{ExpSpan: {frequencies: [0, 1]}}"],
        ["mc", "--space", "{Weyl: {degree: 3}}", "--samples", "300", "--seed", "7"],
        ["mc", "--space", "{Weyl: {degree: 3}}", "--samples", "300", "--seed", "7", "--threads", "2"],
        ["weights", "--space", "{Weyl: {degree: 2, nvars: 2}}"],
    ]
    outs = [run(a)[1] for a in argv_sets]
    again = [run(a)[1] for a in argv_sets]
    assert outs == again
    # per-sample streams make the thread count invisible in the output
    assert outs[1] == outs[2]


def test_output_file_and_exit_codes(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["expect", "--space", "GEF", "-o", str(out)]) == 0
    assert json.loads(out.read_text())["value"] == pytest.approx(1.0)
    assert main(["expect", "--spec", str(tmp_path / "missing.yaml")]) == 2
    assert "missing.yaml" in capsys.readouterr().err
    # a domain reaching past the unit circle is a hard error for the GAF
    assert main(["expect", "--space", "HyperbolicGAF", "--radius", "2"]) == 1


def test_budget_exhaustion_is_not_an_error():
    status, rec = run_json(["expect", "--space", "HyperbolicGAF", "--radius", "0.999",
                            "--tol", "1e-12", "--budget", "3000"])
    assert status == 0
    assert rec["diagnostics"]["flag"] == "budget exhausted"
    assert rec["error"] > 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fewspace", "weights", "--space", "{Weyl: {degree: 2}}"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.splitlines()[-1] == "2,1"


# ---------------------------------------------------------------------------
# spec documents
# ---------------------------------------------------------------------------


def test_parse_document_spaces():
    doc = parse_document(textwrap.dedent("""\
        task: expect
        spaces:
          E: {ExpSpan: {frequencies: [0, 1]}}
          P: {Weyl: {degree: 3}}
          F: {Product: [E, P]}
        equations: [F]
    """))
    assert doc.task == "expect"
    assert doc.equations == [Product(ExpSpan([0, 1]), Weyl(3))]
    assert parse_space("{Power: {base: {Weyl: {degree: 1}}, exponent: 3}}") == Weyl(1) ** 3


def test_parse_domain_variants():
    assert parse_domain("{polydisk: {radius: 0.5, n: 3}}").nvars == 3
    assert parse_domain("{product: [{disk: {radius: 1}}, {torus: {}}]}").nvars == 2
    assert parse_domain("{rectangle: {re: [0, 1], im: [-1, 1]}}").nvars == 1


@pytest.mark.parametrize(
    "text,line,col,fragment",
    [
        ("equations: [{Weyl: {degre: 2}}]\n", 1, 21, "unknown key 'degre'"),
        ("task: expect\nequations:\n  - {Wyel: {degree: 2}}\n", 3, 6, "Wyel"),
        ("equations: [Q]\n", 1, 13, "Q"),
        ("task: expect\nbogus: 1\n", 2, 1, "bogus"),
        ("domain: {disk: {radius: -1}}\n", 1, 25, "radius"),
        ("equations: [{Weyl: {degree: 1, nvars: 2}}, {Weyl: {degree: 1}}]\n", 1, 44, "2 variables"),
        ("equations: [{Weyl: {degree: [1}}\n", 1, None, None),
    ],
)
def test_parse_errors_carry_position(text, line, col, fragment):
    with pytest.raises(SpecError) as exc:
        parse_document(text)
    err = exc.value
    assert err.line == line
    if col is not None:
        assert err.column == col
    assert str(err).startswith(f"line {line}, column ")
    if fragment:
        assert fragment in str(err)


def test_cli_reports_parse_errors(tmp_path):
    spec = write(tmp_path, "task: expect\nequations:\n  - {Weyl: {degree: two}}\n")
    status, rec = run_json(["expect", "--spec", spec])
    assert status == 2
    assert rec["kind"] == "spec"
    assert rec["error"].startswith("line 3, column ")
