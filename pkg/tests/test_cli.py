import csv
import io
import json
import math
import os
import shlex
from fractions import Fraction
from pathlib import Path

import pytest

from approxconvex.cli import main
from approxconvex.extremal import e_delta1, e_point, kappa

HERE = Path(__file__).parent
DATA = HERE / "data"
GOLDEN = HERE / "golden"
REGEN = os.environ.get("APPROXCONVEX_REGEN_GOLDEN") == "1"


def run(capsys, cmd):
    code = main(shlex.split(cmd.replace("DATA", str(DATA))))
    out = capsys.readouterr()
    return code, out.out, out.err


def close(a, b):
    if isinstance(a, float) or isinstance(b, float):
        if isinstance(a, (int, float)) and isinstance(b, (int, float)):
            return a == b or math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)
        return False
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(close(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return isinstance(b, list) and len(a) == len(b) and all(close(x, y) for x, y in zip(a, b))
    return a == b


def check_golden(name, text, as_json=False):
    path = GOLDEN / name
    if REGEN:
        path.write_text(text)
    expected = path.read_text()
    if as_json:
        assert close(json.loads(text), json.loads(expected))
    else:
        assert text == expected


GOLDEN_TEXT = [
    ("kappa_0_8.txt", "kappa 0..8"),
    ("kappa_1.txt", "kappa 1"),
    ("kappa_1024.txt", "kappa 1024"),
    ("eval_e_halves.txt", "eval e 1/2 1/2"),
    ("eval_h_three_quarters.txt", "eval h 3/4"),
    ("eval_e_thirds.txt", "eval e 1/3 1/3 1/3 --depth 30"),
    ("solve_segment_d3.csv", "solve --simplex 1 --depth 3"),
    ("solve_triangle_d4.csv", "solve --simplex 2 --depth 4"),
    ("plot_h_2.csv", "plot h --resolution 2"),
]

GOLDEN_JSON = [
    ("solve_square_center.json", "solve --polytope DATA/square.json --query 1/2 1/2"),
    ("defect_segment.json", "defect --points DATA/segment.json --sampler grid:0.125"),
    ("defect_seven.json", "defect --points DATA/seven_points.json --sampler grid:0.01"),
    ("defect_random3.json", "defect --points DATA/random3.json --certify 20 --seed 7"),
    ("witness_halves.json", "witness --dim 2 --alpha 1/2 1/2 --M 64 --depth 10"),
    ("witness_near_sup.json", "witness --dim 2 --alpha-from near-sup:12 --M 512 --depth 12"),
    ("witness_n3.json", "witness --dim 3 --alpha-from max-witness:10 --M 256 --depth 10 --eps 0.1"),
    ("stability_samples.json", "stability --samples DATA/eps_samples.csv --eps 0.5"),
    ("stability_e_segment.json", "stability --e-grid 1:8 --eps 0.5"),
]


@pytest.mark.parametrize("name,cmd", GOLDEN_TEXT)
def test_golden_text(capsys, name, cmd):
    code, out, _ = run(capsys, cmd)
    assert code == 0
    check_golden(name, out)


@pytest.mark.parametrize("name,cmd", GOLDEN_JSON)
def test_golden_json(capsys, name, cmd):
    code, out, _ = run(capsys, cmd)
    assert code == 0
    check_golden(name, out, as_json=True)


def test_kappa_values(capsys):
    _, out, _ = run(capsys, "kappa 0..8")
    got = [Fraction(line.split("\t")[1]) for line in out.splitlines()]
    assert got == [kappa(n) for n in range(9)]
    _, out, _ = run(capsys, "kappa 3 --json")
    assert json.loads(out) == [{"n": 3, "exact": "7/2", "decimal": 3.5}]


def test_eval_enclosure(capsys):
    _, out, _ = run(capsys, "eval e 1/3 1/3 1/3 --depth 30 --json")
    enc = json.loads(out)["enclosure"]
    assert Fraction(enc["lo"]) <= Fraction(8, 3) <= Fraction(enc["hi"])


def test_solve_segment_matches_closed_form(capsys):
    code, out, err = run(capsys, "solve --simplex 1 --depth 3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 9
    for r in rows:
        assert Fraction(r["upper"]) == Fraction(r["lower"]) == e_delta1(Fraction(r["x1"]))
        assert r["agree"] == "true"
    log = json.loads(err)
    assert log["agree_everywhere"] and log["upper_monotone"] and log["lower_monotone"]


def test_solve_triangle_matches_e(capsys, tmp_path):
    log = tmp_path / "log.json"
    _, out, err = run(capsys, f"solve --simplex 2 --depth 4 --log {log}")
    assert err == ""
    for r in csv.DictReader(io.StringIO(out)):
        assert Fraction(r["upper"]) == e_point([Fraction(r[f"x{k}"]) for k in range(3)])
    assert json.loads(log.read_text())["labelled"] == "values"


def test_solve_with_phi(capsys):
    _, out, _ = run(capsys, "solve --simplex 1 --depth 2 --phi 1,3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [Fraction(r["upper"]) for r in rows] == [3, Fraction(3, 2) + Fraction(5, 2), 3, Fraction(3, 2) + Fraction(3, 2), 1]


def test_plot_h_bounds(capsys):
    _, out, _ = run(capsys, "plot h --resolution 1024")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1025
    for r in rows:
        h = float(r["H"])
        assert float(r["lower"]) <= h + 1e-12
        assert h <= float(r["upper_sharp"]) + 1e-12 <= float(r["upper"]) + 2e-12


def test_plot_e2d(capsys):
    _, out, _ = run(capsys, "plot e2d --resolution 256")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 257 * 258 // 2
    assert max(float(r["E"]) for r in rows) <= 3


def test_defect_seven_points(capsys):
    _, out, _ = run(capsys, "defect --points DATA/seven_points.json --sampler grid:0.01")
    rep = json.loads(out)
    assert rep["delta"] == pytest.approx(1)
    assert abs(rep["hull_estimate"] - 2) < 1e-2


def test_defect_certificates_pass(capsys):
    code, out, _ = run(capsys, "defect --points DATA/random3.json --norm l1 --certify 25 --seed 3")
    assert code == 0 and json.loads(out)["all_pass"]


def test_witness_outputs(capsys, tmp_path):
    pts = tmp_path / "pts.csv"
    code, out, _ = run(capsys, f"witness --dim 2 --alpha 1/2 1/2 --M 8 --depth 3 --points-out {pts}")
    rep = json.loads(out)
    assert code == 0 and rep["ratio"] >= 1 - 0.05
    assert len(pts.read_text().splitlines()) == rep["points"]


def test_witness_failure_exit(capsys):
    code, out, _ = run(capsys, "witness --dim 2 --alpha-from near-sup:6 --M 2 --depth 6")
    assert code == 2 and not json.loads(out)["meets_target"]


def test_stability_failure_exit(capsys, tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("0,0\n0.5,3\n1,0\n")
    code, out, _ = run(capsys, f"stability --samples {path} --eps 1")
    assert code == 2 and json.loads(out)["eps_violations"] == 1


def test_output_file(capsys, tmp_path):
    target = tmp_path / "k.txt"
    assert run(capsys, f"kappa 4 -o {target}")[1] == ""
    assert target.read_text() == "4\t4\t4\n"


@pytest.mark.parametrize("cmd", [
    "kappa 5..2",
    "eval e 1/2 1/4",
    "eval h 1/2 1/2",
    "eval e 3/2 -1/2",
    "eval h x",
    "solve",
    "solve --simplex 1 --phi 1,2,3",
    "solve --polytope DATA/square.json",
    "solve --polytope DATA/square.json --query 3 3",
    "defect --points DATA/nope.json",
    "defect --points DATA/segment.json --sampler random:10",
    "defect --points DATA/segment.json --sampler bogus",
    "witness --dim 2",
    "witness --dim 3 --alpha-from near-sup:8",
    "plot h --resolution 100",
    "stability --eps 1",
    "bogus",
    "kappa",
])
def test_invalid_input_exit_code(capsys, cmd):
    try:
        code = main(shlex.split(cmd.replace("DATA", str(DATA))))
    except SystemExit as exc:
        code = exc.code
    capsys.readouterr()
    assert code == 1
