"""Command line driver tests.

Each subcommand runs through ``main`` with the real builders behind
it.  The hexagon action passes every check, so its verify and distort
runs exit 0; the pentagon action gives up non-adjacent plane
orthogonality to keep its walls disjoint, so those runs exit 2 with
the failing check named.  Reports must be reproducible: identical
arguments give identical bytes apart from the timestamp.
"""
from __future__ import annotations

import json
import subprocess
import sys

import pytest

from polyrep import cli
from polyrep.errors import SizeLimitError
from polyrep.groups import (
    GraphProductSpec,
    make_cyclic_group,
    tautological_quotient,
)

A6 = 1.3169578969248166


def z2_spec(n):
    return GraphProductSpec(tuple(make_cyclic_group(2) for _ in range(n)))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def pent_input(workdir):
    path = workdir / "pentagon.json"
    path.write_text(json.dumps({"type": "cyclic-graph-product", "orders": [2] * 5}))
    return path


@pytest.fixture(scope="module")
def hex_input(workdir):
    path = workdir / "hexagon.json"
    path.write_text(json.dumps({"type": "cyclic-graph-product", "orders": [2] * 6}))
    return path


@pytest.fixture(scope="module")
def pent_rep(workdir, pent_input):
    out = workdir / "pentagon_rep.json"
    code = cli.main(
        ["build", "--input", str(pent_input), "--mode", "odd", "--out", str(out)]
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def hex_rep(workdir, hex_input):
    out = workdir / "hexagon_rep.json"
    code = cli.main(
        ["build", "--input", str(hex_input), "--mode", "even", "--out", str(out)]
    )
    assert code == 0
    return out


# ---------------------------------------------------------------------------
# trig


def test_trig_text_statuses(capsys):
    assert cli.main(["trig", "5", "7"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "diameterEdge=FAIL" in out[0] and "diagonalChain=PASS" in out[0]
    assert "diameterEdge=TANGENT" in out[1]
    assert "diameterEdge=PASS" in out[2] and "diagonalEdge=PASS" in out[2]
    assert out[-1].startswith("config ")


def test_trig_json_values(capsys):
    assert cli.main(["trig", "5", "6", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    rows = doc["rows"]
    assert [r["n"] for r in rows] == [5, 6]
    chain5 = rows[0]["checks"]["diagonalChain"]
    assert chain5["status"] == "PASS"
    assert abs(chain5["margin"] - 0.309017) <= 1e-5
    tangent = rows[1]["checks"]["diameterEdge"]
    assert tangent["status"] == "TANGENT"
    assert abs(tangent["margin"]) <= 1e-12
    assert abs(rows[1]["circumradius"] * 2 - 2.292431670) <= 1e-8
    assert doc["seed"] is None
    assert set(doc["tolerances"]) >= {"build", "check", "separation"}
    assert len(doc["configHash"]) == 64


def test_trig_range_guard(capsys):
    assert cli.main(["trig", "4"]) == 3
    assert cli.main(["trig", "5", "65"]) == 3
    assert "5..64" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# build / extend


def test_build_pentagon_file(pent_rep):
    doc = json.loads(pent_rep.read_text())
    assert doc["p"] == 10
    assert len(doc["generators"]) == 5
    prov = doc["provenance"]
    assert prov["seed"] == 0
    assert "configHash" in prov and "tolerances" in prov


def test_build_deterministic(workdir, pent_input):
    a = workdir / "rep_a.json"
    b = workdir / "rep_b.json"
    for out in (a, b):
        code = cli.main(
            ["build", "--input", str(pent_input), "--mode", "odd",
             "--seed", "3", "--out", str(out)]
        )
        assert code == 0
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    da["provenance"].pop("timestamp")
    db["provenance"].pop("timestamp")
    assert da == db


def test_build_even_via_quotient_file(workdir, hex_input, hex_rep):
    # spelling the tautological quotient out as a table file must give
    # the same representation as the keyword
    spec = z2_spec(6)
    hom = tautological_quotient(spec)
    qpath = workdir / "quotient.json"
    qpath.write_text(
        json.dumps(
            {
                "type": "group-hom",
                "target": {
                    "type": "table",
                    "order": hom.target.order,
                    "mult": hom.target.mult_table.tolist(),
                },
                "factorImages": [list(im) for im in hom.factor_images],
            }
        )
    )
    out = workdir / "hex_from_file.json"
    code = cli.main(
        ["build", "--input", str(hex_input), "--mode", "even",
         "--quotient", str(qpath), "--out", str(out)]
    )
    assert code == 0
    da = json.loads(out.read_text())
    db = json.loads(hex_rep.read_text())
    da["provenance"].pop("timestamp")
    db["provenance"].pop("timestamp")
    assert da == db


def test_build_refuses_non_separating_quotient(workdir, hex_input, capsys):
    out = workdir / "never_written.json"
    code = cli.main(
        ["build", "--input", str(hex_input), "--mode", "even",
         "--quotient", "trivial", "--out", str(out)]
    )
    captured = capsys.readouterr()
    assert code == 2
    assert not out.exists()
    assert "does not separate" in captured.err
    cert = json.loads(captured.out)["certificate"]
    assert cert["passed"] is False
    assert len(cert["violations"]) > 0


def test_extend_trivial_twist_preserves_block(workdir, pent_rep):
    out = workdir / "pentagon_ext.json"
    code = cli.main(
        ["extend", "--input", str(pent_rep), "--quotient", "trivial",
         "--out", str(out)]
    )
    assert code == 0
    base = json.loads(pent_rep.read_text())
    ext = json.loads(out.read_text())
    p = base["p"]
    assert ext["p"] == p + 1
    assert ext["mode"] == "extended"
    for a, b in zip(base["generators"], ext["generators"]):
        block = [row[: p + 1] for row in b["matrix"][: p + 1]]
        assert block == a["matrix"]
        assert b["matrix"][p + 1][p + 1] == 1.0


# ---------------------------------------------------------------------------
# verify


def test_verify_hexagon_passes(hex_rep, capsys):
    code = cli.main(["verify", "--input", str(hex_rep), "--format", "json"])
    doc = json.loads(capsys.readouterr().out)
    assert code == 0
    assert doc["passed"] is True
    assert doc["checks"]["relations"]["maxResidual"] <= 1e-9
    assert doc["checks"]["orthogonality"]["failures"] == []
    assert doc["checks"]["displacement"]["min"] > 1.0


def test_verify_pentagon_reports_plane_trade(pent_rep, capsys):
    code = cli.main(["verify", "--input", str(pent_rep)])
    out = capsys.readouterr().out
    assert code == 2
    assert "relations PASS" in out
    assert "orthogonality FAIL" in out
    assert "(5 of 15 pairs failing)" in out
    assert "displacement PASS" in out
    assert "verify FAIL" in out


def test_verify_catches_corrupted_matrix(workdir, pent_rep, capsys):
    doc = json.loads(pent_rep.read_text())
    doc["generators"][0]["matrix"][1][2] += 1e-3
    bad = workdir / "corrupted.json"
    bad.write_text(json.dumps(doc))
    code = cli.main(["verify", "--input", str(bad)])
    out = capsys.readouterr().out
    assert code == 2
    assert "relations FAIL" in out


def test_verify_malformed_file_names_path(workdir, capsys):
    bad = workdir / "garbage.json"
    bad.write_text("{]")
    assert cli.main(["verify", "--input", str(bad)]) == 3
    assert "garbage.json" in capsys.readouterr().err


def test_verify_missing_file(workdir, capsys):
    assert cli.main(["verify", "--input", str(workdir / "nope.json")]) == 3
    assert "cannot read" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# distort


def test_distort_hexagon_green(workdir, hex_rep, capsys):
    csv = workdir / "hexagon.csv"
    code = cli.main(
        ["distort", "--input", str(hex_rep), "--radius", "3",
         "--csv", str(csv), "--format", "json"]
    )
    doc = json.loads(capsys.readouterr().out)
    assert code == 0
    assert doc["passed"] is True
    assert doc["report"]["pairCount"] == 7140
    assert abs(doc["checks"]["separation"]["deltaMin"] - A6) <= 1e-9
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == "k,count,min,median,max"
    assert len(lines) == 13


def test_distort_pentagon_separation_fails(pent_rep, capsys):
    code = cli.main(
        ["distort", "--input", str(pent_rep), "--radius", "4"]
    )
    out = capsys.readouterr().out
    assert code == 2
    assert "envelope PASS" in out
    assert "slope PASS" in out
    assert "displacement PASS" in out
    assert "separation FAIL" in out
    assert "crossings PASS" in out


def test_distort_radius_cap(pent_rep, capsys):
    assert cli.main(["distort", "--input", str(pent_rep), "--radius", "9"]) == 4
    assert "cap" in capsys.readouterr().err


def test_distort_needs_radius_three(pent_rep, capsys):
    assert cli.main(["distort", "--input", str(pent_rep), "--radius", "2"]) == 3


def test_distort_deterministic_modulo_timestamp(hex_rep, capsys):
    args = ["distort", "--input", str(hex_rep), "--radius", "3",
            "--sample", "30", "--seed", "7", "--format", "json"]
    assert cli.main(args) == 0
    first = json.loads(capsys.readouterr().out)
    assert cli.main(args) == 0
    second = json.loads(capsys.readouterr().out)
    first.pop("timestamp")
    second.pop("timestamp")
    assert first == second
    assert first["seed"] == 7


# ---------------------------------------------------------------------------
# plumbing


def test_run_config_radius_cap():
    with pytest.raises(SizeLimitError):
        cli.RunConfig(command="distort", input=None, radius=7, sample=None, seed=0)


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "polyrep.cli", "trig", "6"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "TANGENT" in proc.stdout
