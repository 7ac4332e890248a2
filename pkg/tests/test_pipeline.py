import json

import pytest
from click.testing import CliRunner

from hcolc import dhcol as D
from hcolc import fixtures as X
from hcolc import hcol as H
from hcolc import lowering as L
from hcolc import pipeline as P
from hcolc import scalar as F
from hcolc.cli import main
from hcolc.errors import StageFailure

SP = "(compose (reduction plus 0 3) (binop 3 (fun i a b (mul a b))))"


def test_dynwin_end_to_end(tmp_path):
    out = tmp_path / "dynwin.ll"
    rep = P.run_pipeline(P.dynwin_config(seed=3, samples=100, out_ll=str(out)))
    assert rep.ok
    assert [s["stage"] for s in rep.stages] == [
        "breakdown", "sigma", "mshcol", "dhcol", "rf-translate", "llvm"]
    assert out.read_text().startswith("; ModuleID = 'dynwin'")
    assert rep.artifacts["fuel"] == 21


def test_breakdown_failure():
    cfg = P.PipelineConfig(H.HScalarProd(3), breakdown_trace=[("R3", [])])
    with pytest.raises(StageFailure) as ei:
        P.run_pipeline(cfg)
    assert ei.value.stage == "breakdown"


def test_unknown_constant_stops_translation():
    h = H.HPointwise(2, F.indexed_unary(F.CBin("plus", F.CVar(0), F.const("1/3"))))
    with pytest.raises(StageFailure) as ei:
        P.run_pipeline(P.PipelineConfig(h, samples=20, rf_samples=20))
    assert ei.value.stage == "rf-translate"
    assert "UnknownConstant" in str(ei.value.detail)
    assert [s["status"] for s in ei.value.report.stages][:4] == ["Pass"] * 4


def test_harness_without_llvm():
    p = P.harness_programs()[2]
    r, text = P.run_test_harness(p, seed=1, llvm=None)
    assert [s["status"] for s in r.steps] == ["Pass", "Pass", "Skipped", "Pass", "Skipped"]
    assert r.ok and text


def test_harness_gate_env(monkeypatch):
    monkeypatch.setenv(P.LLVM_ENV, "off")
    assert P.llvm_tool() is None
    monkeypatch.setenv(P.LLVM_ENV, "/nonexistent/lli")
    assert P.llvm_tool() is None


def test_short_pool_is_recycled():
    p = P.harness_programs()[3]  # binop over six inputs
    r, _ = P.run_test_harness(p, seed=2, pool_size=2)
    assert r.steps[0]["cyclic"] and r.ok


def test_twelve_programs():
    ps = P.harness_programs()
    assert len(ps) == 12
    kinds = {type(n).__name__ for p in ps for n in D.walk(p.op)}
    for k in ("DSHNop", "DSHAssign", "DSHIMap", "DSHBinOp", "DSHMemMap2", "DSHPower",
              "DSHLoop", "DSHAlloc", "DSHMemInit", "DSHSeq"):
        assert k in kinds


def test_dynwin_fixture_matches_hand_formula():
    import random
    from hcolc.carrier import RATIONAL
    rng = random.Random(0)
    e = X.dynwin_hcol()
    seen = set()
    for _ in range(10**5):
        a = list(X.coefficients(*X.random_params(rng)))
        x = X.random_input(rng)
        want = X.direct_eval(a, x)
        assert H.eval_hcol(e, x, RATIONAL, (a,)) == [want]
        seen.add(want)
    assert seen == {0, 1}


# --- command line ---------------------------------------------------------


def run(*args):
    return CliRunner().invoke(main, list(args))


def test_cli_parse(tmp_path):
    f = tmp_path / "sp.hcol"
    f.write_text(SP)
    r = run("parse", str(f))
    assert r.exit_code == 0
    assert json.loads(r.output)["dims"] == [6, 1]


def test_cli_parse_error(tmp_path):
    f = tmp_path / "bad.hcol"
    f.write_text("(compose (reduction")
    r = run("parse", str(f))
    assert r.exit_code == 2 and "line 1" in r.output


def test_cli_eval(tmp_path):
    f = tmp_path / "sp.hcol"
    f.write_text(SP)
    r = run("eval", str(f), "--input", "1,2,3,4,5,1/2")
    assert json.loads(r.output)["output"] == ["31/2"]


def test_cli_eval_dhcol(tmp_path):
    f = tmp_path / "a.dhcol"
    f.write_text("DSHAssign ((PVar 0), (NConst 1)) ((PVar 1), (NConst 0)).")
    r = run("eval", str(f), "--language", "dhcol", "--dims", "2", "1", "--input", "3 1/3")
    assert json.loads(r.output)["output"] == {"0": "1/3"}


def test_cli_lower(tmp_path):
    f = tmp_path / "sp.hcol"
    f.write_text(SP)
    r = run("lower", str(f), "--to", "fhcol")
    assert r.exit_code == 0 and r.output.startswith("DSHAlloc 3")


def test_cli_validate_and_emit(tmp_path):
    f = tmp_path / "sp.hcol"
    f.write_text(SP)
    ll, rep = tmp_path / "a.ll", tmp_path / "r.json"
    r = run("validate", str(f), "--samples", "30", "--out", str(ll), "--report", str(rep))
    assert r.exit_code == 0
    assert json.loads(rep.read_text())["ok"] is True
    r = run("emit-llvm", str(f), "--seed", "4")
    assert r.exit_code == 0 and "define void @op" in r.output


def test_cli_validate_failure_exit_code(tmp_path):
    f = tmp_path / "t.hcol"
    f.write_text("(pointwise 2 (fun i x (plus x 1/3)))")
    r = run("validate", str(f), "--samples", "10")
    assert r.exit_code == 1
    assert json.loads(r.output)["failed_stage"] == "rf-translate"


def test_cli_harness_report(tmp_path):
    rep = tmp_path / "h.json"
    r = run("harness", "--report", str(rep))
    assert r.exit_code == 0
    assert len(json.loads(rep.read_text())["harness"]["programs"]) == 12


def test_cli_analyze(tmp_path):
    g = tmp_path / "d.g"
    r = run("analyze", "--samples", "2000", "--gappa", str(g))
    assert r.exit_code == 0
    out = json.loads(r.output)["analysis"]
    assert out["matches_reference"] and out["epsilon"] >= 1.11e-12
    assert "rnd64" in g.read_text()
