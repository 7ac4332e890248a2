import re

import pytest

from hcolc import dhcol as D
from hcolc import fixtures as X
from hcolc import llvmgen as G
from hcolc import lowering as L
from hcolc import pipeline as P
from hcolc.errors import CompileError, NameCollision

TOOL = P.llvm_tool()
needs_llvm = pytest.mark.skipif(TOOL is None, reason="no external LLVM tool")
PV, N = D.PVar, D.NConst


def prog(i, o, op, globals_=(), name="op"):
    return L.DProgram(i, o, name, tuple(L.Global(f"g{k}", n) for k, n in enumerate(globals_)), op)


def text_of(p, data=(1.0, 2.0, 3.0)):
    return G.emit_text(G.compile_w_main(p, list(data)))


def labels(text):
    return re.findall(r"^([A-Za-z_][\w.]*):$", text, re.M)


def test_loop_counters_are_fresh():
    st = G.IRState()
    slot = G.Val("i64*", "%s")
    a = G.gen_while_loop("l", G.i64(0), G.i64(3), slot, "c1", "b1", [], [], "next", st)[1]
    b = G.gen_while_loop("l", G.i64(0), G.i64(3), slot, "c2", "b2", [], [], "next", st)[1]
    assert a.entry != b.entry
    assert len({blk.label for blk in a.blocks + b.blocks}) == 4


def test_assign_shape():
    t = text_of(prog(2, 2, D.DSHAssign((PV(0), N(1)), (PV(1), N(0)))))
    body = t.split("define void @op")[1].split("define i32 @main")[0]
    assert "getelementptr" in body and "load double" in body and "store double" in body


def test_alloc_uses_stack():
    op = D.DSHAlloc(3, D.DSHMemInit(PV(0), 0.0))
    t = text_of(prog(1, 1, op))
    assert "alloca [3 x double]" in t


def test_scope_error():
    with pytest.raises(CompileError):
        text_of(prog(1, 1, D.DSHAssign((PV(5), N(0)), (PV(1), N(0)))))


def test_name_checks():
    with pytest.raises(NameCollision):
        G.check_names(L.DProgram(1, 1, "op", (L.Global("a", 1), L.Global("a", 2)), D.DSHNop()))
    with pytest.raises(NameCollision):
        G.check_names(prog(1, 1, D.DSHNop(), name="main"))
    with pytest.raises(CompileError):
        G.check_names(prog(1, 1, D.DSHNop(), name="bad name"))


def test_minimal_module():
    t = text_of(prog(0, 0, D.DSHNop()))
    assert "define i32 @main()" in t and "ret i32 0" in t
    assert "call i32 (i8*, ...) @printf" not in t


def test_labels_unique_and_targets_defined():
    p = P.compile_hcol(X.dynwin_hcol(), X.GLOBAL_SIZES, "dynwin", X.DYNWIN_TRACE)
    st, fn = G.gen_function(p)
    assert G.branch_targets_defined(fn)
    t = text_of(p)
    fn_text = t.split("define void @dynwin")[1].split("define i32 @main")[0]
    ls = labels(fn_text)
    assert len(ls) == len(set(ls))


def test_dynwin_line_count():
    p = P.compile_hcol(X.dynwin_hcol(), X.GLOBAL_SIZES, "dynwin", X.DYNWIN_TRACE)
    n = len(text_of(p, P.random_pool(0, 8)).splitlines())
    assert 250 <= n <= 500


def test_hex_literals_round_trip():
    data = [0.1, -2.5e-300, 1e300, -0.0, 5e-324]
    t = text_of(prog(5, 1, D.DSHNop()), data)
    back = G.parse_hex_doubles(t)
    assert [x.hex() for x in back[:5]] == [x.hex() for x in data]


def test_i64_constants_decimal():
    t = text_of(prog(8, 8, D.DSHAssign((PV(0), N(7)), (PV(1), N(6)))))
    assert "i64 7" in t and "i64 6" in t
    assert not re.search(r"i64 0x", t)


def test_split_pool_is_cyclic():
    p = prog(4, 1, D.DSHNop(), (3,))
    g, x = G.split_pool(p, [1.0, 2.0])
    assert g == [[1.0, 2.0, 1.0]] and x == [2.0, 1.0, 2.0, 1.0]
    with pytest.raises(CompileError):
        G.split_pool(p, [])


@needs_llvm
def test_zero_iteration_loop_runs():
    p = prog(1, 2, D.DSHLoop(0, D.DSHMemInit(PV(2), 1.0)))
    assert P.run_external(text_of(p), TOOL) == [0.0, 0.0]


@needs_llvm
def test_counted_loop_writes_cells():
    op = D.DSHLoop(3, D.DSHAssign((PV(1), D.NVar(0)), (PV(2), D.NVar(0))))
    p = prog(3, 4, op)
    assert P.run_external(text_of(p, [5.0, 6.0, 7.0]), TOOL) == [5.0, 6.0, 7.0, 0.0]


@needs_llvm
def test_dynwin_runs_like_evaluator():
    p = P.compile_hcol(X.dynwin_hcol(), X.GLOBAL_SIZES, "dynwin", X.DYNWIN_TRACE)
    r, t = P.run_test_harness(p, seed=4)
    assert r.ok and r.status_of(5) == "Pass"
