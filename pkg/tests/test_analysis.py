from fractions import Fraction as Q

import pytest

from hcolc import analysis as A
from hcolc import dhcol as D
from hcolc import fixtures as X
from hcolc import lowering as L
from hcolc import pipeline as P
from hcolc import symbolic as Sy
from hcolc.errors import UnboundedRange

PV, N, AV = D.PVar, D.NConst, D.AVar
U = A.UNIT_ROUNDOFF


def prog(i, o, op):
    return L.DProgram(i, o, "t", (), op)


@pytest.fixture(scope="module")
def dynwin():
    return P.compile_hcol(X.dynwin_hcol(), X.GLOBAL_SIZES, "dynwin", X.DYNWIN_TRACE)


def test_symbolic_passthrough():
    p = prog(3, 1, D.DSHAssign((PV(0), N(2)), (PV(1), N(0))))
    assert A.symbolic_exec(p) == Sy.svar(2)


def test_symbolic_power():
    op = D.DSHPower(N(2), (PV(0), N(0)), (PV(1), N(0)), D.APlus(AV(0), AV(1)), 0.0)
    s = A.symbolic_exec(prog(1, 1, op))
    assert Sy.render(s) == "SPlus (SPlus SConstZero (SVar 0)) (SVar 0)"


def test_symbolic_dynwin(dynwin):
    trace = []
    s = A.symbolic_exec(dynwin, trace=trace)
    assert Sy.alpha_equivalent(s, Sy.parse(X.EXPECTED_SYMBOLIC))
    path = A.operator_path(trace)
    assert path[0] == "DSHAlloc" and "DSHPower" in path and "DSHMemMap2" in path
    assert len(path) == 92


def test_alpha_equivalence_is_renaming_only():
    a = Sy.parse("SPlus (SVar 0) (SVar 1)")
    assert Sy.alpha_equivalent(a, Sy.parse("SPlus (SVar 5) (SVar 2)"))
    assert not Sy.alpha_equivalent(a, Sy.parse("SPlus (SVar 5) (SVar 5)"))


def test_interval_single_sum():
    e = Sy.node("SPlus", Sy.svar(0), Sy.svar(1))
    env = {0: A.interval(0, 1), 1: A.interval(0, 1)}
    b = A.interval_error_bound(e, env)
    assert b.abs_error <= 2 * U
    assert (b.range.lo, b.range.hi) == (0, 2)


def test_interval_variable_keeps_its_error():
    b = A.interval_error_bound(Sy.svar(0), {0: A.interval(-1, 1, Q(1, 10**9))})
    assert b.abs_error == Q(1, 10**9)


def test_interval_missing_variable():
    with pytest.raises(UnboundedRange):
        A.interval_error_bound(Sy.svar(3), {})


def test_interval_bound_holds_on_samples():
    e = Sy.parse("SMult (SPlus (SVar 0) (SVar 1)) (SSub (SVar 0) (SVar 1))")
    env = {0: A.interval(-3, 7), 1: A.interval(Q(1, 3), 2)}
    b = A.interval_error_bound(e, env)
    v = A.check_bound_by_sampling(e, env, b.abs_error, 20000, seed=5)
    assert v.ok, v.detail
    assert 0 < v.detail["max_observed"] <= float(b.abs_error)


def test_sampling_catches_a_false_bound():
    e = Sy.parse("SPlus (SVar 0) (SVar 1)")
    env = {0: A.interval(0, 1), 1: A.interval(0, 1)}
    assert not A.check_bound_by_sampling(e, env, 0, 2000, seed=1).ok


def test_safety_margin():
    assert A.safety_margin(Q(2, 10**13), Q(91, 10**14)) == Q(111, 10**14)
    assert A.safety_margin(0, 0) == 0


def test_safe_zless():
    assert A.safe_zless(1.0, 2.0, 1e-12) == 1.0
    assert A.safe_zless(1.0, 1.0 + 2**-52, 1e-12) == 0.0
    assert A.safe_zless(2.0, 1.0, 0.0) == 0.0


def test_dynwin_bounds(dynwin):
    s = A.symbolic_exec(dynwin)
    env = X.symbolic_ranges()
    lhs = A.interval_error_bound(s.args[0], env).abs_error
    rhs = A.interval_error_bound(s.args[1], env).abs_error
    assert Q(2, 10**13) <= lhs <= Q(2, 10**11)
    assert Q(91, 10**14) <= rhs <= Q(91, 10**12)
    assert A.safety_margin(lhs, rhs) >= Q(111, 10**14)


def test_coefficient_ranges():
    r = X.coefficient_ranges()
    assert r[0] == (0, Q(243, 20))
    assert r[1] == (Q(1, 100), Q(103, 5))
    assert r[2] == (Q(1, 12), Q(1, 2))


def test_gappa_problem(dynwin):
    s = A.symbolic_exec(dynwin)
    g = A.gappa_problem(s.args[0], s.args[1], X.symbolic_ranges(), X.GAPPA_NAMES)
    for name in ("a0", "a1", "a2", "v", "x1", "y2"):
        assert name in g
    assert "float<ieee_64, ne>" in g


def test_closure_trace_reference():
    ct = A.closure_trace(X.closure_example_program(), [A.OTHER] * 3)
    assert [c.render() for c in ct] == X.closure_example_expected()
    assert A.check_trace_no_overflow(ct).ok


def test_closure_trace_simple():
    assert A.closure_trace(D.DSHNop()) == []
    ct = A.closure_trace(D.DSHAssign((PV(0), N(1)), (PV(1), N(4))))
    assert [D.render(c.expr) for c in ct] == ["NConst 1", "NConst 4"]


def _flags(expr, ctx):
    rep = A.check_trace_no_overflow([A.RangeClosure(tuple(ctx), expr)])
    return {v["violation"] for v in rep.violations}


def test_underflow_flag():
    assert "UnderflowPossible" in _flags(D.NMinus(D.NVar(0), N(5)), [A.Index(3)])
    assert not _flags(D.NMinus(N(5), D.NVar(0)), [A.Index(3)])


def test_overflow_flag():
    assert "OverflowPossible" in _flags(D.NMult(N(2**63), N(2)), [])
    assert not _flags(D.NPlus(N(200), N(100)), [])
    rep = A.check_trace_no_overflow([A.RangeClosure((), D.NPlus(N(200), N(100)))], width=8)
    assert {v["violation"] for v in rep.violations} == {"OverflowPossible"}


def test_div_by_zero_flag():
    assert "DivByZeroPossible" in _flags(D.NDiv(N(4), D.NVar(0)), [A.Index(2)])
