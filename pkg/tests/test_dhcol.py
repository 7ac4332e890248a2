from fractions import Fraction as Q

import pytest

from hcolc import dhcol as D
from hcolc.errors import EvalError, NatOverflow, StructureMismatch, UnknownConstant

P, N, AV = D.PVar, D.NConst, D.AVar


def ptrs(*sizes, protected=()):
    return tuple(D.entry(D.PtrVal(a, s), a in protected) for a, s in enumerate(sizes))


def test_nat_division():
    assert D.eval_nexpr(D.NDiv(N(7), N(2)), (), {}, D.RHCOL) == 3


def test_division_by_zero():
    with pytest.raises(EvalError) as ei:
        D.eval_nexpr(D.NDiv(N(1), N(0)), (), {}, D.RHCOL)
    assert ei.value.kind == "DivByZero"


def test_nth_of_constant_block():
    e = D.ANth(D.MConst(((0, Q(5)),), 1), N(0))
    assert D.eval_aexpr(e, (), {}, D.RHCOL) == 5


def test_assign():
    m = {0: {0: Q(42)}, 1: {}}
    r = D.eval_dshoperator(ptrs(1, 2), D.DSHAssign((P(0), N(0)), (P(1), N(1))), m, 1)
    assert r.memory[1] == {1: 42}
    assert m[1] == {}  # the input memory is not mutated


def test_power_unfolds():
    op = D.DSHPower(N(3), (P(0), N(0)), (P(1), N(0)), D.APlus(AV(1), AV(0)), Q(0))
    r = D.eval_dshoperator(ptrs(1, 1), op, {0: {0: Q(2)}, 1: {}}, 1)
    assert r.memory[1] == {0: 6}


def test_power_argument_order():
    # the accumulator is the first variable of f: 0 - 2, then -2 - 2
    op = D.DSHPower(N(2), (P(0), N(0)), (P(1), N(0)), D.AMinus(AV(0), AV(1)), Q(0))
    r = D.eval_dshoperator(ptrs(1, 1), op, {0: {0: Q(2)}, 1: {}}, 1)
    assert r.memory[1] == {0: -4}


def test_zero_iteration_loop():
    m = {0: {0: Q(1)}}
    body = D.DSHMemInit(P(1), Q(9))
    assert D.eval_dshoperator(ptrs(1), D.DSHLoop(0, body), m, 5).memory == m


def test_loop_counts_up():
    op = D.DSHLoop(3, D.DSHAssign((P(1), D.NVar(0)), (P(2), D.NMinus(N(2), D.NVar(0)))))
    m = {0: {0: Q(1), 1: Q(2), 2: Q(3)}, 1: {}}
    r = D.eval_dshoperator(ptrs(3, 3), op, m, D.estimate_fuel(op))
    assert r.memory[1] == {0: 3, 1: 2, 2: 1}


def test_fuel_exhaustion():
    assert D.eval_dshoperator((), D.DSHNop(), {}, 0) is None


def test_alloc_frees_its_block():
    op = D.DSHAlloc(2, D.DSHMemInit(P(0), Q(1)))
    r = D.eval_dshoperator((), op, {}, D.estimate_fuel(op))
    assert r.memory == {}


def test_protected_block_rejects_writes():
    op = D.DSHMemInit(P(0), Q(1))
    r = D.eval_dshoperator(ptrs(1, protected=(0,)), op, {0: {}}, 1)
    assert type(r) is D.Err


def test_out_of_bounds():
    op = D.DSHAssign((P(0), N(0)), (P(1), N(5)))
    r = D.eval_dshoperator(ptrs(1, 2), op, {0: {0: Q(1)}, 1: {}}, 1)
    assert type(r) is D.Err and r.error.kind == "IndexOOB"


def test_estimate_fuel():
    assert D.estimate_fuel(D.DSHNop()) == 1
    small = D.estimate_fuel(D.DSHLoop(2, D.DSHNop()))
    big = D.estimate_fuel(D.DSHLoop(20, D.DSHNop()))
    assert big - small >= 18


def test_translate_known_constants():
    assert D.translate_rhcol_to_fhcol(D.AConst(Q(1))) == D.AConst(1.0)
    assert D.translate_rhcol_to_fhcol(D.AConst(Q(0))) == D.AConst(0.0)


def test_translate_unknown_constant():
    with pytest.raises(UnknownConstant):
        D.translate_rhcol_to_fhcol(D.DSHMemInit(P(0), Q(1, 3)))
    with pytest.raises(UnknownConstant):
        D.translate_rhcol_to_fhcol(D.DSHIMap(1, P(0), P(1), D.AMult(AV(0), D.AConst(Q(2)))))


def test_translate_nat_overflow():
    with pytest.raises(NatOverflow):
        D.translate_rhcol_to_fhcol(D.DSHLoop(2**64, D.DSHNop()))
    with pytest.raises(NatOverflow):
        D.translate_rhcol_to_fhcol(D.DSHAssign((P(0), N(2**64)), (P(1), N(0))))
    assert D.translate_rhcol_to_fhcol(D.DSHLoop(2**64 - 1, D.DSHNop())).n == 2**64 - 1


def _pairs(sig, mr):
    return [(sig, sig)], [(mr, D.rational_memory_to_float(mr))]


def test_rf_equiv_exact_on_small_integers():
    op = D.DSHBinOp(2, P(0), P(1), D.APlus(AV(1), AV(0)))
    fop = D.translate_rhcol_to_fhcol(op)
    s, m = _pairs(ptrs(4, 2), {0: {k: Q(k) for k in range(4)}, 1: {}})
    v = D.check_rf_equiv(op, fop, s, m, 0)
    assert v.ok and v.detail["max_deviation"] == 0


def test_rf_equiv_sees_rounding():
    op = D.DSHBinOp(1, P(0), P(1), D.APlus(AV(1), AV(0)))
    fop = D.translate_rhcol_to_fhcol(op)
    sig = ptrs(2, 1)
    mr = {0: {0: Q(1, 10), 1: Q(2, 10)}, 1: {}}
    mf = {0: {0: 0.1, 1: 0.2}, 1: {}}
    v = D.check_rf_equiv(op, fop, [(sig, sig)], [(mr, mf)], Q(1, 10**15))
    assert v.ok
    assert 0 < v.detail["max_deviation"] < 1e-15
    assert not D.check_rf_equiv(op, fop, [(sig, sig)], [(mr, mf)], 0).ok


def test_rf_equiv_structure_divergence():
    op = D.DSHAssign((P(0), N(0)), (P(1), N(0)))
    bad = D.DSHAssign((P(0), N(0)), (P(1), N(3)))
    sig = ptrs(1, 1)
    m = {0: {0: Q(1)}, 1: {}}
    with pytest.raises(StructureMismatch):
        D.check_rf_equiv(op, bad, [(sig, sig)], [(m, D.rational_memory_to_float(m))], 0)


def test_render_is_constructor_syntax():
    op = D.DSHLoop(2, D.DSHAssign((P(0), D.NVar(0)), (P(1), N(0))))
    assert D.render(op) == "DSHLoop 2 (DSHAssign ((PVar 0), (NVar 0)) ((PVar 1), (NConst 0)))"


def test_nat_subtraction_per_carrier():
    e = D.NMinus(N(2), N(5))
    assert D.eval_nexpr(e, (), {}, D.RHCOL) == 0
    assert D.eval_nexpr(e, (), {}, D.FHCOL) == 2**64 - 3


def test_trace_records_memory_after_each_step():
    op = D.seq(D.DSHMemInit(P(0), Q(1)), D.DSHMemInit(P(0), Q(0)))
    trace = []
    D.eval_dshoperator(ptrs(1), op, {0: {}}, D.estimate_fuel(op), trace=trace)
    snaps = [t for t in trace if "memory" in t]
    assert len(snaps) == 1 and snaps[0]["memory"]
