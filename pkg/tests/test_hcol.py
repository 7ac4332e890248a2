from fractions import Fraction as Q

import pytest

from hcolc import hcol as H
from hcolc import scalar as F
from hcolc.carrier import BINARY64, RATIONAL
from hcolc.errors import IllTyped, RewriteError


def ev(e, xs, env=()):
    return H.eval_hcol(e, [Q(v) for v in xs], RATIONAL, env)


def test_induction_unfolds():
    assert ev(H.HInduction(3, F.binary("plus"), Q(0)), [2]) == [0, 2, 4]


def test_reduction_is_a_right_fold():
    # 1 - (2 - (3 - 0))
    assert ev(H.HReduction(3, F.binary("sub"), Q(0)), [1, 2, 3]) == [2]


def test_scalar_product():
    assert ev(H.HScalarProd(3), [1, 2, 3, 4, 5, 6]) == [32]


def test_eval_polynomial():
    e = H.HEvalPolynomial(3, F.VConst((Q(1), Q(2), Q(3))))
    assert ev(e, [2]) == [17]
    g = H.HEvalPolynomial(3, F.VVar(0))
    assert ev(g, [2], ([Q(1), Q(2), Q(3)],)) == [17]


def test_chebyshev():
    assert ev(H.HChebyshevDistance(2), [1, 2, 4, 6]) == [4]


def test_monomials_include_degree_zero():
    assert ev(H.HMonomialEnumerator(2), [3]) == [1, 3, 9]


def test_binary64_evaluation():
    assert H.eval_hcol(H.HScalarProd(1), [0.1, 3.0], BINARY64) == [0.1 * 3.0]


def test_dims():
    assert H.dims(H.HChebyshevDistance(2)) == (4, 1)
    f = H.HReduction(3, F.binary("plus"), Q(0))
    g = H.HCompose(f, H.HPointwise(3, F.indexed_unary(F.CVar(0))))
    assert H.dims(g) == (3, 1)
    assert H.dims(H.HCross(H.HScalarProd(1), H.HBinOp(1, F.ignore_index("plus")))) == (4, 2)
    assert H.dims(H.HCross(H.HScalarProd(1), H.HVMinus(1))) == (4, 2)


def test_dims_reject_bad_composition():
    with pytest.raises(IllTyped):
        H.dims(H.HCompose(H.HScalarProd(2), H.HChebyshevDistance(2)))


def test_r1_shape():
    e = H.apply_breakdown_trace(H.HScalarProd(3), [("R1", [])])
    assert e == H.HCompose(H.HReduction(3, F.binary("plus"), Q(0)),
                           H.HBinOp(3, F.ignore_index("mul")))
    assert ev(e, [1, 2, 3, 4, 5, 6]) == [32]


def test_r3_keeps_value():
    e = H.HChebyshevDistance(2)
    b = H.apply_breakdown_trace(e, [("R3", [])])
    assert b != e
    assert ev(b, [1, 2, 4, 6]) == [4]


def test_rule_does_not_match_other_constructor():
    with pytest.raises(RewriteError):
        H.apply_breakdown_trace(H.HScalarProd(3), [("R3", [])])
    assert H.RULES["R1"](H.HPointwise(2, F.indexed_unary(F.CVar(0)))) is None


def test_bad_path():
    with pytest.raises(RewriteError):
        H.apply_breakdown_trace(H.HScalarProd(3), [("R1", [0])])


def test_extensional_equiv_of_rewrite():
    e = H.HScalarProd(3)
    b = H.apply_breakdown_trace(e, [("R1", [])])
    assert H.check_extensional_equiv(e, b, 1000, seed=3).status == "Equal"


def test_fold_direction_counterexample():
    right = H.HReduction(3, F.binary("sub"), Q(0))
    # a left fold written with the same vocabulary: ((0 - x0) - x1) - x2
    left = H.HCompose(
        H.HReduction(3, F.binary("plus"), Q(0)),
        H.HPointwise(3, F.indexed_unary(F.CBin("sub", F.const(0), F.CVar(0)))))
    assert ev(right, [1, 2, 3]) == [2]
    assert ev(left, [1, 2, 3]) == [-6]
    v = H.check_extensional_equiv(right, left, 50, seed=1)
    assert v.status == "Counterexample"
    assert {"x", "y1", "y2"} <= set(v.detail)


def test_reflexive():
    e = H.HChebyshevDistance(3)
    assert H.check_extensional_equiv(e, e, 1).ok


def test_dynwin_trace_is_sound():
    from hcolc import fixtures as X
    e = X.dynwin_hcol()
    b = H.apply_breakdown_trace(e, X.DYNWIN_TRACE)
    assert H.check_extensional_equiv(e, b, 300, global_sizes=X.GLOBAL_SIZES).ok


def test_derived_trace_only_applies_named_rules():
    e = H.HCompose(H.HScalarProd(1), H.HStack(H.HScalarProd(2), H.HScalarProd(2)))
    tr = H.derive_breakdown_trace(e)
    assert [r for r, _ in tr] == ["R1", "R1", "R1"]
    b = H.apply_breakdown_trace(e, tr)
    assert H.check_extensional_equiv(e, b, 50).ok
