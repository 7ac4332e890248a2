from fractions import Fraction as Q

import pytest

from hcolc import hcol as H
from hcolc import scalar as F
from hcolc import sigma as S
from hcolc.carrier import RATIONAL
from hcolc.errors import MapNotInjective

Z = Q(0)
PLUS = F.binary("plus")


def dense(xs):
    return S.sparsify([Q(v) for v in xs])


def test_embed():
    y = S.eval_shcol(S.Embed(Z, 3, F.IConst(1)), dense([7]))
    assert [r.is_struct for r in y] == [True, False, True]
    assert S.densify(y, Z) == [0, 7, 0]


def test_gather():
    y = S.eval_shcol(S.Gather(Z, 4, 2, (2, 0)), dense([10, 11, 12, 13]))
    assert S.densify(y, Z) == [12, 10]


def test_scatter_injective():
    with pytest.raises(MapNotInjective):
        S.Scatter(Z, 2, 3, (1, 1))


def test_safe_cast_is_value_identity():
    e = S.SHBinOp(Z, 2, F.ignore_index("mul"))
    x = dense([1, 2, 3, 4])
    assert S.densify(S.eval_shcol(S.SafeCast(e), x), Z) == S.densify(S.eval_shcol(e, x), Z)


def test_union_disjoint():
    a = [S.structural(Z), S.Rtheta(Q(5))]
    b = [S.Rtheta(Q(3)), S.structural(Z)]
    y = S.vec2union(PLUS, a, b)
    assert [r.value for r in y] == [3, 5]
    assert not any(r.is_collision or r.is_struct for r in y)


def test_union_collision_flag():
    y = S.vec2union(PLUS, [S.Rtheta(Q(4))], [S.Rtheta(Q(5))], S.SAFE)
    assert y[0].value == 9 and y[0].is_collision
    y = S.vec2union(PLUS, [S.Rtheta(Q(4))], [S.Rtheta(Q(5))], S.UNSAFE)
    assert y[0].value == 9 and not y[0].is_collision


def test_union_of_structural():
    y = S.vec2union(PLUS, [S.structural(Z)], [S.structural(Z)])
    assert y[0].is_struct and not y[0].is_collision


def test_contracts():
    c = S.sparsity_contract(S.Embed(Z, 3, F.IConst(1)))
    assert (c.in_index_set, c.out_index_set) == ({0}, {1})
    u = S.Apply2Union(Z, PLUS, S.Embed(Z, 3, F.IConst(0)), S.Embed(Z, 3, F.IConst(2)))
    assert S.sparsity_contract(u).out_index_set == {0, 2}
    c = S.sparsity_contract(S.lift_hcol(H.HChebyshevDistance(2)))
    assert c.in_index_set == set(range(4)) and c.out_index_set == {0}


def test_facts_iunion_partition():
    fam = S.IUnion(Z, PLUS, 4, S.Embed(Z, 4, F.IVar(0)))
    rep = S.facts_check(S.SHCompose(fam, S.Gather(Z, 4, 1, (0,))), 20)
    assert rep.ok, rep.violations
    assert S.sparsity_contract(fam).out_index_set == set(range(4))


def test_facts_overlap_detected():
    u = S.Apply2Union(Z, PLUS, S.Embed(Z, 3, F.IConst(1)), S.Embed(Z, 3, F.IConst(1)))
    rep = S.facts_check(u, 5)
    assert not rep.ok


def test_facts_lift_passes():
    assert S.facts_check(S.lift_hcol(H.HScalarProd(2)), 5).ok


def _rewrite(h):
    lift = S.lift_hcol(h)
    return S.apply_sh_rewrites(lift, S.derive_sh_trace(lift))


def test_pointwise_rewrite():
    h = H.HPointwise(3, F.indexed_unary(F.CBin("mul", F.CVar(0), F.CVar(0))))
    se = _rewrite(h)
    assert type(se) is S.SHPointwise
    assert S.check_sh_hcol_equiv(h, se, 100).ok


def test_compose_distributes():
    h = H.HCompose(H.HReduction(3, PLUS, Z), H.HBinOp(3, F.ignore_index("mul")))
    lift = S.lift_hcol(h)
    once = S.apply_sh_rewrites(lift, [S.derive_sh_trace(lift)[0]])
    assert type(once) is S.SHCompose
    assert type(once.f) is S.LiftHOperator and type(once.g) is S.LiftHOperator


def test_lift_round_trip():
    h = H.HChebyshevDistance(2)
    x = [Q(v) for v in (1, 2, 4, 6)]
    y = S.eval_shcol(S.lift_hcol(h), S.sparsify(x))
    assert y == S.sparsify(H.eval_hcol(h, x, RATIONAL))


def test_binop_and_inductor_rewrites():
    for h in (H.HBinOp(3, F.ignore_index("max")), H.HInductor(3, F.binary("mul"), Q(1))):
        se = _rewrite(h)
        assert type(se) in (S.SHBinOp, S.SHInductor)
        assert S.check_sh_hcol_equiv(h, se, 100).ok


def test_empty_trace_is_identity():
    lift = S.lift_hcol(H.HScalarProd(2))
    assert S.apply_sh_rewrites(lift, []) == lift


def test_dynwin_rewrites_fully():
    from hcolc import fixtures as X
    b = H.apply_breakdown_trace(X.dynwin_hcol(), X.DYNWIN_TRACE)
    se = _rewrite(b)
    assert S.residual_lifts(se) == []
    assert S.check_sh_hcol_equiv(X.dynwin_hcol(), se, 100, global_sizes=(3,)).ok
    assert S.facts_check(se, 30, global_sizes=(3,)).ok
