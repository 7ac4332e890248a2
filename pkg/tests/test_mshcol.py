from fractions import Fraction as Q

import pytest

from hcolc import hcol as H
from hcolc import lowering as L
from hcolc import mshcol as M
from hcolc import scalar as F
from hcolc import sigma as S
from hcolc.errors import MergeCollision, SparseRead

Z = Q(0)
PLUS = F.binary("plus")
I = F.IConst


def test_embed():
    assert M.eval_mshcol(M.MSHEmbed(3, I(1)), {0: Q(7)}) == {1: Q(7)}


def test_pick_absent_key():
    with pytest.raises(SparseRead):
        M.eval_mshcol(M.MSHPick(3, I(2)), {})


def _moved(src, dst, n=2, o=4):
    return M.MSHCompose(M.MSHEmbed(o, I(dst)), M.MSHPick(n, I(src)))


def test_union_merges_disjoint_blocks():
    f = M.MApply2Union(PLUS, _moved(0, 0), _moved(1, 2))
    g = M.MApply2Union(PLUS, _moved(0, 1), _moved(1, 3))
    y = M.eval_mshcol(M.MApply2Union(PLUS, f, g), {0: Q(5), 1: Q(6)})
    assert y == {0: 5, 1: 5, 2: 6, 3: 6}


def test_union_collision():
    with pytest.raises(MergeCollision):
        M.eval_mshcol(M.MApply2Union(PLUS, _moved(0, 1), _moved(1, 1)), {0: Q(1), 1: Q(2)})


def test_block_conversions():
    v = [S.Rtheta("A"), S.structural(Z), S.Rtheta("B"), S.Rtheta("C")]
    assert M.svector_to_mem_block(v) == {0: "A", 2: "B", 3: "C"}
    assert M.mem_block_to_svector({}, 2, Z) == [S.structural(Z)] * 2
    d = S.sparsify([Q(1), Q(2)])
    assert M.mem_block_to_svector(M.svector_to_mem_block(d), 2, Z) == d


def test_facts_dynwin():
    from hcolc import fixtures as X
    from hcolc import pipeline as P
    b = H.apply_breakdown_trace(X.dynwin_hcol(), X.DYNWIN_TRACE)
    lift = S.lift_hcol(b)
    se = S.apply_sh_rewrites(lift, S.derive_sh_trace(lift))
    me = L.shcol_to_mshcol(se)
    assert M.msh_facts_check(me, 30, global_sizes=(3,)).ok
    assert M.check_sh_msh_compat(se, me, 100, global_sizes=(3,)).ok


def test_facts_overlap():
    assert not M.msh_facts_check(M.MApply2Union(PLUS, _moved(0, 1), _moved(1, 1)), 5).ok


def test_facts_pick():
    assert M.msh_facts_check(M.MSHPick(3, I(1)), 5).ok


def test_compat_pointwise():
    f = F.indexed_unary(F.CBin("plus", F.CVar(0), F.CVar(1)))
    assert M.check_sh_msh_compat(S.SHPointwise(Z, 3, f), M.MSHPointwise(3, f), 50).ok


def test_compat_detects_mismatch():
    v = M.check_sh_msh_compat(S.Embed(Z, 3, I(1)), M.MSHEmbed(3, I(2)), 10)
    assert v.status == "Counterexample"


def test_compat_empty_family():
    se = S.IUnion(Z, PLUS, 0, S.Embed(Z, 3, F.IVar(0)))
    me = M.MSHIUnion(0, M.MSHEmbed(3, F.IVar(0)))
    assert M.check_sh_msh_compat(se, me, 5).ok
    assert M.eval_mshcol(me, {0: Q(1)}) == {}
