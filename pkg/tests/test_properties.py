import math
import random
from fractions import Fraction as Q

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from hcolc import analysis as A
from hcolc import dhcol as D
from hcolc import generators as Gen
from hcolc import hcol as H
from hcolc import llvmgen as G
from hcolc import lowering as L
from hcolc import scalar as F
from hcolc import sigma as S
from hcolc import symbolic as Sy
from hcolc import syntax as Sx
from hcolc.carrier import U64

seeds = st.integers(0, 2**32 - 1)
few = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def _program(seed):
    rng = random.Random(seed)
    e, _ = Gen.random_hcol(rng, rng.randint(1, 5), 3)
    return e


def _lowered(e):
    b = H.apply_breakdown_trace(e, H.derive_breakdown_trace(e))
    lift = S.lift_hcol(b)
    se = S.apply_sh_rewrites(lift, S.derive_sh_trace(lift))
    me = L.shcol_to_mshcol(se)
    return b, se, me, L.compile_program(me, (3,))


@few
@given(seeds)
def test_print_parse_round_trip(seed):
    e = _program(seed)
    b, se, me, p = _lowered(e)
    for lang, x in (("hcol", e), ("hcol", b), ("shcol", se), ("mshcol", me)):
        assert Sx.parse_program(Sx.print_program(x, lang), lang) == x
    assert Sx.parse_program(D.render(p.op), "dhcol") == p.op


@few
@given(seeds)
def test_dhcol_round_trip_random(seed):
    op = Gen.random_dhcol(random.Random(seed))
    assert Sx.parse_program(D.render(op), "dhcol") == op


@few
@given(seeds)
def test_breakdown_preserves_meaning(seed):
    e = _program(seed)
    b = H.apply_breakdown_trace(e, H.derive_breakdown_trace(e))
    assert H.check_extensional_equiv(e, b, 10, seed, (3,)).ok


@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 20))
def test_resolver_algebra(k, n, r):
    res = L.Lambda(L.Fake(L.Id(), k), n)
    assert res.resolve(r) == (r if r < n else r + k)
    assert L.Fake(L.Fake(L.Id(), k), n).resolve(r) == r + k + n


@given(st.lists(st.sampled_from(["local", "block"]), max_size=60), st.text("abc", min_size=1, max_size=3))
def test_fresh_names(calls, prefix):
    s = G.IRState()
    names = [getattr(s, c)(prefix) for c in calls]
    assert len(names) == len(set(names))


@few
@given(seeds)
def test_fuel_estimate_suffices(seed):
    rng = random.Random(seed)
    op = Gen.random_dhcol(rng)
    sigma, m = Gen.random_memory(rng, (4, 4))
    assert D.eval_dshoperator(sigma, op, m, D.estimate_fuel(op)) is not None


@few
@given(seeds)
def test_closure_trace_ignores_memory(seed):
    # the trace is a function of the program text alone; evaluating the
    # program on different memories does not change it
    rng = random.Random(seed)
    op = Gen.random_dhcol(rng)
    before = [c.render() for c in A.closure_trace(op)]
    for _ in range(3):
        sigma, m = Gen.random_memory(rng, (4, 4))
        D.eval_dshoperator(sigma, op, m, D.estimate_fuel(op))
        assert [c.render() for c in A.closure_trace(op)] == before


@few
@given(seeds)
def test_closure_trace_loop_unrolls(seed):
    rng = random.Random(seed)
    body = Gen.random_dhcol(rng, depth=2)
    n = rng.randint(0, 6)
    assert len(A.closure_trace(D.DSHLoop(n, body))) == n * len(A.closure_trace(body, [A.Index(0)]))


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(finite, finite, st.floats(0, 1, allow_nan=False))
def test_safe_zless_boundary(a, b, eps):
    r = A.safe_zless(a, b, eps)
    assert r in (0.0, 1.0)
    if r == 1.0:
        assert a < b
    if Q(b) - Q(a) > Q(eps) * 2 + Q(abs(b) + abs(a)) * A.UNIT_ROUNDOFF * 2:
        assert r == 1.0
    assert A.safe_zless(a, b, eps * 2) <= r


@given(st.integers(0, 2**70))
def test_u64_range(n):
    if n < 2**64:
        assert U64.from_nat(n) == n
    else:
        try:
            U64.from_nat(n)
        except Exception as err:
            assert type(err).__name__ == "RangeError"
        else:
            raise AssertionError("no range error")


def _sexpr(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        return Sy.svar(rng.randrange(3))
    op = rng.choice(["SPlus", "SSub", "SMult", "SMax", "SMin", "SAbs"])
    if op == "SAbs":
        return Sy.node(op, _sexpr(rng, depth - 1))
    return Sy.node(op, _sexpr(rng, depth - 1), _sexpr(rng, depth - 1))


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_interval_bound_is_sound(seed):
    rng = random.Random(seed)
    e = _sexpr(rng, 4)
    env = {k: A.interval(-rng.randint(0, 50), rng.randint(1, 50)) for k in range(3)}
    b = A.interval_error_bound(e, env)
    assert A.check_bound_by_sampling(e, env, b.abs_error, 3000, seed).ok


@given(st.lists(st.tuples(st.booleans(), st.integers(-5, 5)), min_size=1, max_size=6), seeds)
def test_union_with_structural_is_identity(cells, seed):
    a = [S.structural(Q(0)) if z else S.Rtheta(Q(v)) for z, v in cells]
    empty = [S.structural(Q(0))] * len(a)
    assert S.vec2union(F.binary("plus"), a, empty) == a
    assert S.vec2union(F.binary("plus"), empty, a) == a
